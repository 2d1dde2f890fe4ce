//! Generalized Feynman graphs in their labeled form.
//!
//! A graph with `m` full vertices of degrees `p_1..p_m` is identified with a
//! [`Configuration`]: a subset `K` of the leg set (legs ending on outer empty
//! vertices) and a partition of the remaining legs (each block is one inner
//! empty vertex). Graph isomorphism is never computed; every labeled pair
//! `(K, I)` is its own graph.
//!
//! Canonical text form, used in logs, goldens and graph ids:
//!
//! ```text
//! m;p1,...,pm;K=(v,s)(v,s)...;I=[(v,s)(v,s)|(v,s)...]
//! ```
//!
//! Legs in `K` are listed in lexicographic order, blocks are separated by
//! `|` and listed by smallest leg, legs inside a block in lexicographic
//! order. The empty graph is `0;;K=;I=[]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::combinatorics::{
    bell_number, GrowthStrings, IndexSet, SetPartition, DEFAULT_PARTITION_LIMIT,
    DEFAULT_SUBSET_LIMIT,
};
use crate::error::{Error, Result};

/// Leg `slot` of full vertex `vertex`, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LegLabel {
    pub vertex: usize,
    pub slot: usize,
}

impl LegLabel {
    pub const fn new(vertex: usize, slot: usize) -> Self {
        LegLabel { vertex, slot }
    }
}

impl fmt::Display for LegLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.vertex, self.slot)
    }
}

/// The leg set of `m` full vertices with the given degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Omega {
    degrees: Vec<usize>,
    legs: Vec<LegLabel>,
}

impl Omega {
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn legs(&self) -> &[LegLabel] {
        &self.legs
    }

    pub fn num_vertices(&self) -> usize {
        self.degrees.len()
    }

    pub fn num_legs(&self) -> usize {
        self.legs.len()
    }

    pub fn index_set(&self) -> IndexSet<LegLabel> {
        IndexSet::new(self.legs.clone()).expect("leg labels are unique")
    }

    /// Position of a leg in `legs()`.
    pub fn position(&self, leg: LegLabel) -> Option<usize> {
        if leg.vertex == 0 || leg.vertex > self.degrees.len() {
            return None;
        }
        if leg.slot == 0 || leg.slot > self.degrees[leg.vertex - 1] {
            return None;
        }
        let offset: usize = self.degrees[..leg.vertex - 1].iter().sum();
        Some(offset + leg.slot - 1)
    }
}

/// Legs in lexicographic `(vertex, slot)` order.
pub fn build_omega(degrees: &[usize]) -> Result<Omega> {
    if let Some(j) = degrees.iter().position(|&p| p == 0) {
        return Err(Error::invalid(format!(
            "vertex {} has degree 0; constant vertices are not part of the leg set",
            j + 1
        )));
    }
    let legs = degrees
        .iter()
        .enumerate()
        .flat_map(|(j, &p)| (1..=p).map(move |s| LegLabel::new(j + 1, s)))
        .collect();
    Ok(Omega {
        degrees: degrees.to_vec(),
        legs,
    })
}

/// A labeled generalized Feynman graph `(K, I)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    omega: Arc<Omega>,
    outer: Vec<LegLabel>,
    blocks: SetPartition<LegLabel>,
}

impl Configuration {
    /// Validates `outer` and `blocks` against `omega`.
    pub fn new(omega: Arc<Omega>, mut outer: Vec<LegLabel>, blocks: Vec<Vec<LegLabel>>) -> Result<Self> {
        outer.sort_unstable();
        if outer.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("outer legs repeat"));
        }
        if outer.iter().any(|l| omega.position(*l).is_none()) {
            return Err(Error::invalid("outer leg is not in the leg set"));
        }
        let rest: Vec<LegLabel> = omega
            .legs
            .iter()
            .copied()
            .filter(|l| outer.binary_search(l).is_err())
            .collect();
        let rest = IndexSet::new(rest)?;
        let blocks = SetPartition::from_blocks(&rest, blocks)?;
        Ok(Configuration {
            omega,
            outer,
            blocks,
        })
    }

    pub fn omega(&self) -> &Omega {
        &self.omega
    }

    pub fn degrees(&self) -> &[usize] {
        &self.omega.degrees
    }

    pub fn num_vertices(&self) -> usize {
        self.omega.degrees.len()
    }

    /// The set `K`.
    pub fn outer(&self) -> &[LegLabel] {
        &self.outer
    }

    /// The partition `I` of the legs not in `K`.
    pub fn blocks(&self) -> &SetPartition<LegLabel> {
        &self.blocks
    }

    pub fn classify(&self) -> GraphClass {
        GraphClass {
            connected: is_connected(self),
            vacuum: is_vacuum(self),
            classical: self.blocks.block_sizes().all(|s| s == 2),
        }
    }

    /// Restricts the configuration to a set of vertices that no block
    /// crosses, relabeling the kept vertices `1..` in increasing order.
    pub fn restrict(&self, vertices: &[usize]) -> Result<Configuration> {
        let mut kept = vertices.to_vec();
        kept.sort_unstable();
        kept.dedup();
        let relabel = |l: &LegLabel| -> Option<LegLabel> {
            kept.iter()
                .position(|&v| v == l.vertex)
                .map(|i| LegLabel::new(i + 1, l.slot))
        };
        let degrees: Result<Vec<usize>> = kept
            .iter()
            .map(|&v| {
                self.omega
                    .degrees
                    .get(v.wrapping_sub(1))
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("vertex {v} out of range")))
            })
            .collect();
        let omega = Arc::new(build_omega(&degrees?)?);
        let outer = self.outer.iter().filter_map(relabel).collect();
        let mut blocks = Vec::new();
        for block in self.blocks.blocks() {
            let mapped: Vec<LegLabel> = block.iter().filter_map(relabel).collect();
            if mapped.is_empty() {
                continue;
            }
            if mapped.len() != block.len() {
                return Err(Error::invalid("a block crosses the vertex restriction"));
            }
            blocks.push(mapped);
        }
        Configuration::new(omega, outer, blocks)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.num_vertices())?;
        for (i, p) in self.omega.degrees.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ";K=")?;
        for l in &self.outer {
            write!(f, "{l}")?;
        }
        write!(f, ";I=[")?;
        for (i, block) in self.blocks.blocks().iter().enumerate() {
            if i > 0 {
                write!(f, "|")?;
            }
            for l in block {
                write!(f, "{l}")?;
            }
        }
        write!(f, "]")
    }
}

fn parse_legs(s: &str) -> Result<Vec<LegLabel>> {
    let bad = || Error::invalid(format!("malformed leg list `{s}`"));
    let mut legs = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or_else(bad)?;
        let close = body.find(')').ok_or_else(bad)?;
        let (v, sl) = body[..close].split_once(',').ok_or_else(bad)?;
        legs.push(LegLabel::new(
            v.trim().parse().map_err(|_| bad())?,
            sl.trim().parse().map_err(|_| bad())?,
        ));
        rest = body[close + 1..].trim_start();
    }
    Ok(legs)
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::invalid(format!("malformed graph id `{s}`: {what}"));
        let parts: Vec<&str> = s.trim().splitn(4, ';').collect();
        if parts.len() != 4 {
            return Err(bad("expected four `;`-separated fields"));
        }
        let m: usize = parts[0].trim().parse().map_err(|_| bad("vertex count"))?;
        let degrees: Vec<usize> = if parts[1].trim().is_empty() {
            Vec::new()
        } else {
            parts[1]
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| bad("degree list")))
                .collect::<Result<_>>()?
        };
        if degrees.len() != m {
            return Err(bad("vertex count does not match the degree list"));
        }
        let outer = parse_legs(parts[2].trim().strip_prefix("K=").ok_or_else(|| bad("K field"))?)?;
        let inner = parts[3]
            .trim()
            .strip_prefix("I=[")
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| bad("I field"))?;
        let blocks = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split('|').map(parse_legs).collect::<Result<_>>()?
        };
        let config = Configuration::new(Arc::new(build_omega(&degrees)?), outer, blocks)?;
        Ok(config)
    }
}

/// Connectivity, vacuum and classical flags of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphClass {
    pub connected: bool,
    pub vacuum: bool,
    /// Every block has exactly two legs.
    pub classical: bool,
}

/// Optional constraints on [`GraphClass`] flags; `None` accepts either value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphFilter {
    pub connected: Option<bool>,
    pub vacuum: Option<bool>,
    pub classical: Option<bool>,
}

impl GraphFilter {
    pub const ALL: GraphFilter = GraphFilter {
        connected: None,
        vacuum: None,
        classical: None,
    };

    pub fn connected() -> Self {
        GraphFilter {
            connected: Some(true),
            ..Self::ALL
        }
    }

    pub fn connected_vacuum() -> Self {
        GraphFilter {
            connected: Some(true),
            vacuum: Some(true),
            ..Self::ALL
        }
    }

    pub fn matches(&self, c: &Configuration) -> bool {
        let ok = |want: Option<bool>, f: &dyn Fn() -> bool| want.is_none_or(|w| w == f());
        ok(self.connected, &|| is_connected(c))
            && ok(self.vacuum, &|| is_vacuum(c))
            && ok(self.classical, &|| {
                c.blocks.block_sizes().all(|s| s == 2)
            })
    }
}

/// Number of configurations for the given degrees, `sum_K Bell(|Omega \ K|)`.
pub fn configuration_count(degrees: &[usize]) -> Result<u64> {
    let n: usize = degrees.iter().sum();
    // sum_k C(n,k) Bell(n-k)
    let mut total = 0u64;
    let mut binom = 1u64;
    for k in 0..=n {
        total += binom * bell_number(n - k)?;
        binom = binom * (n - k) as u64 / (k + 1) as u64;
    }
    Ok(total)
}

/// Streams every configuration `(K, I)` for the degrees exactly once: `K` in
/// subset bitmask order over the legs, then partitions of the remaining legs
/// in canonical order.
pub fn enumerate_configurations(degrees: &[usize], filter: Option<GraphFilter>) -> Result<ConfigurationIter> {
    let omega = Arc::new(build_omega(degrees)?);
    let n = omega.num_legs();
    let limit = DEFAULT_PARTITION_LIMIT.min(DEFAULT_SUBSET_LIMIT);
    if n > limit {
        return Err(Error::LimitExceeded {
            what: "configuration enumeration (total degree)",
            size: n,
            limit,
        });
    }
    Ok(ConfigurationIter {
        omega,
        filter: filter.unwrap_or(GraphFilter::ALL),
        mask: 0,
        rest: Vec::new(),
        outer: Vec::new(),
        strings: None,
    })
}

pub struct ConfigurationIter {
    omega: Arc<Omega>,
    filter: GraphFilter,
    mask: u64,
    rest: Vec<LegLabel>,
    outer: Vec<LegLabel>,
    strings: Option<GrowthStrings>,
}

impl Iterator for ConfigurationIter {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        let n = self.omega.num_legs();
        loop {
            if self.strings.is_none() {
                if self.mask >= 1u64 << n {
                    return None;
                }
                let (outer, rest): (Vec<_>, Vec<_>) = self
                    .omega
                    .legs
                    .iter()
                    .enumerate()
                    .partition(|(i, _)| self.mask >> i & 1 == 1);
                self.outer = outer.into_iter().map(|(_, l)| *l).collect();
                self.rest = rest.into_iter().map(|(_, l)| *l).collect();
                self.strings = Some(GrowthStrings::new(self.rest.len()));
                self.mask += 1;
            }
            let strings = self.strings.as_mut().expect("set above");
            match strings.next_string() {
                Some(s) => {
                    let c = Configuration {
                        omega: Arc::clone(&self.omega),
                        outer: self.outer.clone(),
                        blocks: SetPartition::from_growth_string(&self.rest, s),
                    };
                    if self.filter.matches(&c) {
                        return Some(c);
                    }
                }
                None => self.strings = None,
            }
        }
    }
}

/// Minimal union-find over `0..n`.
struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn vertex_components(c: &Configuration) -> DisjointSets {
    let mut dsu = DisjointSets::new(c.num_vertices());
    for block in c.blocks.blocks() {
        for pair in block.windows(2) {
            dsu.union(pair[0].vertex - 1, pair[1].vertex - 1);
        }
    }
    dsu
}

/// Connectivity of the full-vertex/block incidence graph. Outer vertices
/// never join components. The empty graph is not connected.
pub fn is_connected(c: &Configuration) -> bool {
    let m = c.num_vertices();
    if m == 0 {
        return false;
    }
    let mut dsu = vertex_components(c);
    (1..m).all(|v| dsu.find(v) == dsu.find(0))
}

pub fn is_vacuum(c: &Configuration) -> bool {
    c.outer.is_empty()
}

/// Partition of the full vertices `1..=m` into connected components.
pub fn connected_components(c: &Configuration) -> SetPartition<usize> {
    let m = c.num_vertices();
    if m == 0 {
        return SetPartition::empty();
    }
    let mut dsu = vertex_components(c);
    let roots: Vec<usize> = (0..m).map(|v| dsu.find(v)).collect();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_block: Vec<Option<usize>> = vec![None; m];
    for (v, &r) in roots.iter().enumerate() {
        match root_block[r] {
            Some(b) => blocks[b].push(v + 1),
            None => {
                root_block[r] = Some(blocks.len());
                blocks.push(vec![v + 1]);
            }
        }
    }
    SetPartition::from_blocks(&IndexSet::range(m), blocks).expect("components partition the vertices")
}

/// The perfect-matching view of a configuration whose blocks all have two
/// legs; `None` otherwise.
pub fn classical_reduction(c: &Configuration) -> Option<Vec<(LegLabel, LegLabel)>> {
    c.blocks
        .blocks()
        .iter()
        .map(|b| match b.as_slice() {
            [a, b] => Some((*a, *b)),
            _ => None,
        })
        .collect()
}
