//! Subsets, set partitions and the moment/cumulant transform over the
//! partition lattice.
//!
//! Partitions are enumerated as restricted growth strings: element `i` of the
//! parent set is assigned block `a[i]` with `a[0] = 0` and
//! `a[i] <= 1 + max(a[..i])`. Lexicographic order of the strings yields
//! partitions whose blocks are already sorted by smallest element, and whose
//! elements keep the parent order.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Num;

use crate::error::{Error, Result};

pub const DEFAULT_SUBSET_LIMIT: usize = 20;
pub const DEFAULT_PARTITION_LIMIT: usize = 14;
pub const MAX_BELL_INDEX: usize = 25;

/// An ordered collection of distinct labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet<L> {
    elements: Vec<L>,
}

impl<L: Ord + Clone> IndexSet<L> {
    pub fn new(elements: Vec<L>) -> Result<Self> {
        let distinct: BTreeSet<&L> = elements.iter().collect();
        if distinct.len() != elements.len() {
            return Err(Error::invalid("index set contains duplicate labels"));
        }
        Ok(IndexSet { elements })
    }

    pub fn empty() -> Self {
        IndexSet {
            elements: Vec::new(),
        }
    }
}

impl IndexSet<usize> {
    /// The set `{1, ..., n}`.
    pub fn range(n: usize) -> Self {
        IndexSet {
            elements: (1..=n).collect(),
        }
    }
}

impl<L> IndexSet<L> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[L] {
        &self.elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, L> {
        self.elements.iter()
    }
}

impl<L: fmt::Display> fmt::Display for IndexSet<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// A partition of a parent [`IndexSet`] into non-empty disjoint blocks.
///
/// Blocks are ordered by their smallest element (in parent order) and the
/// elements of each block keep the parent order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition<L> {
    blocks: Vec<Vec<L>>,
}

impl<L: Clone> SetPartition<L> {
    /// Builds the partition described by a restricted growth string over
    /// `parent`.
    pub fn from_growth_string(parent: &[L], assignment: &[usize]) -> Self {
        debug_assert_eq!(parent.len(), assignment.len());
        let n_blocks = assignment.iter().map(|&b| b + 1).max().unwrap_or(0);
        let mut blocks = vec![Vec::new(); n_blocks];
        for (label, &b) in parent.iter().zip(assignment) {
            blocks[b].push(label.clone());
        }
        SetPartition { blocks }
    }
}

impl<L: Ord + Clone> SetPartition<L> {
    /// Builds a partition from arbitrary blocks, validating it against the
    /// parent set and bringing it to canonical form.
    pub fn from_blocks(parent: &IndexSet<L>, blocks: Vec<Vec<L>>) -> Result<Self> {
        let position = |l: &L| parent.elements.iter().position(|e| e == l);
        let mut seen = vec![false; parent.len()];
        let mut keyed = Vec::with_capacity(blocks.len());
        for block in blocks {
            if block.is_empty() {
                return Err(Error::invalid("partition contains an empty block"));
            }
            let mut positions = Vec::with_capacity(block.len());
            for l in &block {
                let p = position(l)
                    .ok_or_else(|| Error::invalid("block element is not in the parent set"))?;
                if seen[p] {
                    return Err(Error::invalid("blocks are not disjoint"));
                }
                seen[p] = true;
                positions.push(p);
            }
            positions.sort_unstable();
            keyed.push(positions);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("blocks do not cover the parent set"));
        }
        keyed.sort_by_key(|b| b[0]);
        let blocks = keyed
            .into_iter()
            .map(|b| b.into_iter().map(|p| parent.elements[p].clone()).collect())
            .collect();
        Ok(SetPartition { blocks })
    }
}

impl<L> SetPartition<L> {
    pub fn empty() -> Self {
        SetPartition { blocks: Vec::new() }
    }

    pub fn blocks(&self) -> &[Vec<L>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(Vec::len)
    }

    pub fn into_blocks(self) -> Vec<Vec<L>> {
        self.blocks
    }
}

/// Streaming enumeration of restricted growth strings of length `n` in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct GrowthStrings {
    current: Vec<usize>,
    // max of current[..=i]
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

impl GrowthStrings {
    pub fn new(n: usize) -> Self {
        GrowthStrings {
            current: vec![0; n],
            prefix_max: vec![0; n],
            started: false,
            done: false,
        }
    }

    /// Advances to the next string; returns `None` when exhausted.
    pub fn next_string(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.current);
        }
        let n = self.current.len();
        // Find the rightmost position that can be incremented.
        let mut i = n;
        while i > 1 {
            i -= 1;
            if self.current[i] <= self.prefix_max[i - 1] {
                self.current[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.current[i]);
                for j in i + 1..n {
                    self.current[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return Some(&self.current);
            }
        }
        self.done = true;
        None
    }
}

/// Iterator over all partitions of a parent set.
#[derive(Debug, Clone)]
pub struct Partitions<L> {
    parent: Vec<L>,
    strings: GrowthStrings,
}

impl<L: Clone> Iterator for Partitions<L> {
    type Item = SetPartition<L>;

    fn next(&mut self) -> Option<Self::Item> {
        let s = self.strings.next_string()?;
        Some(SetPartition::from_growth_string(&self.parent, s))
    }
}

/// Streams the partitions of `s` without any size limit.
pub fn partitions_iter<L: Clone>(s: &IndexSet<L>) -> Partitions<L> {
    Partitions {
        parent: s.elements.clone(),
        strings: GrowthStrings::new(s.len()),
    }
}

pub fn subsets<L: Clone>(s: &IndexSet<L>) -> Result<Vec<IndexSet<L>>> {
    subsets_with_limit(s, DEFAULT_SUBSET_LIMIT)
}

/// All `2^|s|` subsets, in bitmask order (bit `i` selects element `i`).
pub fn subsets_with_limit<L: Clone>(s: &IndexSet<L>, limit: usize) -> Result<Vec<IndexSet<L>>> {
    let n = s.len();
    if n > limit || n >= usize::BITS as usize {
        return Err(Error::LimitExceeded {
            what: "subset enumeration",
            size: n,
            limit,
        });
    }
    Ok((0..1usize << n)
        .map(|mask| IndexSet {
            elements: s
                .elements
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, e)| e.clone())
                .collect(),
        })
        .collect())
}

pub fn set_partitions<L: Clone>(s: &IndexSet<L>) -> Result<Vec<SetPartition<L>>> {
    set_partitions_with_limit(s, DEFAULT_PARTITION_LIMIT)
}

pub fn set_partitions_with_limit<L: Clone>(
    s: &IndexSet<L>,
    limit: usize,
) -> Result<Vec<SetPartition<L>>> {
    if s.len() > limit {
        return Err(Error::LimitExceeded {
            what: "set partition enumeration",
            size: s.len(),
            limit,
        });
    }
    Ok(partitions_iter(s).collect())
}

/// Bell number via the Bell triangle.
pub fn bell_number(n: usize) -> Result<u64> {
    if n > MAX_BELL_INDEX {
        return Err(Error::LimitExceeded {
            what: "Bell number index",
            size: n,
            limit: MAX_BELL_INDEX,
        });
    }
    if n == 0 {
        return Ok(1);
    }
    let overflow = || Error::invalid(format!("Bell number {n} overflows u64"));
    let mut row = vec![1u64];
    for _ in 1..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("non-empty row"));
        for &r in &row {
            let v = next
                .last()
                .expect("non-empty row")
                .checked_add(r)
                .ok_or_else(overflow)?;
            next.push(v);
        }
        row = next;
    }
    Ok(*row.last().expect("non-empty row"))
}

/// Cumulants (connected moments) `kappa_1, ..., kappa_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSequence<T> {
    values: Vec<T>,
}

impl<T> CumulantSequence<T> {
    /// `values[k]` is the cumulant of order `k + 1`.
    pub fn new(values: Vec<T>) -> Self {
        CumulantSequence { values }
    }

    pub fn max_order(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, order: usize) -> Option<&T> {
        order.checked_sub(1).and_then(|k| self.values.get(k))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Rows `0..=n` of Pascal's triangle in the scalar type itself.
fn binomial_rows<T: Num + Clone>(n: usize) -> Vec<Vec<T>> {
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    rows.push(vec![T::one()]);
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = Vec::with_capacity(i + 1);
        row.push(T::one());
        for k in 1..i {
            row.push(prev[k - 1].clone() + prev[k].clone());
        }
        row.push(T::one());
        rows.push(row);
    }
    rows
}

/// Moments `m_0 = 1, m_1, ..., m_n` from cumulants.
///
/// Uses `m_k = sum_{j=1}^{k} C(k-1, j-1) kappa_j m_{k-j}`, which groups the
/// partition sum by the block containing the first element.
pub fn moment_sequence<T: Num + Clone>(c: &CumulantSequence<T>, n: usize) -> Result<Vec<T>> {
    if n > c.max_order() {
        return Err(Error::MissingCumulantOrder {
            order: c.max_order() + 1,
        });
    }
    let binom = binomial_rows::<T>(n.saturating_sub(1));
    let mut m = Vec::with_capacity(n + 1);
    m.push(T::one());
    for k in 1..=n {
        let mut acc = T::zero();
        for j in 1..=k {
            acc = acc + binom[k - 1][j - 1].clone() * c.values[j - 1].clone() * m[k - j].clone();
        }
        m.push(acc);
    }
    Ok(m)
}

/// Sum over all partitions of `{1..n}` of the product of block cumulants.
pub fn moments_from_cumulants<T: Num + Clone>(c: &CumulantSequence<T>, n: usize) -> Result<T> {
    Ok(moment_sequence(c, n)?.pop().expect("m_0 always present"))
}

/// Cumulants `kappa_1..kappa_n` from moments `m[0] = m_1, m[1] = m_2, ...`.
pub fn cumulant_sequence<T: Num + Clone>(m: &[T], n: usize) -> Result<CumulantSequence<T>> {
    if n > m.len() {
        return Err(Error::MissingMomentOrder { order: m.len() + 1 });
    }
    let binom = binomial_rows::<T>(n.saturating_sub(1));
    let moment = |k: usize| -> T {
        if k == 0 {
            T::one()
        } else {
            m[k - 1].clone()
        }
    };
    let mut kappa: Vec<T> = Vec::with_capacity(n);
    for k in 1..=n {
        let mut acc = moment(k);
        for j in 1..k {
            acc = acc - binom[k - 1][j - 1].clone() * kappa[j - 1].clone() * moment(k - j);
        }
        kappa.push(acc);
    }
    Ok(CumulantSequence::new(kappa))
}

/// Cumulant of order `n` from the moments `m_1..m_n` (Mobius inversion of
/// [`moments_from_cumulants`]).
pub fn cumulants_from_moments<T: Num + Clone>(m: &[T], n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("cumulant order starts at 1"));
    }
    let seq = cumulant_sequence(m, n)?;
    Ok(seq.values.last().cloned().expect("n >= 1"))
}
