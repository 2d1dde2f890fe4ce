//! Feynman rules: turns a configuration into a factorized integrand and
//! integrates it.
//!
//! For the Poisson model all legs of one block share a variable, since the
//! cumulants are supported on the total diagonal. For the Gaussian model each
//! leg has its own variable and every block must be a pair.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::TestField;
use crate::graphs::{Configuration, LegLabel};
use crate::kernels::{VertexKernelSet, TAIL_RADIUS};
use crate::noise::{CovarianceKernel, DiagonalWeight, FlowWindow, NoiseModel};
use crate::quadrature::tensor::{contract, tabulated_entries, BoxGrid, DenseFactor};

type FactorFn = dyn Fn(&[&[f64]]) -> f64 + Send + Sync;

/// A function of a few integration variables. `vars` is sorted and the
/// closure receives one point per listed variable.
#[derive(Clone)]
pub struct Factor {
    vars: Vec<usize>,
    f: Arc<FactorFn>,
}

impl Factor {
    pub fn new<F>(vars: Vec<usize>, f: F) -> Self
    where
        F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        assert!(vars.windows(2).all(|w| w[0] < w[1]), "factor variables must be sorted and distinct");
        Factor { vars, f: Arc::new(f) }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn eval(&self, points: &[&[f64]]) -> f64 {
        (self.f)(points)
    }
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Factor").field("vars", &self.vars).finish_non_exhaustive()
    }
}

/// `prefactor * prod factors` over a product of boxes, one `d`-dimensional
/// box per variable.
#[derive(Debug, Clone)]
pub struct Integrand {
    dimension: usize,
    boxes: Vec<Vec<(f64, f64)>>,
    factors: Vec<Factor>,
    prefactor: f64,
    zero: bool,
}

impl Integrand {
    pub fn new(dimension: usize, boxes: Vec<Vec<(f64, f64)>>, factors: Vec<Factor>, prefactor: f64) -> Self {
        let zero = prefactor == 0.0 || boxes.iter().flatten().any(|&(lo, hi)| !(lo < hi));
        Integrand {
            dimension,
            boxes,
            factors,
            prefactor,
            zero,
        }
    }

    /// The identically vanishing integrand.
    pub fn zero(dimension: usize) -> Self {
        Integrand {
            dimension,
            boxes: Vec::new(),
            factors: Vec::new(),
            prefactor: 0.0,
            zero: true,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Dimension `d` of each variable.
    pub fn point_dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_variables(&self) -> usize {
        self.boxes.len()
    }

    /// Total integration dimension.
    pub fn total_dimension(&self) -> usize {
        self.dimension * self.boxes.len()
    }

    pub fn boxes(&self) -> &[Vec<(f64, f64)>] {
        &self.boxes
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// The integrand at one point per variable.
    pub fn evaluate(&self, points: &[&[f64]]) -> f64 {
        if self.zero {
            return 0.0;
        }
        let mut v = self.prefactor;
        let mut args: Vec<&[f64]> = Vec::new();
        for f in &self.factors {
            args.clear();
            args.extend(f.vars.iter().map(|&i| points[i]));
            v *= f.eval(&args);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Tensor rules in one dimension or for small total dimension, Monte
    /// Carlo otherwise.
    Auto,
    Tensor,
    MonteCarlo,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Auto => "auto",
            Scheme::Tensor => "tensor",
            Scheme::MonteCarlo => "monte_carlo",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "auto" => Some(Scheme::Auto),
            "tensor" => Some(Scheme::Tensor),
            "monte_carlo" => Some(Scheme::MonteCarlo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    /// Tensor rules stop when the error estimate is below
    /// `max(abs_tol, rel_tol * |value|)`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Monte Carlo stops when the standard error is below
    /// `mc_rel_tol * |mean|`.
    pub mc_rel_tol: f64,
    /// Budget of integrand evaluations (tabulated entries or samples).
    pub max_evaluations: u64,
    pub seed: u64,
    pub mc_batch: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: Scheme::Auto,
            abs_tol: 1e-8,
            rel_tol: 0.0,
            mc_rel_tol: 1e-3,
            max_evaluations: 200_000_000,
            seed: 0,
            mc_batch: 8192,
        }
    }
}

impl QuadratureSpec {
    pub fn tensor(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSpec {
            scheme: Scheme::Tensor,
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    pub fn monte_carlo(rel_tol: f64, seed: u64) -> Self {
        QuadratureSpec {
            scheme: Scheme::MonteCarlo,
            mc_rel_tol: rel_tol,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol >= 0.0
            && self.rel_tol >= 0.0
            && (self.abs_tol > 0.0 || self.rel_tol > 0.0)
            && self.mc_rel_tol > 0.0
            && self.mc_batch > 0
            && self.max_evaluations > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("quadrature tolerances and budgets must be positive"))
        }
    }
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeUsed {
    Exact,
    Tensor { panels: usize },
    MonteCarlo { samples: u64, seed: u64 },
}

impl fmt::Display for SchemeUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeUsed::Exact => write!(f, "exact"),
            SchemeUsed::Tensor { panels } => write!(f, "tensor(panels={panels})"),
            SchemeUsed::MonteCarlo { samples, seed } => write!(f, "monte_carlo(samples={samples},seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult {
    pub value: f64,
    pub error_estimate: f64,
    pub scheme: SchemeUsed,
    pub evaluations: u64,
}

impl IntegrationResult {
    pub fn exact_zero() -> Self {
        IntegrationResult {
            value: 0.0,
            error_estimate: 0.0,
            scheme: SchemeUsed::Exact,
            evaluations: 0,
        }
    }
}

/// Seed for one named stream, derived from the run seed.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Integrates `ig`. `key` names the integrand for seed derivation.
pub fn integrate(ig: &Integrand, spec: &QuadratureSpec, key: &str) -> Result<IntegrationResult> {
    spec.validate()?;
    if ig.is_zero() {
        return Ok(IntegrationResult::exact_zero());
    }
    if ig.num_variables() == 0 {
        return Ok(IntegrationResult {
            value: ig.evaluate(&[]),
            error_estimate: 0.0,
            scheme: SchemeUsed::Exact,
            evaluations: 1,
        });
    }
    let scheme = match spec.scheme {
        Scheme::Auto if ig.point_dimension() == 1 || ig.total_dimension() <= 3 => Scheme::Tensor,
        Scheme::Auto => Scheme::MonteCarlo,
        s => s,
    };
    match scheme {
        Scheme::MonteCarlo => integrate_monte_carlo(ig, spec, derive_seed(spec.seed, key)),
        _ => integrate_tensor(ig, spec),
    }
}

fn integrate_tensor(ig: &Integrand, spec: &QuadratureSpec) -> Result<IntegrationResult> {
    let mut evaluations = 0u64;
    let mut previous: Option<f64> = None;
    let mut best = f64::NAN;
    let mut achieved = f64::INFINITY;
    let mut panels = 2usize;
    loop {
        let nodes = 15 * panels;
        let needed: u64 = ig
            .factors
            .iter()
            .map(|f| (nodes as u64).saturating_pow((f.vars.len() * ig.dimension) as u32))
            .fold(0u64, u64::saturating_add);
        let tolerance = spec.abs_tol.max(spec.rel_tol * best.abs());
        if evaluations.saturating_add(needed) > spec.max_evaluations {
            return Err(Error::Quadrature {
                best,
                achieved,
                tolerance: if tolerance.is_nan() { spec.abs_tol } else { tolerance },
                evaluations,
            });
        }
        let grids: Vec<BoxGrid> = ig.boxes.iter().map(|b| BoxGrid::new(b, panels)).collect();
        let refs: Vec<&BoxGrid> = grids.iter().collect();
        let tables: Vec<DenseFactor> = ig
            .factors
            .iter()
            .map(|f| DenseFactor::tabulate(&f.vars, &refs, |p| f.eval(p)))
            .collect();
        evaluations += tabulated_entries(&tables);
        let wk: Vec<&[f64]> = grids.iter().map(|g| g.kronrod.as_slice()).collect();
        let value = ig.prefactor * contract(&tables, &wk);
        let error = match previous {
            Some(p) => (value - p).abs(),
            None => {
                let wg: Vec<&[f64]> = grids.iter().map(|g| g.gauss.as_slice()).collect();
                (value - ig.prefactor * contract(&tables, &wg)).abs()
            }
        };
        best = value;
        achieved = error;
        if !value.is_finite() {
            return Err(Error::Quadrature {
                best,
                achieved,
                tolerance: spec.abs_tol,
                evaluations,
            });
        }
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(IntegrationResult {
                value,
                error_estimate: error,
                scheme: SchemeUsed::Tensor { panels },
                evaluations,
            });
        }
        previous = Some(value);
        panels *= 2;
    }
}

fn integrate_monte_carlo(ig: &Integrand, spec: &QuadratureSpec, seed: u64) -> Result<IntegrationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ig.dimension;
    let nv = ig.num_variables();
    let volume: f64 = ig.boxes.iter().flatten().map(|&(lo, hi)| hi - lo).product();
    let mut buf = vec![0.0; nv * d];
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    loop {
        for _ in 0..spec.mc_batch {
            for (v, b) in ig.boxes.iter().enumerate() {
                for (k, &(lo, hi)) in b.iter().enumerate() {
                    buf[v * d + k] = lo + (hi - lo) * rng.random::<f64>();
                }
            }
            let points: Vec<&[f64]> = buf.chunks(d).collect();
            let x = volume * ig.evaluate(&points);
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        let se = if n > 1 {
            (m2 / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        if n >= 2 * spec.mc_batch && se <= spec.mc_rel_tol * mean.abs() || se == 0.0 {
            return Ok(IntegrationResult {
                value: mean,
                error_estimate: se,
                scheme: SchemeUsed::MonteCarlo { samples: n, seed },
                evaluations: n,
            });
        }
        if n + spec.mc_batch > spec.max_evaluations {
            return Err(Error::Quadrature {
                best: mean,
                achieved: se,
                tolerance: spec.mc_rel_tol * mean.abs(),
                evaluations: n,
            });
        }
    }
}

fn cube(d: usize, r: f64) -> Vec<(f64, f64)> {
    vec![(-r, r); d]
}

fn intersect(a: &mut [(f64, f64)], b: &[(f64, f64)]) {
    for (x, y) in a.iter_mut().zip(b) {
        x.0 = x.0.max(y.0);
        x.1 = x.1.min(y.1);
    }
}

/// Collects factors and merges those over the same variables.
struct FactorBuilder {
    groups: BTreeMap<Vec<usize>, Vec<Arc<FactorFn>>>,
    // (a, b, range): variables a and b interact only within `range`
    links: Vec<(usize, usize, f64)>,
}

impl FactorBuilder {
    fn new() -> Self {
        FactorBuilder {
            groups: BTreeMap::new(),
            links: Vec::new(),
        }
    }

    fn push<F>(&mut self, vars: Vec<usize>, f: F)
    where
        F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        self.groups.entry(vars).or_default().push(Arc::new(f));
    }

    fn link(&mut self, a: usize, b: usize, range: f64) {
        self.links.push((a, b, range));
    }

    /// Shrinks each box to the reach of its linked neighbours.
    fn tighten(&self, boxes: &mut [Vec<(f64, f64)>]) {
        for _ in 0..=boxes.len() {
            let mut changed = false;
            for &(a, b, r) in &self.links {
                for (x, y) in [(a, b), (b, a)] {
                    let grown: Vec<(f64, f64)> = boxes[y].iter().map(|&(lo, hi)| (lo - r, hi + r)).collect();
                    let before = boxes[x].clone();
                    intersect(&mut boxes[x], &grown);
                    changed |= boxes[x] != before;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn finish(self) -> Vec<Factor> {
        self.groups
            .into_iter()
            .map(|(vars, fs)| {
                if fs.len() == 1 {
                    Factor {
                        vars,
                        f: fs.into_iter().next().expect("one factor"),
                    }
                } else {
                    Factor::new(vars, move |p: &[&[f64]]| fs.iter().map(|f| f(p)).product())
                }
            })
            .collect()
    }
}

/// Vertex factors for vertex `j` whose legs sit on the given variables.
fn push_vertex(
    fb: &mut FactorBuilder,
    kernels: &VertexKernelSet,
    degree: usize,
    leg_vars: &[usize],
) -> Result<()> {
    let kernel = *kernels.kernel(degree)?;
    let cutoff = *kernels.cutoff();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in leg_vars {
        *counts.entry(v).or_default() += 1;
    }
    let counts: Vec<(usize, usize)> = counts.into_iter().collect();
    for &(v, n) in &counts {
        fb.push(vec![v], move |p: &[&[f64]]| cutoff.value(p[0]).powi(n as i32));
    }
    let inv = 1.0 / (2.0 * kernel.width * kernel.width);
    for (i, &(a, na)) in counts.iter().enumerate() {
        for &(b, nb) in &counts[i + 1..] {
            let c = (na * nb) as f64 * inv;
            fb.push(vec![a, b], move |p: &[&[f64]]| (-c * crate::shapes::dist2(p[0], p[1])).exp());
            fb.link(a, b, TAIL_RADIUS * kernel.width);
        }
    }
    Ok(())
}

fn vertex_legs(c: &Configuration, var_of: &BTreeMap<LegLabel, usize>) -> Vec<Vec<usize>> {
    c.degrees()
        .iter()
        .enumerate()
        .map(|(j, &p)| (1..=p).map(|s| var_of[&LegLabel::new(j + 1, s)]).collect())
        .collect()
}

/// Builds the integrand of a configuration under the given noise model and
/// scales. Outer legs carry `-field`.
pub fn build_integrand(
    c: &Configuration,
    kernels: &VertexKernelSet,
    model: &NoiseModel,
    field: &TestField,
    window: FlowWindow,
) -> Result<Integrand> {
    window.validate()?;
    let d = model.dimension();
    if kernels.dimension() != d || field.dimension() != d {
        return Err(Error::invalid("kernel, field and model dimensions differ"));
    }
    let mut prefactor = 1.0;
    for &p in c.degrees() {
        prefactor *= kernels.kernel(p)?.coupling;
    }
    let field_box = field.support_box();
    let has_outer = !c.outer().is_empty();
    let has_blocks = c.blocks().num_blocks() > 0;
    if prefactor == 0.0 || (has_outer && field_box.is_none()) || (has_blocks && window.is_trivial()) {
        return Ok(Integrand::zero(d));
    }
    let chi_box = cube(d, kernels.cutoff().support_radius());
    let mut fb = FactorBuilder::new();
    let mut boxes: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut var_of: BTreeMap<LegLabel, usize> = BTreeMap::new();

    for &leg in c.outer() {
        let v = boxes.len();
        var_of.insert(leg, v);
        let mut b = chi_box.clone();
        intersect(&mut b, field_box.as_deref().expect("checked above"));
        boxes.push(b);
        let f = field.clone();
        fb.push(vec![v], move |p: &[&[f64]]| -f.value(p[0]));
    }

    match model {
        NoiseModel::Poisson { charges, profile } => {
            let weight = DiagonalWeight {
                profile: *profile,
                window,
            };
            let weight_box = cube(d, weight.support_radius());
            for block in c.blocks().blocks() {
                prefactor *= charges.moment(block.len())?;
                let v = boxes.len();
                for &leg in block {
                    var_of.insert(leg, v);
                }
                let mut b = chi_box.clone();
                intersect(&mut b, &weight_box);
                boxes.push(b);
                fb.push(vec![v], move |p: &[&[f64]]| weight.value(p[0]));
            }
            if prefactor == 0.0 {
                return Ok(Integrand::zero(d));
            }
        }
        NoiseModel::Gaussian(cov) => {
            if c.blocks().block_sizes().any(|s| s != 2) {
                return Ok(Integrand::zero(d));
            }
            let kernel = CovarianceKernel {
                covariance: *cov,
                window,
            };
            for block in c.blocks().blocks() {
                let (a, b) = (boxes.len(), boxes.len() + 1);
                var_of.insert(block[0], a);
                var_of.insert(block[1], b);
                boxes.push(chi_box.clone());
                boxes.push(chi_box.clone());
                fb.push(vec![a, b], move |p: &[&[f64]]| kernel.value(p[0], p[1]));
                fb.link(a, b, kernel.range());
            }
        }
    }

    for (j, legs) in vertex_legs(c, &var_of).iter().enumerate() {
        push_vertex(&mut fb, kernels, c.degrees()[j], legs)?;
    }
    fb.tighten(&mut boxes);
    Ok(Integrand::new(d, boxes, fb.finish(), prefactor))
}

/// The value of one configuration.
pub fn evaluate_configuration(
    c: &Configuration,
    kernels: &VertexKernelSet,
    model: &NoiseModel,
    field: &TestField,
    window: FlowWindow,
    spec: &QuadratureSpec,
) -> Result<IntegrationResult> {
    let ig = build_integrand(c, kernels, model, field, window)?;
    integrate(&ig, spec, &c.to_string()).map_err(|e| e.context(format!("graph {c}")))
}
