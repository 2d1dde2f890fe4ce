//! Independent validators: Poisson point sampling and Monte Carlo estimates
//! of the correlation functional, a closed form for linear potentials, the
//! formal exponential check and a brute-force moment transform.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson as PoissonLaw};

use crate::combinatorics::{cumulants_from_moments, moment_sequence, moments_from_cumulants, CumulantSequence};
use crate::error::{Error, Result};
use crate::evaluator::{derive_seed, integrate, Factor, Integrand, QuadratureSpec};
use crate::field::TestField;
use crate::kernels::VertexKernelSet;
use crate::noise::{ChargeMeasure, IntensityProfile, NoiseModel};
use crate::quadrature::tensor::BoxGrid;
use crate::series::Series;

/// Charged particles `(location, charge)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointConfiguration {
    pub points: Vec<(Vec<f64>, f64)>,
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum_i s_i f(x_i)`.
    pub fn pair(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().map(|(x, s)| s * f(x)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

fn poisson_parts(model: &NoiseModel) -> Result<(&ChargeMeasure<f64>, &IntensityProfile<f64>)> {
    match model {
        NoiseModel::Poisson { charges, profile } => Ok((charges, profile)),
        NoiseModel::Gaussian(_) => Err(Error::invalid("particle sampling needs the Poisson model")),
    }
}

/// Draws a Poisson system with intensity `sigma_t`: the count is Poisson
/// with mean `int sigma_t`, positions are drawn by rejection from the cube
/// around the support and charges from the charge atoms.
pub fn sample_poisson_field<R: Rng + ?Sized>(model: &NoiseModel, t: f64, rng: &mut R) -> Result<PointConfiguration> {
    let (charges, profile) = poisson_parts(model)?;
    if !(t > 0.0) {
        return Err(Error::invalid("sampling scale must be positive"));
    }
    let sampler = ParticleSampler::new(charges, profile, t)?;
    Ok(sampler.draw(rng))
}

/// [`sample_poisson_field`] with a ChaCha8 stream seeded by `seed`.
pub fn sample_poisson_field_seeded(model: &NoiseModel, t: f64, seed: u64) -> Result<PointConfiguration> {
    sample_poisson_field(model, t, &mut ChaCha8Rng::seed_from_u64(seed))
}

struct ParticleSampler {
    count: Option<Poisson<f64>>,
    charges: Vec<f64>,
    choose: WeightedIndex<f64>,
    profile: IntensityProfile<f64>,
    t: f64,
}

impl ParticleSampler {
    fn new(charges: &ChargeMeasure<f64>, profile: &IntensityProfile<f64>, t: f64) -> Result<Self> {
        let mean = profile.unit_integral() * t.powi(profile.dimension as i32);
        let count = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?)
        } else {
            None
        };
        let choose = WeightedIndex::new(charges.atoms().iter().map(|a| a.1))
            .map_err(|e| Error::invalid(format!("charge weights: {e}")))?;
        Ok(ParticleSampler {
            count,
            charges: charges.atoms().iter().map(|a| a.0).collect(),
            choose,
            profile: *profile,
            t,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PointConfiguration {
        let n = self.count.as_ref().map_or(0, |p| p.sample(rng) as usize);
        let d = self.profile.dimension;
        let z = self.profile.amplitude;
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let x = loop {
                let x: Vec<f64> = (0..d).map(|_| self.t * (2.0 * rng.random::<f64>() - 1.0)).collect();
                if rng.random::<f64>() * z < self.profile.at_scale(&x, self.t) {
                    break x;
                }
            };
            let s = self.charges[self.choose.sample(rng)];
            points.push((x, s));
        }
        PointConfiguration { points }
    }
}

/// Evaluates `V(phi + sum_i s_i delta_{x_i})` by expanding each
/// `<lambda^(p), (phi + atoms)^p>` multinomially. Slots filled by atoms are
/// point evaluations; slots filled by the field are integrated on a fixed
/// Gauss-Kronrod product grid over the field support.
pub struct InitialPotential {
    kernels: VertexKernelSet,
    grid: Option<BoxGrid>,
    field_values: Vec<f64>,
    /// `int lambda^(p)(y) prod phi(y) dy` by degree.
    field_only: Vec<(usize, f64)>,
}

impl InitialPotential {
    pub fn new(kernels: &VertexKernelSet, field: &TestField, panels: usize) -> Self {
        let grid = field.support_box().map(|b| BoxGrid::new(&b, panels));
        let field_values = grid
            .as_ref()
            .map(|g| (0..g.len()).map(|i| field.value(g.point(i))).collect())
            .unwrap_or_default();
        let mut pot = InitialPotential {
            kernels: kernels.clone(),
            grid,
            field_values,
            field_only: Vec::new(),
        };
        pot.field_only = kernels
            .active_degrees()
            .into_iter()
            .map(|p| (p, pot.partial(p, &[])))
            .collect();
        pot
    }

    /// `int lambda^(p)(fixed, y_1..y_{p-k}) prod phi(y_i) dy`.
    fn partial(&self, p: usize, fixed: &[&[f64]]) -> f64 {
        let free = p - fixed.len();
        if free == 0 {
            return self.kernels.value(p, fixed).expect("active degree");
        }
        let Some(grid) = &self.grid else { return 0.0 };
        let n = grid.len();
        let mut idx = vec![0usize; free];
        let mut args: Vec<&[f64]> = fixed.to_vec();
        let mut total = 0.0;
        'outer: loop {
            let mut w = 1.0;
            for &i in &idx {
                w *= grid.kronrod[i] * self.field_values[i];
            }
            if w != 0.0 {
                args.truncate(fixed.len());
                args.extend(idx.iter().map(|&i| grid.point(i)));
                total += w * self.kernels.value(p, &args).expect("active degree");
            }
            for k in (0..free).rev() {
                idx[k] += 1;
                if idx[k] < n {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        total
    }

    pub fn value(&self, atoms: &PointConfiguration) -> f64 {
        let mut v = self.kernels.constant();
        for &(p, field_only) in &self.field_only {
            v += field_only;
            let mut binom = 1.0;
            for k in 1..=p {
                binom = binom * (p - k + 1) as f64 / k as f64;
                v += binom * self.atom_sum(p, k, atoms);
            }
        }
        v
    }

    /// `sum over k-tuples of atoms (with repetition) of prod s * partial`.
    fn atom_sum(&self, p: usize, k: usize, atoms: &PointConfiguration) -> f64 {
        let n = atoms.len();
        if n == 0 {
            return 0.0;
        }
        let mut idx = vec![0usize; k];
        let mut total = 0.0;
        loop {
            let charge: f64 = idx.iter().map(|&i| atoms.points[i].1).product();
            let fixed: Vec<&[f64]> = idx.iter().map(|&i| atoms.points[i].0.as_slice()).collect();
            total += charge * self.partial(p, &fixed);
            let mut k2 = k;
            loop {
                if k2 == 0 {
                    return total;
                }
                k2 -= 1;
                idx[k2] += 1;
                if idx[k2] < n {
                    break;
                }
                idx[k2] = 0;
            }
        }
    }
}

/// Options for [`mc_correlation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
    pub batch: u64,
    /// Abort when the potential drops below `-floor` on a sample.
    pub floor: f64,
    /// Panels per axis of the grid used for field slots.
    pub panels: usize,
}

impl McOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            batch: 1000,
            floor: 100.0,
            panels: 8,
        }
    }
}

/// Monte Carlo estimate of `E[exp(-V(phi + noise))]` under the Poisson
/// system at scale `t`. Batches have their own derived seeds and are pooled
/// in batch order, so the result does not depend on the thread count.
pub fn mc_correlation(
    model: &NoiseModel,
    kernels: &VertexKernelSet,
    field: &TestField,
    t: f64,
    opts: &McOptions,
) -> Result<McEstimate> {
    let (charges, profile) = poisson_parts(model)?;
    if opts.samples == 0 || opts.batch == 0 {
        return Err(Error::invalid("Monte Carlo needs a positive sample count and batch size"));
    }
    if kernels.active_degrees().is_empty() {
        return Ok(McEstimate {
            mean: (-kernels.constant()).exp(),
            std_error: 0.0,
            samples: opts.samples,
            seed: opts.seed,
        });
    }
    let sampler = ParticleSampler::new(charges, profile, t)?;
    let potential = InitialPotential::new(kernels, field, opts.panels);
    let batches = opts.samples.div_ceil(opts.batch);
    let stats: Vec<Result<(u64, f64, f64)>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &format!("mc_correlation/{b}")));
            let n = opts.batch.min(opts.samples - b * opts.batch);
            let (mut mean, mut m2) = (0.0f64, 0.0f64);
            for i in 0..n {
                let atoms = sampler.draw(&mut rng);
                let v = potential.value(&atoms);
                if v < -opts.floor || !v.is_finite() {
                    return Err(Error::UnboundedPotential { value: v });
                }
                let x = (-v).exp();
                let delta = x - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (x - mean);
            }
            Ok((n, mean, m2))
        })
        .collect();
    // Chan's pairwise combination in batch order
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for s in stats {
        let (nb, mb, m2b) = s?;
        let total = n + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += m2b + delta * delta * (n as f64) * (nb as f64) / total as f64;
        n = total;
    }
    let std_error = if n > 1 {
        (m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error,
        samples: n,
        seed: opts.seed,
    })
}

/// `E[exp(-V(phi + noise))]` in closed form for a potential with only the
/// constant and the linear kernel:
/// `exp(-g0 - <lambda1, phi>) exp(int sum_i w_i (exp(-s_i lambda1(x)) - 1) sigma_t(x) dx)`.
pub fn linear_closed_form(
    model: &NoiseModel,
    kernels: &VertexKernelSet,
    field: &TestField,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let (charges, profile) = poisson_parts(model)?;
    if kernels.active_degrees().iter().any(|&p| p != 1) {
        return Err(Error::invalid("the closed form needs a potential of degree at most one"));
    }
    let d = model.dimension();
    let k = kernels.clone();
    let field_term = match field.support_box() {
        Some(b) => {
            let (f, k) = (field.clone(), kernels.clone());
            let ig = Integrand::new(
                d,
                vec![b],
                vec![Factor::new(vec![0], move |p: &[&[f64]]| {
                    f.value(p[0]) * k.value(1, &[p[0]]).unwrap_or(0.0)
                })],
                1.0,
            );
            integrate(&ig, spec, "closed_form/field")?.value
        }
        None => 0.0,
    };
    let atoms = charges.atoms().to_vec();
    let prof = *profile;
    let ig = Integrand::new(
        d,
        vec![vec![(-t, t); d]],
        vec![Factor::new(vec![0], move |p: &[&[f64]]| {
            let l = k.value(1, &[p[0]]).unwrap_or(0.0);
            let s: f64 = atoms.iter().map(|&(s, w)| w * (-s * l).exp_m1()).sum();
            s * prof.at_scale(p[0], t)
        })],
        1.0,
    );
    let noise_term = integrate(&ig, spec, "closed_form/noise")?.value;
    Ok((-kernels.constant() - field_term + noise_term).exp())
}

/// Count distribution of sampled systems against the Poisson law.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTest {
    pub draws: u64,
    pub mean_count: f64,
    pub expected_mean: f64,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square test of `draws` sampled particle counts against
/// `Poisson(int sigma_t)`. Bins with expected count below 5 are pooled into
/// the upper tail.
pub fn count_chi_square(model: &NoiseModel, t: f64, draws: u64, seed: u64) -> Result<CountTest> {
    let (charges, profile) = poisson_parts(model)?;
    let sampler = ParticleSampler::new(charges, profile, t)?;
    let mean = profile.unit_integral() * t.powi(profile.dimension as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "count_chi_square"));
    let counts: Vec<usize> = (0..draws).map(|_| sampler.draw(&mut rng).len()).collect();
    let law = PoissonLaw::new(mean).map_err(|e| Error::invalid(format!("poisson law: {e}")))?;
    let n = draws as f64;
    // bins 0..last-1 individually, `last` collects the tail
    let mut last = 0usize;
    while n * law.pmf(last as u64 + 1) >= 5.0 || (last as f64) < mean {
        last += 1;
    }
    let mut observed = vec![0.0; last + 1];
    for &c in &counts {
        observed[c.min(last)] += 1.0;
    }
    let mut expected: Vec<f64> = (0..last).map(|k| n * law.pmf(k as u64)).collect();
    expected.push(n - expected.iter().sum::<f64>());
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = last.max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::invalid(format!("chi-square law: {e}")))?
        .sf(statistic);
    Ok(CountTest {
        draws,
        mean_count: counts.iter().sum::<usize>() as f64 / n,
        expected_mean: mean,
        statistic,
        degrees_of_freedom: dof,
        p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCheckRow {
    pub order: usize,
    pub exp_connected: f64,
    pub full: f64,
    pub abs_deviation: f64,
    pub rel_deviation: f64,
    /// Combined error estimate of both sides.
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpCheckReport {
    pub rows: Vec<ExpCheckRow>,
}

impl ExpCheckReport {
    pub fn max_rel_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_deviation).fold(0.0, f64::max)
    }

    /// Every order agrees within `rel_tol` relative or within three times
    /// the error budget.
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.rel_deviation <= rel_tol || r.abs_deviation <= 3.0 * r.budget)
    }
}

/// Compares the formal exponential of the connected series with the full
/// series order by order.
pub fn exp_series_check(connected: &Series<f64>, full: &Series<f64>, max_order: usize) -> Result<ExpCheckReport> {
    if connected.max_order() < max_order || full.max_order() < max_order {
        return Err(Error::invalid("series shorter than the requested order"));
    }
    let truncated = Series::new(connected.terms()[..=max_order].to_vec());
    let e = truncated.exp()?;
    let rows = (0..=max_order)
        .map(|m| {
            let (a, b) = (e.terms()[m], full.terms()[m]);
            let abs = (a.value - b.value).abs();
            let scale = b.value.abs();
            ExpCheckRow {
                order: m,
                exp_connected: a.value,
                full: b.value,
                abs_deviation: abs,
                rel_deviation: if abs == 0.0 { 0.0 } else { abs / scale.max(f64::MIN_POSITIVE) },
                budget: (a.error * a.error + b.error * b.error).sqrt(),
            }
        })
        .collect();
    Ok(ExpCheckReport { rows })
}

/// All set partitions of `0..n` by inserting each element into an existing
/// block or a new one.
fn partitions_by_insertion(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut parts: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for e in 0..n {
        let mut next = Vec::new();
        for p in &parts {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(e);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![e]);
            next.push(q);
        }
        parts = next;
    }
    parts
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformReport {
    pub sequences: usize,
    pub n_max: usize,
    pub comparisons: usize,
    pub mismatches: usize,
    /// Largest round-trip error of the floating-point transforms, relative
    /// to the size of the moments involved.
    pub max_roundtrip_error: f64,
}

/// Checks the moment transform against brute-force enumeration on 100
/// seeded random rational cumulant sequences, and the float round trip.
pub fn partition_transform_check(n_max: usize, seed: u64) -> Result<TransformReport> {
    if n_max == 0 || n_max > 10 {
        return Err(Error::invalid("partition transform check needs 1 <= n_max <= 10"));
    }
    let partitions: Vec<Vec<Vec<Vec<usize>>>> = (0..=n_max).map(partitions_by_insertion).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "partition_transform_check"));
    let mut mismatches = 0;
    let mut comparisons = 0;
    let mut max_roundtrip_error = 0.0f64;
    for _ in 0..100 {
        let kappa: Vec<BigRational> = (0..n_max)
            .map(|_| {
                BigRational::new(
                    BigInt::from(rng.random_range(-20i64..=20)),
                    BigInt::from(rng.random_range(1i64..=10)),
                )
            })
            .collect();
        let seq = CumulantSequence::new(kappa.clone());
        for (n, parts) in partitions.iter().enumerate().skip(1) {
            let brute = parts.iter().fold(BigRational::zero(), |acc, p| {
                acc + p
                    .iter()
                    .fold(BigRational::from_integer(BigInt::from(1)), |prod, b| prod * &kappa[b.len() - 1])
            });
            comparisons += 1;
            if moments_from_cumulants(&seq, n)? != brute {
                mismatches += 1;
            }
        }
        let floats: Vec<f64> = (0..n_max).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let moments = moment_sequence(&CumulantSequence::new(floats.clone()), n_max)?;
        let scale = moments.iter().fold(1.0f64, |a, m| a.max(m.abs()));
        for (n, k) in floats.iter().enumerate() {
            let back = cumulants_from_moments(&moments[1..], n + 1)?;
            max_roundtrip_error = max_roundtrip_error.max((back - k).abs() / scale);
        }
    }
    Ok(TransformReport {
        sequences: 100,
        n_max,
        comparisons,
        mismatches,
        max_roundtrip_error,
    })
}
