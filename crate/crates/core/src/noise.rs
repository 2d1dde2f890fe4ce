//! Noise models: a Poisson system of charged particles and a Gaussian field.
//! They provide cumulant kernels to the evaluator, the accumulated Laplace
//! exponent, and a finite-sample conditional positivity test.

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{Float, FloatConst, FromPrimitive};

use crate::error::{Error, Result};
use crate::evaluator::{integrate, Factor, Integrand, IntegrationResult, QuadratureSpec};
use crate::field::TestField;
use crate::quadrature::integrate_adaptive;
use crate::shapes::{bump, cosine_squared, dist2, norm2, unit_sphere_area};

/// Finitely many charges `s_i` with probabilities `w_i`, all within `[-c, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeMeasure<T> {
    atoms: Vec<(T, T)>,
    bound: T,
}

impl<T: Float + FromPrimitive> ChargeMeasure<T> {
    pub fn new(atoms: Vec<(T, T)>, bound: T) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("charge measure needs at least one atom"));
        }
        let mut total = T::zero();
        for &(s, w) in &atoms {
            if !(w > T::zero()) {
                return Err(Error::invalid("charge weights must be positive"));
            }
            if !(s.abs() <= bound) {
                return Err(Error::invalid("charge exceeds the declared bound"));
            }
            total = total + w;
        }
        let n = T::from_usize(atoms.len()).expect("small integer");
        let slack = T::from_f64(1e-12).expect("constant").max(n * T::epsilon() * (T::one() + T::one()));
        if (total - T::one()).abs() > slack {
            return Err(Error::invalid("charge weights must sum to 1"));
        }
        Ok(ChargeMeasure { atoms, bound })
    }

    /// Charges `+1` and `-1` with probability one half each.
    pub fn symmetric_unit() -> Self {
        let half = T::from_f64(0.5).expect("constant");
        ChargeMeasure {
            atoms: vec![(T::one(), half), (-T::one(), half)],
            bound: T::one(),
        }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    /// `sum_i w_i s_i^n`.
    pub fn moment(&self, n: usize) -> Result<T> {
        charge_moment(self, n)
    }
}

pub fn charge_moment<T: Float>(r: &ChargeMeasure<T>, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("charge moments start at order 1"));
    }
    Ok(r.atoms
        .iter()
        .fold(T::zero(), |acc, &(s, w)| acc + w * s.powi(n as i32)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileShape {
    /// `exp(1 - 1/(1 - |x|^2))`
    Bump,
    /// `cos^2(pi |x| / 2)`
    CosineSquared,
}

impl ProfileShape {
    pub fn name(self) -> &'static str {
        match self {
            ProfileShape::Bump => "bump",
            ProfileShape::CosineSquared => "cos2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "bump" => Some(ProfileShape::Bump),
            "cos2" => Some(ProfileShape::CosineSquared),
            _ => None,
        }
    }
}

/// Radial particle density `sigma(x) = z * shape(|x|)` supported in the unit
/// ball, rescaled as `sigma_t(x) = sigma(x / t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityProfile<T> {
    pub shape: ProfileShape,
    pub amplitude: T,
    pub dimension: usize,
}

impl<T: Float + FloatConst + FromPrimitive> IntensityProfile<T> {
    pub fn new(shape: ProfileShape, amplitude: T, dimension: usize) -> Result<Self> {
        if !(amplitude > T::zero()) || dimension == 0 {
            return Err(Error::invalid("intensity needs a positive amplitude and dimension"));
        }
        Ok(IntensityProfile {
            shape,
            amplitude,
            dimension,
        })
    }

    /// `sigma` at unit scale, given `|x|^2`.
    pub fn unit_value(&self, r2: T) -> T {
        let s = match self.shape {
            ProfileShape::Bump => bump(r2),
            ProfileShape::CosineSquared => cosine_squared(r2.sqrt()),
        };
        self.amplitude * s
    }

    /// `sigma_t(x)`; refuses `t <= 0`.
    pub fn intensity(&self, x: &[T], t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::invalid("intensity scale must be positive"));
        }
        let r2 = x.iter().fold(T::zero(), |a, &v| a + v * v) / (t * t);
        Ok(self.unit_value(r2))
    }
}

impl IntensityProfile<f64> {
    /// `sigma_t(x)` with `sigma_0 = 0`.
    pub fn at_scale(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.unit_value(norm2(x) / (t * t))
    }

    /// `int sigma(x) dx` at unit scale; `int sigma_t = t^d` times this.
    pub fn unit_integral(&self) -> f64 {
        let d = self.dimension as i32;
        let radial = integrate_adaptive(
            |r: f64| self.unit_value(r * r) * r.powi(d - 1),
            0.0,
            1.0,
            1e-15,
            1e-15,
            400,
        )
        .map(|e| e.value)
        .unwrap_or_else(|e| match e {
            Error::Quadrature { best, .. } => best,
            _ => f64::NAN,
        });
        unit_sphere_area(self.dimension) * radial
    }
}

/// Pointwise intensity, an alias for [`IntensityProfile::intensity`].
pub fn intensity<T: Float + FloatConst + FromPrimitive>(profile: &IntensityProfile<T>, x: &[T], t: T) -> Result<T> {
    profile.intensity(x, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceFamily {
    /// Heat kernel with standard deviation `length * t`.
    Heat,
    /// Heat kernel with standard deviation `length / t`.
    HeatInverse,
}

impl CovarianceFamily {
    pub fn name(self) -> &'static str {
        match self {
            CovarianceFamily::Heat => "heat",
            CovarianceFamily::HeatInverse => "heat_inverse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "heat" => Some(CovarianceFamily::Heat),
            "heat_inverse" => Some(CovarianceFamily::HeatInverse),
            _ => None,
        }
    }
}

/// A family of heat-kernel covariances `G_t(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCovariance {
    pub family: CovarianceFamily,
    pub length: f64,
    pub dimension: usize,
}

impl GaussianCovariance {
    pub fn new(family: CovarianceFamily, length: f64, dimension: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() || dimension == 0 {
            return Err(Error::invalid("covariance needs a positive length and dimension"));
        }
        Ok(GaussianCovariance {
            family,
            length,
            dimension,
        })
    }

    pub fn std_dev(&self, t: f64) -> f64 {
        match self.family {
            CovarianceFamily::Heat => self.length * t,
            CovarianceFamily::HeatInverse => self.length / t,
        }
    }

    pub fn value(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let s = self.std_dev(t);
        let norm = (2.0 * std::f64::consts::PI * s * s).powf(-(self.dimension as f64) / 2.0);
        norm * (-dist2(x, y) / (2.0 * s * s)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Poisson {
        charges: ChargeMeasure<f64>,
        profile: IntensityProfile<f64>,
    },
    Gaussian(GaussianCovariance),
}

impl NoiseModel {
    pub fn poisson(charges: ChargeMeasure<f64>, profile: IntensityProfile<f64>) -> Self {
        NoiseModel::Poisson { charges, profile }
    }

    pub fn gaussian(covariance: GaussianCovariance) -> Self {
        NoiseModel::Gaussian(covariance)
    }

    pub fn dimension(&self) -> usize {
        match self {
            NoiseModel::Poisson { profile, .. } => profile.dimension,
            NoiseModel::Gaussian(c) => c.dimension,
        }
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self, NoiseModel::Poisson { .. })
    }
}

/// Which part of the noise the cumulants describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CumulantMode {
    /// The increment between scales `T0` and `t`: `sigma_t - sigma_T0`,
    /// `G_t - G_T0`.
    Incremental,
    /// The full noise at scale `T0`: `sigma_T0`, `G_T0`.
    Absolute,
}

/// The scale pair and mode at which cumulants are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowWindow {
    pub t: f64,
    pub t0: f64,
    pub mode: CumulantMode,
}

impl FlowWindow {
    pub fn incremental(t: f64, t0: f64) -> Self {
        FlowWindow {
            t,
            t0,
            mode: CumulantMode::Incremental,
        }
    }

    pub fn absolute(t0: f64) -> Self {
        FlowWindow {
            t: t0,
            t0,
            mode: CumulantMode::Absolute,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !self.t0.is_finite() || !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::invalid("scales need t >= 0 and T0 > 0"));
        }
        Ok(())
    }

    /// True when the incremental cumulants vanish identically.
    pub fn is_trivial(&self) -> bool {
        self.mode == CumulantMode::Incremental && self.t == self.t0
    }
}

/// Spatial density of the diagonal Poisson cumulants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalWeight {
    pub profile: IntensityProfile<f64>,
    pub window: FlowWindow,
}

impl DiagonalWeight {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.window.mode {
            CumulantMode::Incremental => {
                self.profile.at_scale(x, self.window.t) - self.profile.at_scale(x, self.window.t0)
            }
            CumulantMode::Absolute => self.profile.at_scale(x, self.window.t0),
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self.window.mode {
            CumulantMode::Incremental => self.window.t.max(self.window.t0),
            CumulantMode::Absolute => self.window.t0,
        }
    }

    /// `int weight(x) dx`.
    pub fn integral(&self) -> f64 {
        let d = self.profile.dimension as i32;
        let unit = self.profile.unit_integral();
        match self.window.mode {
            CumulantMode::Incremental => unit * (self.window.t.powi(d) - self.window.t0.powi(d)),
            CumulantMode::Absolute => unit * self.window.t0.powi(d),
        }
    }
}

/// Two-point Gaussian cumulant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel {
    pub covariance: GaussianCovariance,
    pub window: FlowWindow,
}

impl CovarianceKernel {
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.window.mode {
            CumulantMode::Incremental => {
                self.covariance.value(self.window.t, x, y) - self.covariance.value(self.window.t0, x, y)
            }
            CumulantMode::Absolute => self.covariance.value(self.window.t0, x, y),
        }
    }

    /// Distance beyond which the kernel is negligible (below `1e-18` of its
    /// peak).
    pub fn range(&self) -> f64 {
        let s = match self.window.mode {
            CumulantMode::Incremental => self
                .covariance
                .std_dev(self.window.t)
                .max(self.covariance.std_dev(self.window.t0)),
            CumulantMode::Absolute => self.covariance.std_dev(self.window.t0),
        };
        crate::kernels::TAIL_RADIUS * s
    }
}

/// The connected moment function of order `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum CumulantKernel {
    /// Identically zero.
    Zero { order: usize },
    /// `coefficient * weight(x_1) * delta(x_1 - x_2) ... delta(x_1 - x_n)`.
    Diagonal {
        order: usize,
        coefficient: f64,
        weight: DiagonalWeight,
    },
    /// `G(x_1, x_2)`.
    Covariance(CovarianceKernel),
}

impl CumulantKernel {
    pub fn order(&self) -> usize {
        match self {
            CumulantKernel::Zero { order } | CumulantKernel::Diagonal { order, .. } => *order,
            CumulantKernel::Covariance(_) => 2,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CumulantKernel::Zero { .. } => true,
            CumulantKernel::Diagonal { coefficient, .. } => *coefficient == 0.0,
            CumulantKernel::Covariance(_) => false,
        }
    }
}

pub fn cumulant_kernel(model: &NoiseModel, n: usize, window: FlowWindow) -> Result<CumulantKernel> {
    if n == 0 {
        return Err(Error::invalid("cumulant order starts at 1"));
    }
    window.validate()?;
    Ok(match model {
        NoiseModel::Poisson { charges, profile } => CumulantKernel::Diagonal {
            order: n,
            coefficient: charges.moment(n)?,
            weight: DiagonalWeight {
                profile: *profile,
                window,
            },
        },
        NoiseModel::Gaussian(cov) if n == 2 => CumulantKernel::Covariance(CovarianceKernel {
            covariance: *cov,
            window,
        }),
        NoiseModel::Gaussian(_) => CumulantKernel::Zero { order: n },
    })
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    a.iter()
        .zip(b)
        .map(|(&(a0, a1), &(b0, b1))| (a0.max(b0), a1.min(b1)))
        .collect()
}

fn cube(d: usize, r: f64) -> Vec<(f64, f64)> {
    vec![(-r, r); d]
}

/// Accumulated Laplace exponent of the noise at the field `f`:
/// Poisson: `int sum_i w_i (exp(s_i f(x)) - 1) weight(x) dx`;
/// Gaussian: `1/2 <f, G f>`. Exactly zero for `f = 0` and for an empty
/// incremental window.
pub fn laplace_exponent(
    model: &NoiseModel,
    f: &TestField,
    window: FlowWindow,
    spec: &QuadratureSpec,
) -> Result<IntegrationResult> {
    window.validate()?;
    if f.dimension() != model.dimension() {
        return Err(Error::invalid("field and model dimensions differ"));
    }
    let Some(field_box) = f.support_box() else {
        return Ok(IntegrationResult::exact_zero());
    };
    if window.is_trivial() {
        return Ok(IntegrationResult::exact_zero());
    }
    let d = model.dimension();
    let integrand = match model {
        NoiseModel::Poisson { charges, profile } => {
            let weight = DiagonalWeight {
                profile: *profile,
                window,
            };
            let bounds = intersect(&field_box, &cube(d, weight.support_radius()));
            let atoms = charges.atoms().to_vec();
            let f = f.clone();
            let g = move |p: &[&[f64]]| {
                let v = f.value(p[0]);
                let s: f64 = atoms.iter().map(|&(s, w)| w * (s * v).exp_m1()).sum();
                s * weight.value(p[0])
            };
            Integrand::new(d, vec![bounds], vec![Factor::new(vec![0], g)], 1.0)
        }
        NoiseModel::Gaussian(cov) => {
            let kernel = CovarianceKernel {
                covariance: *cov,
                window,
            };
            let (f1, f2) = (f.clone(), f.clone());
            Integrand::new(
                d,
                vec![field_box.clone(), field_box],
                vec![
                    Factor::new(vec![0], move |p: &[&[f64]]| f1.value(p[0])),
                    Factor::new(vec![1], move |p: &[&[f64]]| f2.value(p[0])),
                    Factor::new(vec![0, 1], move |p: &[&[f64]]| kernel.value(p[0], p[1])),
                ],
                0.5,
            )
        }
    };
    integrate(&integrand, spec, "laplace_exponent")
}

/// The sign a quadratic form must have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequiredSign {
    NonPositive,
    NonNegative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub matrix: Vec<Vec<f64>>,
    /// Eigenvalues of the matrix restricted to `sum z = 0`, ascending.
    pub eigenvalues: Vec<f64>,
    /// The eigenvalue that comes closest to violating the required sign.
    pub extremal: f64,
    pub required: RequiredSign,
    /// Numerical allowance for quadrature error.
    pub slack: f64,
    pub violation_found: bool,
}

impl PositivityReport {
    pub fn verdict(&self) -> &'static str {
        if self.violation_found {
            "violation found"
        } else {
            "no violation found"
        }
    }
}

/// Sign expected of `sum_{jl} psi(f_j + f_l) z_j z_l` on `sum z = 0`.
pub fn required_sign(window: FlowWindow) -> RequiredSign {
    match window.mode {
        CumulantMode::Incremental if window.t < window.t0 => RequiredSign::NonPositive,
        _ => RequiredSign::NonNegative,
    }
}

/// Orthonormal basis of `{z : sum z = 0}` in `R^n` as columns.
fn zero_sum_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// Finite-sample test of conditional positivity: builds
/// `M_jl = laplace_exponent(f_j + f_l)`, restricts it to `sum z = 0` and
/// checks the sign of its spectrum. Passing means no violation was found,
/// not that the exponent is conditionally positive.
pub fn check_conditional_positivity(
    model: &NoiseModel,
    fs: &[TestField],
    window: FlowWindow,
    spec: &QuadratureSpec,
) -> Result<PositivityReport> {
    let n = fs.len();
    if n < 2 {
        return Err(Error::invalid("conditional positivity needs at least two fields"));
    }
    let mut m = DMatrix::zeros(n, n);
    let mut max_err = 0.0f64;
    for j in 0..n {
        for l in j..n {
            let sum = fs[j].plus(&fs[l])?;
            let r = laplace_exponent(model, &sum, window, spec)
                .map_err(|e| e.context(format!("matrix entry ({}, {})", j + 1, l + 1)))?;
            m[(j, l)] = r.value;
            m[(l, j)] = r.value;
            max_err = max_err.max(r.error_estimate);
        }
    }
    let q = zero_sum_basis(n);
    let projected = q.transpose() * &m * &q;
    let projected = (&projected + projected.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(projected).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let required = required_sign(window);
    let extremal = match required {
        RequiredSign::NonPositive => *eigenvalues.last().expect("n >= 2"),
        RequiredSign::NonNegative => eigenvalues[0],
    };
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let slack = 2.0 * n as f64 * max_err + 1e-12 * scale;
    let violation_found = match required {
        RequiredSign::NonPositive => extremal > slack,
        RequiredSign::NonNegative => extremal < -slack,
    };
    Ok(PositivityReport {
        matrix: (0..n).map(|j| (0..n).map(|l| m[(j, l)]).collect()).collect(),
        eigenvalues,
        extremal,
        required,
        slack,
        violation_found,
    })
}
