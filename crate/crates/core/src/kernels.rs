//! Vertex kernels `lambda^(p)`: a coupling times a Gaussian profile in the
//! pairwise differences of the arguments times a product of cutoffs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::shapes::{dist2, norm2, smooth_step_down};

/// Relative size below which the Gaussian profile is treated as zero when
/// bounding integration domains: `exp(-r^2/2) < 1e-18` for `r > TAIL_RADIUS`.
pub const TAIL_RADIUS: f64 = 9.1;

/// Radial cutoff equal to 1 on the ball of radius `plateau` and falling
/// smoothly to 0 at `plateau + shoulder`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub plateau: f64,
    pub shoulder: f64,
}

impl Cutoff {
    pub fn new(plateau: f64, shoulder: f64) -> Result<Self> {
        if !(plateau > 0.0 && shoulder > 0.0 && plateau.is_finite() && shoulder.is_finite()) {
            return Err(Error::invalid("cutoff plateau and shoulder must be positive and finite"));
        }
        Ok(Cutoff { plateau, shoulder })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = norm2(x).sqrt();
        smooth_step_down((r - self.plateau) / self.shoulder)
    }

    pub fn support_radius(&self) -> f64 {
        self.plateau + self.shoulder
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexKernel {
    pub coupling: f64,
    /// Length scale of `exp(-sum_{i<j} |x_i - x_j|^2 / (2 width^2))`.
    pub width: f64,
}

/// Kernels by degree, the constant `lambda^(0)` and the shared cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexKernelSet {
    dimension: usize,
    constant: f64,
    entries: BTreeMap<usize, VertexKernel>,
    cutoff: Cutoff,
}

impl VertexKernelSet {
    pub fn new(dimension: usize, cutoff: Cutoff) -> Self {
        VertexKernelSet {
            dimension,
            constant: 0.0,
            entries: BTreeMap::new(),
            cutoff,
        }
    }

    pub fn with_constant(mut self, g0: f64) -> Self {
        self.constant = g0;
        self
    }

    pub fn with_kernel(mut self, degree: usize, coupling: f64, width: f64) -> Result<Self> {
        self.insert(degree, coupling, width)?;
        Ok(self)
    }

    pub fn insert(&mut self, degree: usize, coupling: f64, width: f64) -> Result<()> {
        if degree == 0 {
            return Err(Error::invalid("degree 0 is the scalar constant, set it with `with_constant`"));
        }
        if !(width > 0.0) || !width.is_finite() || !coupling.is_finite() {
            return Err(Error::invalid(format!(
                "kernel of degree {degree} needs a positive width and a finite coupling"
            )));
        }
        self.entries.insert(degree, VertexKernel { coupling, width });
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    pub fn kernel(&self, degree: usize) -> Result<&VertexKernel> {
        self.entries.get(&degree).ok_or(Error::MissingKernel { degree })
    }

    pub fn coupling(&self, degree: usize) -> f64 {
        if degree == 0 {
            self.constant
        } else {
            self.entries.get(&degree).map_or(0.0, |k| k.coupling)
        }
    }

    pub fn max_degree(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    /// Positive degrees with a nonzero coupling, ascending.
    pub fn active_degrees(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|(_, k)| k.coupling != 0.0)
            .map(|(&p, _)| p)
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &VertexKernel)> {
        self.entries.iter().map(|(&p, k)| (p, k))
    }

    /// Copy with every coupling (including the constant) multiplied by `g`.
    pub fn scaled(&self, g: f64) -> Self {
        let mut out = self.clone();
        out.constant *= g;
        for k in out.entries.values_mut() {
            k.coupling *= g;
        }
        out
    }

    /// Copy with the degree-`p` coupling multiplied by `alpha`.
    pub fn with_scaled_coupling(&self, degree: usize, alpha: f64) -> Self {
        let mut out = self.clone();
        if degree == 0 {
            out.constant *= alpha;
        } else if let Some(k) = out.entries.get_mut(&degree) {
            k.coupling *= alpha;
        }
        out
    }

    /// `lambda^(p)(x_1, ..., x_p)` including coupling and cutoffs.
    pub fn value(&self, degree: usize, xs: &[&[f64]]) -> Result<f64> {
        if degree == 0 {
            return Ok(self.constant);
        }
        let k = self.kernel(degree)?;
        if xs.len() != degree {
            return Err(Error::invalid(format!(
                "kernel of degree {degree} evaluated at {} points",
                xs.len()
            )));
        }
        let mut s = 0.0;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                s += dist2(xs[i], xs[j]);
            }
        }
        let chi: f64 = xs.iter().map(|x| self.cutoff.value(x)).product();
        Ok(k.coupling * (-s / (2.0 * k.width * k.width)).exp() * chi)
    }
}
