//! Generalized Feynman graph expansion of renormalization flows driven by
//! Poisson and Gaussian noise.
//!
//! The crate enumerates labeled graph configurations `(K, I)`, evaluates them
//! numerically under concrete noise models, assembles the perturbative series
//! and checks them against brute-force and Monte Carlo oracles.

pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod evaluator;
pub mod field;
pub mod flow;
pub mod graphs;
pub mod kernels;
pub mod noise;
pub mod oracle;
pub mod quadrature;
pub mod series;
pub mod shapes;

pub use error::{Error, Result};
pub use evaluator::{evaluate_configuration, IntegrationResult, QuadratureSpec, Scheme};
pub use field::TestField;
pub use flow::FlowProblem;
pub use graphs::{Configuration, LegLabel, Omega};
pub use kernels::{Cutoff, VertexKernelSet};
pub use noise::{CumulantMode, FlowWindow, NoiseModel};

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

pub type Series64 = series::Series<f64>;
pub type Series32 = series::Series<f32>;
pub type Cumulants64 = combinatorics::CumulantSequence<f64>;
pub type ExactCumulants = combinatorics::CumulantSequence<Rational>;
pub type Charges64 = noise::ChargeMeasure<f64>;
pub type Charges32 = noise::ChargeMeasure<f32>;
pub type Intensity64 = noise::IntensityProfile<f64>;
