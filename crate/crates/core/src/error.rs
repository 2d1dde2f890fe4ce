use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: size {size} exceeds the enumeration limit {limit}")]
    LimitExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("cumulant of order {order} is not available")]
    MissingCumulantOrder { order: usize },

    #[error("moment of order {order} is not available")]
    MissingMomentOrder { order: usize },

    #[error("no vertex kernel for degree {degree}")]
    MissingKernel { degree: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "quadrature did not reach tolerance {tolerance:e}: best estimate {best} with error {achieved:e} after {evaluations} evaluations"
    )]
    Quadrature {
        best: f64,
        achieved: f64,
        tolerance: f64,
        evaluations: u64,
    },

    #[error("initial potential is unbounded below on a sample: V = {value}")]
    UnboundedPotential { value: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
