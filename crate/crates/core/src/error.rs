use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("(jωI - A) is numerically singular at ω = {omega} rad/s")]
    SingularAtFrequency { omega: f64 },

    #[error("system is not asymptotically stable (spectral abscissa {abscissa:e})")]
    UnstableSystem { abscissa: f64 },

    #[error("H2 norm is undefined for a system with nonzero feedthrough")]
    NonzeroFeedthrough,

    #[error("duplicate interpolation frequency {omega} rad/s")]
    DuplicateFrequency { omega: f64 },

    #[error("ω = {omega} rad/s coincides with interpolation node {node}")]
    RemovableSingularity { omega: f64, node: usize },

    #[error("no steady state detected at ω = {omega} rad/s within {max_duration} s (last residual ratio {last_gamma_hat:e})")]
    SteadyStateTimeout {
        omega: f64,
        max_duration: f64,
        last_gamma_hat: f64,
    },

    #[error("covariance block is not positive definite (min eigenvalue {min_eig:e}, threshold {threshold:e})")]
    SingularCovariance { min_eig: f64, threshold: f64 },

    #[error("LMI problem infeasible: {0}")]
    Infeasible(String),

    #[error("interior-point iteration failed: {0}")]
    NumericalFailure(String),

    #[error("iteration limit of {0} reached")]
    MaxIterations(usize),

    #[error("non-uniform sampling at row {row}")]
    NonuniformSampling { row: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps the error with a human readable context string.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context<F, S>(self, f: F) -> Result<T>
    where
        F: FnOnce() -> S,
        S: Into<String>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context<F, S>(self, f: F) -> Result<T>
    where
        F: FnOnce() -> S,
        S: Into<String>,
    {
        self.map_err(|e| e.context(f()))
    }
}
