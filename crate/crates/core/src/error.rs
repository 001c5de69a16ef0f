use thiserror::Error;

/// Everything that can go wrong while building or evolving states.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad indices, mismatched bases, malformed matrices.
    #[error("domain error: {0}")]
    Domain(String),

    /// Population found outside the subspace an operation is defined on.
    #[error("leakage in {context}: population {population:.3e} exceeds {threshold:.1e}")]
    Leakage {
        context: String,
        population: f64,
        threshold: f64,
    },

    /// A physical precondition (e.g. "target SQUID must be in |g>") does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Invalid coupling constants, cutoffs or run options.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An error raised while executing a labelled protocol step.
    #[error("{label}: {source}")]
    Step {
        label: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_step(self, label: &str) -> Self {
        Error::Step {
            label: label.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping step labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for leakage and precondition failures, i.e. physics rather than input problems.
    pub fn is_physics(&self) -> bool {
        matches!(self.root(), Error::Leakage { .. } | Error::Precondition(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
