use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("degenerate excited levels: {0}")]
    Degenerate(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: {0}")]
    Unconverged(String),

    #[error("non-finite state at step {step} (seed {seed})")]
    NonFinite { step: usize, seed: u64 },

    #[error("realization {index} (seed {seed}) failed: {source}")]
    Realization {
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("zero excited population: {0}")]
    ZeroPopulation(&'static str),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn pre(reason: impl Into<String>) -> Self {
        Error::Precondition(reason.into())
    }
}
