use std::path::PathBuf;

use adasurr_core::adaptive::AdaptiveError;
use adasurr_core::analysis::AnalysisError;
use adasurr_core::bayes::BayesError;
use adasurr_core::mcmc::McmcError;
use adasurr_core::models::ModelError;
use adasurr_core::polychaos::PcError;
use adasurr_core::quadrature::QuadratureError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Surrogate(#[from] PcError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Process exit code: 2 for bad configuration or inputs, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::Format { .. } => 2,
            Error::Adaptive(AdaptiveError::Config(_)) => 2,
            Error::Model(ModelError::InvalidConfig(_)) => 2,
            _ => 3,
        }
    }
}
