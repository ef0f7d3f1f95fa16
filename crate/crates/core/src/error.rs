use thiserror::Error;

use crate::decomposition::Violation;
use crate::flow::CutCertificate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A size guard on one of the exhaustive oracles refused the instance.
    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    /// Internal invariant broken; indicates a bug rather than bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// A rounding guarantee or oracle contract failed its runtime check.
    #[error("guarantee violated: {0}")]
    Guarantee(String),

    /// The supply-routing precondition failed; the cut witnesses it.
    #[error("supplies not routable: c(U) = {} < {}", .0.capacity, .0.demand)]
    Infeasible(Box<CutCertificate>),

    #[error("decomposition invalid: {}", format_violations(.0))]
    Decomposition(Vec<Violation>),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
