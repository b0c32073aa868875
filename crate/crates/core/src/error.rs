use thiserror::Error;

/// Model assumption that an operation relies on.
///
/// The string form is the stable key printed in error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Reproduction mean strictly above one.
    Supercritical,
    /// Reproduction mean equal to one with `p(1) < 1`.
    Critical,
    /// `p(0) + p(1) > 0`, so that `rho` is finite.
    Schroeder,
    /// Step law supported on an integer lattice.
    Lattice,
}

impl Assumption {
    pub fn key(self) -> &'static str {
        match self {
            Assumption::Supercritical => "supercritical",
            Assumption::Critical => "critical",
            Assumption::Schroeder => "schroeder",
            Assumption::Lattice => "lattice",
        }
    }
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model file: key `{key}`: {reason}")]
    ModelFile { key: String, reason: String },

    #[error("assumption `{assumption}` violated: {detail}")]
    Assumption { assumption: Assumption, detail: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no usable replicates: {0}")]
    NoReplicates(String),
}

impl Error {
    pub(crate) fn assumption(assumption: Assumption, detail: impl Into<String>) -> Self {
        Error::Assumption {
            assumption,
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
