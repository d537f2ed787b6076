use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("peak density {peak_density} cannot be normalized: mass stays below 1 for every slope")]
    NonNormalizable { peak_density: f64 },

    #[error("target value {target} exceeds the {available} available to the right of the query point")]
    Unreachable { target: f64, available: f64 },

    #[error("agent {}: two cut answers admit several parameter pairs {candidates:?}", agent + 1)]
    RecoveryAmbiguous {
        agent: usize,
        /// Candidate `(peak, slope)` pairs.
        candidates: Vec<(f64, f64)>,
    },

    #[error("agent {}: cut answers are not consistent with any single-peaked valuation", agent + 1)]
    RecoveryFailed { agent: usize },

    #[error("shape mismatch: instance has {expected} agents, allocation has {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("prerequisite violated: {0}")]
    PrereqViolated(String),

    #[error("agents {} and {} share the same peak", first + 1, second + 1)]
    EqualPeaks { first: usize, second: usize },

    #[error("segment [{start}, {end}] is valued by no agent")]
    EmptySegment { start: f64, end: f64 },

    #[error("linear program failed: {0}")]
    SolverFailure(String),

    #[error("no valid instance generated after {attempts} attempts")]
    GenerationFailed { attempts: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by an instance not meeting a mechanism's assumptions.
    pub fn is_prerequisite(&self) -> bool {
        matches!(
            self,
            Error::PrereqViolated(_) | Error::EqualPeaks { .. } | Error::EmptySegment { .. }
        )
    }
}
