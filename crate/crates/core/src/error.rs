use core::fmt;

/// Outer iteration `i` and inner step `t` (both 1-based) at which something happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepIndex {
    pub outer: usize,
    pub inner: usize,
}

impl fmt::Display for StepIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(i={}, t={})", self.outer, self.inner)
    }
}

fn at(idx: &Option<StepIndex>) -> alloc::string::String {
    match idx {
        Some(idx) => alloc::format!(" at {idx}"),
        None => alloc::string::String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty episode")]
    EmptyEpisode,
    #[error("nominal dynamics not stable (spectral radius {0})")]
    NotStable(f64),
    #[error("state diverged{}", at(.0))]
    StateDiverged(Option<StepIndex>),
    #[error("attitude integration failure (orthogonality error {0:e})")]
    AttitudeIntegration(f64),
    #[error("actuation assumption violated (rank {rank} < {required})")]
    ActuationRank { rank: usize, required: usize },
    #[error("Gram matrix ill-conditioned (lambda_min estimate {0:e})")]
    IllConditioned(f64),
    #[error("ObserveEnv required for this variant")]
    ObserveEnvRequired,
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

impl Error {
    /// Attaches the step index to a divergence error; other errors pass through.
    pub fn at_step(self, outer: usize, inner: usize) -> Self {
        match self {
            Error::StateDiverged(_) => Error::StateDiverged(Some(StepIndex { outer, inner })),
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
