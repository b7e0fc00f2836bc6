use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shooting bracket [{lo}, {hi}] does not straddle the ground state: {detail}")]
    BracketFailure { lo: f64, hi: f64, detail: String },

    #[error("profile invalid: {0}")]
    ProfileInvalid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error(
        "collapse: concentration scale {epsilon:.3e} fell below {spacings} grid spacings (h = {h:.3e}) \
         after {steps} steps, last energy {energy:.6e}"
    )]
    Collapse {
        epsilon: f64,
        h: f64,
        spacings: f64,
        steps: usize,
        energy: f64,
    },

    #[error("asymptotic regime not reached: {0}")]
    AsymptoticRegimeNotReached(String),

    #[error("sweep failed at a = {a:e}: {source}")]
    Sweep {
        a: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Whether the failure came from the numerics rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Configuration(_) | Error::Parse(_) | Error::Io(_) => false,
            Error::Sweep { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
