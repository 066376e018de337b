use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance file: {0}")]
    Syntax(String),

    /// An instance invariant does not hold; `location` names the node or field.
    #[error("invalid instance: {location}: {message}")]
    Invalid { location: String, message: String },

    #[error("speed profile `{profile}`: {message}")]
    Profile { profile: String, message: String },

    #[error("time {t} lies outside the function domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("no feasible departure: ready time {0} lies below the function range")]
    NoFeasibleDeparture(f64),

    #[error("ready time {0} lies above the function range")]
    AboveRange(f64),

    #[error("route cost requested for an infeasible route")]
    InfeasibleRoute,

    #[error("composition has an empty valid domain")]
    EmptyDomain,

    #[error("{what}: n = {n} exceeds the guard {limit}")]
    GuardExceeded {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("no complete feasible solution after {attempts} construction attempts ({unassigned} customers left unassigned)")]
    ConstructionFailed { attempts: usize, unassigned: usize },

    #[error("time limit reached before a feasible solution was constructed")]
    TimeoutWithoutFeasible,

    #[error("density level {0} is outside 1..=7")]
    DensityLevel(u8),

    #[error("the seed record set is empty")]
    EmptySeed,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            location: location.into(),
            message: message.into(),
        }
    }
}
