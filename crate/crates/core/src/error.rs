use thiserror::Error;

/// Errors raised by parameter validation, simulation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("split must lie in open (0,1), got {0}")]
    SplitOutOfRange(f64),

    #[error("symmetric-beta shape must be positive and finite, got {0}")]
    InvalidBetaShape(f64),

    #[error("alpha/beta undefined for mu = 0")]
    ZeroDeathRate,

    #[error("time step must be non-negative, got {0}")]
    NegativeTimeStep(f64),

    #[error("end time {t_end} precedes current time {time}")]
    EndBeforeStart { time: f64, t_end: f64 },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("drift mode assignment covers {given} colonies, population has {expected}")]
    ModeAssignmentMismatch { given: usize, expected: usize },

    #[error("spine index {0} outside population")]
    InvalidSpine(usize),

    #[error("at least 2 trajectories are required, got {0}")]
    TooFewTrajectories(usize),

    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),

    #[error("invalid initial population: {0}")]
    InvalidInitialPopulation(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
