use std::fmt;

/// Sub-step of one time step, used to attribute failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStep {
    Chi,
    Volume,
    Pressure,
    Temperature,
}

impl fmt::Display for SubStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubStep::Chi => "chi_step",
            SubStep::Volume => "w_step",
            SubStep::Pressure => "pressure_step",
            SubStep::Temperature => "temperature_step",
        })
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or initial data; `key` names the offending entry.
    #[error("configuration fault [{key}]: {message}")]
    Config { key: String, message: String },

    /// A law was evaluated outside its domain.
    #[error("domain fault: {0}")]
    Domain(String),

    #[error("array length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Recoverable failure of one sub-step; the caller retries with a smaller step.
    #[error("{substep} failed: {reason}")]
    StepFailure { substep: SubStep, reason: String },

    #[error("simulation aborted at t = {t}: {substep} not accepted down to dt_min ({reason})")]
    Abort {
        substep: SubStep,
        t: f64,
        reason: String,
    },

    /// A structural property of the discrete solution was violated.
    #[error("invariant fault at t = {t}: {message}")]
    Invariant { t: f64, message: String },

    #[error("oracle fault: {0}")]
    Oracle(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
