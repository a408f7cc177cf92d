use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid phase word: {0}")]
    InvalidPhaseWord(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no photon detected at step {step} after {pulses} pulses")]
    RetryCapExceeded { step: usize, pulses: u64 },
    #[error("state norm {norm} deviates from 1")]
    NormViolation { norm: f64 },
    #[error("inconsistent measurement history at step {step}: no surviving eigenstate")]
    InconsistentHistory { step: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no sign change in bisection bracket [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("fringe fit did not converge: {0}")]
    FitFailed(String),
    #[error("circuit error: {0}")]
    Circuit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{p} is not a probability"),
        })
    }
}
