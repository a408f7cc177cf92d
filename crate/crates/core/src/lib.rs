//! Simulation of the serial measured quantum Fourier transform (MQFT) used for
//! semiclassical phase estimation.
//!
//! * [`qubit`] and [`serial`]: the one-qubit-at-a-time pipeline with classical
//!   feedback of measured bits into the next rotation angle.
//! * [`noise`] and [`fringe`]: visibility, angle truncation, DAC quantization,
//!   photon loss and dark counts; fringe scans and their cosine fit.
//! * [`register`]: a target register in a superposition of eigenstates and its
//!   collapse under imperfect measurement.
//! * [`stats`]: the geometric run-length model, error-rate estimators,
//!   majority voting and confidence bounds.
//! * [`oracle`]: an exact statevector simulator of the controlled-phase and
//!   classically-controlled circuits for small n.

pub mod error;
pub mod fringe;
pub mod noise;
pub mod oracle;
pub mod phase;
pub mod qubit;
pub mod register;
pub mod serial;
pub mod stats;

pub use error::{Error, Result};
pub use noise::{DetectorParams, NoiseParams, TieBreak};
pub use phase::{BinaryFraction, PhaseWord};
pub use qubit::{ControlQubitState, RotationCommand};
pub use register::TargetRegister;
pub use serial::{run_serial_mqft, TrialRecord};
pub use stats::TrialStats;
