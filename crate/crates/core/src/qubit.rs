//! Control-qubit states and the one-qubit gates of the serial circuit.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase::{BinaryFraction, PhaseWord};

const NORM_TOL: f64 = 1e-12;

/// A pure control-qubit state `amp0|0⟩ + amp1|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlQubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl ControlQubitState {
    pub fn new(amp0: Complex64, amp1: Complex64) -> Result<Self> {
        let s = Self { amp0, amp1 };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormViolation { norm });
        }
        Ok(s)
    }

    pub fn zero() -> Self {
        Self { amp0: Complex64::new(1.0, 0.0), amp1: Complex64::new(0.0, 0.0) }
    }

    pub fn one() -> Self {
        Self { amp0: Complex64::new(0.0, 0.0), amp1: Complex64::new(1.0, 0.0) }
    }

    /// `(|0⟩ + e^{iθ}|1⟩)/√2`.
    pub fn equator(theta: f64) -> Self {
        Self {
            amp0: Complex64::new(FRAC_1_SQRT_2, 0.0),
            amp1: Complex64::from_polar(FRAC_1_SQRT_2, theta),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Phase of amp1 relative to amp0, in (−π, π].
    pub fn relative_phase(&self) -> f64 {
        (self.amp1 * self.amp0.conj()).arg()
    }
}

/// Control state processed at step `k` (1-based): `(|0⟩ + e^{2πi·0.φ_{n-k+1}…φ_n}|1⟩)/√2`.
pub fn input_state(word: &PhaseWord, k: usize) -> ControlQubitState {
    ControlQubitState::equator(TAU * word.suffix_fraction(k))
}

/// The n control states in processing order; step 1 carries phase `0.φ_n`.
pub fn encode_input_states(word: &PhaseWord) -> Vec<ControlQubitState> {
    (1..=word.len()).map(|k| input_state(word, k)).collect()
}

/// Control state for an arbitrary (not necessarily n-bit) phase `φ` in turns:
/// step `k` carries `2^{n-k}·φ`.
pub fn input_state_for_phase(phase_turns: f64, n: usize, k: usize) -> ControlQubitState {
    let scaled = (phase_turns * 2f64.powi((n - k) as i32)).rem_euclid(1.0);
    ControlQubitState::equator(TAU * scaled)
}

/// Feedback rotation for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationCommand {
    /// 1-based step index.
    pub step: usize,
    /// Realized angle Φ_k in turns (after truncation).
    pub angle: BinaryFraction,
    pub truncation: Option<usize>,
    /// Phase error from truncation, `2π(Φ_exact − Φ_truncated)` radians.
    pub delta: f64,
}

/// Rotation angle `Φ_k = Σ_{j=1}^{k-1} 2^{-(j+1)} φ_{n-k+j+1}`.
///
/// `known_bits` are the k−1 already measured bits ordered `φ_{n-k+2}…φ_n`.
/// With `truncation = Some(m)` only the m leading fractional bits of Φ_k are
/// kept and the dropped remainder is reported as `delta`.
pub fn rotation_angle(known_bits: &[u8], k: usize, truncation: Option<usize>) -> Result<RotationCommand> {
    if k == 0 || known_bits.len() != k - 1 {
        return Err(Error::ContractViolation(format!(
            "step {k} needs {} measured bits, got {}",
            k.saturating_sub(1),
            known_bits.len()
        )));
    }
    if known_bits.iter().any(|&b| b > 1) {
        return Err(Error::ContractViolation("measured bits must be 0 or 1".into()));
    }
    if k == 1 {
        return Ok(RotationCommand { step: 1, angle: BinaryFraction::zero(), truncation, delta: 0.0 });
    }
    // Position 1 of Φ_k is always zero; positions 2..=k hold the known bits.
    let mut bits = Vec::with_capacity(k);
    bits.push(0);
    bits.extend_from_slice(known_bits);
    let exact = BinaryFraction::from_bits(bits);
    Ok(match truncation {
        Some(m) => {
            let delta = TAU * exact.tail_turns(m);
            RotationCommand { step: k, angle: exact.truncated(m), truncation, delta }
        }
        None => RotationCommand { step: k, angle: exact, truncation, delta: 0.0 },
    })
}

/// `R_k`: multiplies amp1 by `exp(−2πiΦ_k + i·extra_delta)`.
pub fn apply_rotation(state: ControlQubitState, cmd: &RotationCommand, extra_delta: f64) -> ControlQubitState {
    rotate(state, -cmd.angle.radians() + extra_delta)
}

pub(crate) fn rotate(state: ControlQubitState, phase: f64) -> ControlQubitState {
    ControlQubitState { amp0: state.amp0, amp1: state.amp1 * Complex64::from_polar(1.0, phase) }
}

pub fn apply_hadamard(state: ControlQubitState) -> ControlQubitState {
    ControlQubitState {
        amp0: (state.amp0 + state.amp1) * FRAC_1_SQRT_2,
        amp1: (state.amp0 - state.amp1) * FRAC_1_SQRT_2,
    }
}
