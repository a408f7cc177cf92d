//! The serial measured QFT: one control qubit per step, measured immediately,
//! with each feedback rotation computed from the bits measured so far.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{povm_outcome_probability, quantize_phase_dac, sample_detection, NoiseParams, TieBreak};
use crate::phase::{PhaseWord, MAX_BITS};
use crate::qubit::{
    apply_hadamard, apply_rotation, input_state, input_state_for_phase, rotate, rotation_angle,
};

/// Outcome of transforming one phase word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    /// Recovered word, `φ₁` first.
    pub output: PhaseWord,
    /// 1-based step of the first wrong bit, or n when every bit is right.
    pub run_length: usize,
    /// Every bit was recovered.
    pub censored: bool,
    /// Number of wrong output bits.
    pub errors: usize,
    /// Pulses sent, including re-sends after empty pulses.
    pub pulses: u64,
    /// Clicks used for decisions (n × repeats).
    pub measurements: u64,
}

impl TrialRecord {
    /// Step index of the first wrong bit, if any.
    pub fn first_error(&self) -> Option<usize> {
        (!self.censored).then_some(self.run_length)
    }
}

/// Runs the serial pipeline on `word` and compares the result with it.
///
/// Steps go k = 1…n. Step k prepares the control state carrying
/// `0.φ_{n-k+1}…φ_n`, rotates by the (possibly truncated) angle computed from
/// the bits already measured, applies the Hadamard and measures. The measured
/// bit is φ_{n-k+1}, so the output word is the measurement sequence reversed.
pub fn run_serial_mqft<R: Rng + ?Sized>(word: &PhaseWord, noise: &NoiseParams, rng: &mut R) -> Result<TrialRecord> {
    noise.validate()?;
    let n = word.len();
    let mut measured = vec![0u8; n];
    let mut run_length = None;
    let mut errors = 0;
    let mut pulses = 0u64;
    let mut measurements = 0u64;

    for k in 1..=n {
        let cmd = rotation_angle(&measured[n - k + 1..], k, noise.truncation)?;
        let realized_turns = cmd.angle.turns();
        let (_, delta_dac) = quantize_phase_dac(realized_turns, noise.v_pi, noise.dac_digits);
        let input = input_state(word, k);

        let p0 = match noise.p_override {
            Some(flip) => {
                let exact_turns = realized_turns + cmd.delta / TAU;
                let ideal = apply_hadamard(rotate(input, -TAU * exact_turns));
                let q0 = ideal.amp0.norm_sqr();
                q0 * (1.0 - flip) + (1.0 - q0) * flip
            }
            None => {
                let state = apply_hadamard(apply_rotation(input, &cmd, delta_dac + noise.extra_delta));
                povm_outcome_probability(&state, noise.visibility)
            }
        };

        let truth = word.bit(n - k + 1);
        let mut ones = 0usize;
        for _ in 0..noise.repeats {
            let bit = match &noise.detector {
                Some(det) => {
                    let d = sample_detection(det, p0, noise.retry_cap, k, rng)?;
                    pulses += d.pulses;
                    d.outcome.bit().expect("detection always clicks")
                }
                None => {
                    pulses += 1;
                    u8::from(rng.random::<f64>() >= p0)
                }
            };
            ones += bit as usize;
            measurements += 1;
        }
        let bit = match (2 * ones).cmp(&noise.repeats) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => match noise.tie_break {
                TieBreak::Pessimistic => 1 - truth,
                TieBreak::Random => rng.random_range(0..=1u8),
            },
        };

        measured[n - k] = bit;
        if bit != truth {
            errors += 1;
            run_length.get_or_insert(k);
        }
    }

    Ok(TrialRecord {
        output: PhaseWord::new(measured)?,
        run_length: run_length.unwrap_or(n),
        censored: run_length.is_none(),
        errors,
        pulses,
        measurements,
    })
}

/// Largest n accepted by [`exact_serial_distribution`].
pub const MAX_EXACT_BITS: usize = 16;

/// Exact distribution of serial-pipeline readings for an arbitrary input
/// phase (turns), obtained by enumerating every measurement history.
///
/// Entry `r` is the probability of reading the word whose value is `r/2^n`.
/// Detection is perfect; `visibility` and `truncation` act as in the noisy
/// pipeline.
pub fn exact_serial_distribution(
    phase_turns: f64,
    n: usize,
    visibility: f64,
    truncation: Option<usize>,
) -> Result<Vec<f64>> {
    if n == 0 || n > MAX_EXACT_BITS.min(MAX_BITS) {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("exact enumeration supports 1..={MAX_EXACT_BITS} bits, got {n}"),
        });
    }
    let mut probs = vec![0.0; 1 << n];
    let mut measured = vec![0u8; n];
    enumerate(phase_turns, n, 1, 1.0, visibility, truncation, &mut measured, &mut probs)?;
    Ok(probs)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    phase_turns: f64,
    n: usize,
    k: usize,
    weight: f64,
    visibility: f64,
    truncation: Option<usize>,
    measured: &mut [u8],
    probs: &mut [f64],
) -> Result<()> {
    if k > n {
        let index = measured.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        probs[index] += weight;
        return Ok(());
    }
    let cmd = rotation_angle(&measured[n - k + 1..], k, truncation)?;
    let state = apply_hadamard(apply_rotation(input_state_for_phase(phase_turns, n, k), &cmd, 0.0));
    let p0 = povm_outcome_probability(&state, visibility);
    for (bit, p) in [(0u8, p0), (1u8, 1.0 - p0)] {
        if p <= 0.0 {
            continue;
        }
        measured[n - k] = bit;
        enumerate(phase_turns, n, k + 1, weight * p, visibility, truncation, measured, probs)?;
    }
    measured[n - k] = 0;
    Ok(())
}
