//! Device noise: visibility-limited measurement, DAC-quantized phase drive,
//! photon loss with dark counts, and the phase-error census.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{check_probability, Error, Result};
use crate::phase::PhaseWord;
use crate::qubit::{rotation_angle, ControlQubitState};

/// How a tied majority vote (possible for even repeat counts) is decided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// A tie is scored as a wrong bit, matching the ⌊M/2⌋ upper limit of
    /// the majority error sum.
    #[default]
    Pessimistic,
    /// A tie is decided by a fair coin.
    Random,
}

/// Photon source, circuit loss and detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorParams {
    /// Mean photons per pulse.
    pub mu: f64,
    /// Optical loss of the circuit in dB.
    pub loss_db: f64,
    /// Detector efficiency.
    pub eta_det: f64,
    /// Dark-click probability per pulse.
    pub dark_rate: f64,
}

impl DetectorParams {
    pub fn paper() -> Self {
        Self { mu: 0.7, loss_db: 8.4, eta_det: 0.13, dark_rate: 6.5e-7 }
    }

    /// Probability that at least one photon reaches the detector and fires it.
    ///
    /// Photon number is Poisson(mu); loss and efficiency thin it, so the
    /// detected number is Poisson(mu·10^{-loss/10}·eta).
    pub fn signal_probability(&self) -> f64 {
        let transmitted = self.mu * 10f64.powf(-self.loss_db / 10.0) * self.eta_det;
        -(-transmitted).exp_m1()
    }

    /// Probability that a pulse produces any click.
    pub fn click_probability(&self) -> f64 {
        let s = self.signal_probability();
        s + (1.0 - s) * self.dark_rate
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter { name: "mu", reason: format!("{} must be ≥ 0", self.mu) });
        }
        if !(self.loss_db >= 0.0 && self.loss_db.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "loss_db",
                reason: format!("{} must be ≥ 0", self.loss_db),
            });
        }
        check_probability("eta_det", self.eta_det)?;
        check_probability("dark_rate", self.dark_rate)
    }
}

/// Measurement-side noise model for the serial pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseParams {
    /// Interferometer visibility v.
    pub visibility: f64,
    /// Number of fractional bits kept in each feedback angle.
    pub truncation: Option<usize>,
    /// Significant decimal digits of the drive voltage; `None` is an exact DAC.
    pub dac_digits: Option<u32>,
    /// Drive voltage for a π phase shift.
    pub v_pi: f64,
    /// `None` delivers every pulse to the detector with certainty.
    pub detector: Option<DetectorParams>,
    /// Maximum number of pulses sent for one measurement before the trial aborts.
    pub retry_cap: u64,
    /// Direct per-measurement flip probability; bypasses visibility and phase error.
    pub p_override: Option<f64>,
    /// Measurements per qubit decided by majority.
    pub repeats: usize,
    pub tie_break: TieBreak,
    /// Systematic phase error (radians) added to every rotation.
    pub extra_delta: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseParams {
    /// Perfect projective measurement with exact angles.
    pub fn ideal() -> Self {
        Self {
            visibility: 1.0,
            truncation: None,
            dac_digits: None,
            v_pi: 5.80,
            detector: None,
            retry_cap: 1000,
            p_override: None,
            repeats: 1,
            tie_break: TieBreak::Pessimistic,
            extra_delta: 0.0,
        }
    }

    /// Device values of the fiber-loop experiment.
    pub fn paper_profile() -> Self {
        Self {
            visibility: 0.98,
            truncation: Some(5),
            dac_digits: Some(3),
            v_pi: 5.80,
            detector: Some(DetectorParams::paper()),
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("visibility", self.visibility)?;
        if !(self.v_pi > 0.0 && self.v_pi.is_finite()) {
            return Err(Error::InvalidParameter { name: "v_pi", reason: format!("{} must be > 0", self.v_pi) });
        }
        if self.truncation == Some(0) {
            return Err(Error::InvalidParameter { name: "truncation", reason: "must be ≥ 1".into() });
        }
        if self.dac_digits == Some(0) {
            return Err(Error::InvalidParameter { name: "dac_digits", reason: "must be ≥ 1".into() });
        }
        if self.retry_cap < 1 {
            return Err(Error::InvalidParameter { name: "retry_cap", reason: "must be ≥ 1".into() });
        }
        if self.repeats < 1 {
            return Err(Error::InvalidParameter { name: "repeats", reason: "must be ≥ 1".into() });
        }
        if let Some(p) = self.p_override {
            check_probability("p_override", p)?;
        }
        if !self.extra_delta.is_finite() {
            return Err(Error::InvalidParameter { name: "extra_delta", reason: "must be finite".into() });
        }
        match &self.detector {
            Some(d) => d.validate(),
            None => Ok(()),
        }
    }
}

/// Probability of outcome 0 under the visibility-limited POVM
/// `M₀ = √((1+v)/2)|0⟩⟨0| + √((1−v)/2)|1⟩⟨1|`.
pub fn povm_outcome_probability(state: &ControlQubitState, visibility: f64) -> f64 {
    0.5 * (1.0 + visibility) * state.amp0.norm_sqr() + 0.5 * (1.0 - visibility) * state.amp1.norm_sqr()
}

/// Per-measurement error probability `(1 − v·cos δ)/2`.
pub fn analytic_error_probability(visibility: f64, cos_delta: f64) -> f64 {
    0.5 * (1.0 - visibility * cos_delta)
}

fn round_significant(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32 + 1;
    let scale = 10f64.powi(digits as i32 - magnitude);
    (x * scale).round() / scale
}

/// Drive voltage for a rotation of `angle_turns` and the phase error left by
/// rounding it to `dac_digits` significant digits.
///
/// Φ = 1/2 maps to a π shift at `v_pi` volts. Returns `(volts, delta_dac)`.
pub fn quantize_phase_dac(angle_turns: f64, v_pi: f64, dac_digits: Option<u32>) -> (f64, f64) {
    let ideal = 2.0 * v_pi * angle_turns;
    let volts = match dac_digits {
        Some(d) => round_significant(ideal, d),
        None => ideal,
    };
    (volts, PI * (volts - ideal) / v_pi)
}

/// What the detector reported for one pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseOutcome {
    SignalClick { bit: u8 },
    DarkClick { bit: u8 },
    NoClick,
}

impl PulseOutcome {
    pub fn bit(&self) -> Option<u8> {
        match *self {
            PulseOutcome::SignalClick { bit } | PulseOutcome::DarkClick { bit } => Some(bit),
            PulseOutcome::NoClick => None,
        }
    }
}

/// One pulse: signal click with a bit drawn from `p0` (probability of 0),
/// otherwise a dark click with a uniform bit, otherwise nothing.
pub fn sample_pulse<R: Rng + ?Sized>(detector: &DetectorParams, p0: f64, rng: &mut R) -> PulseOutcome {
    if rng.random::<f64>() < detector.signal_probability() {
        let bit = u8::from(rng.random::<f64>() >= p0);
        PulseOutcome::SignalClick { bit }
    } else if rng.random::<f64>() < detector.dark_rate {
        PulseOutcome::DarkClick { bit: rng.random_range(0..=1u8) }
    } else {
        PulseOutcome::NoClick
    }
}

/// The clicked pulse of one measurement, after re-sending through no-click pulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Detection {
    pub outcome: PulseOutcome,
    /// Pulses sent, including the one that clicked.
    pub pulses: u64,
}

/// Sends pulses until one clicks, at most `retry_cap` of them.
///
/// Equivalent in distribution to calling [`sample_pulse`] repeatedly, but
/// draws the number of empty pulses from a geometric law in one step.
pub fn sample_detection<R: Rng + ?Sized>(
    detector: &DetectorParams,
    p0: f64,
    retry_cap: u64,
    step: usize,
    rng: &mut R,
) -> Result<Detection> {
    let p_click = detector.click_probability();
    if p_click <= 0.0 {
        return Err(Error::RetryCapExceeded { step, pulses: retry_cap });
    }
    let empty = if p_click >= 1.0 {
        0
    } else {
        Geometric::new(p_click).expect("click probability in (0,1)").sample(rng)
    };
    if empty >= retry_cap {
        return Err(Error::RetryCapExceeded { step, pulses: retry_cap });
    }
    let signal_share = detector.signal_probability() / p_click;
    let outcome = if rng.random::<f64>() < signal_share {
        PulseOutcome::SignalClick { bit: u8::from(rng.random::<f64>() >= p0) }
    } else {
        PulseOutcome::DarkClick { bit: rng.random_range(0..=1u8) }
    };
    Ok(Detection { outcome, pulses: empty + 1 })
}

/// Empirical distribution of `cos δ` over every executed rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseErrorCensus {
    /// `cos(δ_truncation + δ_dac)` per rotation, in execution order.
    pub cos_delta: Vec<f64>,
    pub mean_abs_cos: f64,
    pub min_abs_cos: f64,
}

impl PhaseErrorCensus {
    pub fn rotations(&self) -> usize {
        self.cos_delta.len()
    }

    /// Counts of `|cos δ|` in `bins` equal bins over `[lo, hi]`; values
    /// outside the range are dropped.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<usize> {
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for c in self.cos_delta.iter().map(|c| c.abs()) {
            if c < lo || c > hi {
                continue;
            }
            let idx = (((c - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
    }
}

/// Records the phase error of every feedback rotation executed while
/// transforming `words` with correct feedback.
pub fn phase_error_census(
    words: &[PhaseWord],
    truncation: Option<usize>,
    v_pi: f64,
    dac_digits: Option<u32>,
) -> Result<PhaseErrorCensus> {
    if words.is_empty() {
        return Err(Error::InvalidParameter { name: "words", reason: "census needs at least one word".into() });
    }
    let mut cos_delta = Vec::with_capacity(words.iter().map(PhaseWord::len).sum());
    for word in words {
        let n = word.len();
        for k in 1..=n {
            let cmd = rotation_angle(&word.bits()[n - k + 1..], k, truncation)?;
            let (_, delta_dac) = quantize_phase_dac(cmd.angle.turns(), v_pi, dac_digits);
            cos_delta.push((cmd.delta + delta_dac).cos());
        }
    }
    let mean_abs_cos = cos_delta.iter().map(|c| c.abs()).sum::<f64>() / cos_delta.len() as f64;
    let min_abs_cos = cos_delta.iter().map(|c| c.abs()).fold(f64::INFINITY, f64::min);
    Ok(PhaseErrorCensus { cos_delta, mean_abs_cos, min_abs_cos })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::qubit::{apply_hadamard, rotate};

    #[test]
    fn povm_examples() {
        let zero = ControlQubitState::zero();
        assert_eq!(povm_outcome_probability(&zero, 1.0), 1.0);
        for v in [0.0, 0.3, 0.98] {
            assert!((povm_outcome_probability(&zero, v) - (1.0 + v) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn povm_with_phase_error_matches_closed_form() {
        for &(v, delta) in &[(0.99, 0.1), (0.98, -0.3), (0.5, 1.2), (1.0, 0.0)] {
            // Correct bit is 0: residual phase δ only.
            let s = apply_hadamard(rotate(ControlQubitState::equator(0.0), delta));
            let p_err = 1.0 - povm_outcome_probability(&s, v);
            assert!((p_err - analytic_error_probability(v, delta.cos())).abs() < 1e-14);
            // Correct bit is 1.
            let s = apply_hadamard(rotate(ControlQubitState::equator(PI), delta));
            let p_err = povm_outcome_probability(&s, v);
            assert!((p_err - analytic_error_probability(v, delta.cos())).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_error_examples() {
        assert_eq!(analytic_error_probability(1.0, 1.0), 0.0);
        assert!((analytic_error_probability(0.99, 0.9936) - 8.2e-3).abs() < 0.05e-3);
        assert!((analytic_error_probability(0.99, 0.98) - 1.5e-2).abs() < 0.05e-2);
    }

    #[test]
    fn dac_examples() {
        let (v, d) = quantize_phase_dac(0.5, 5.80, Some(3));
        assert!((v - 5.80).abs() < 1e-12 && d.abs() < 1e-12);
        assert_eq!(quantize_phase_dac(0.0, 5.80, Some(3)), (0.0, 0.0));
        let (v, d) = quantize_phase_dac(1.0 / 3.0, 5.80, Some(3));
        assert!((v - 3.87).abs() < 1e-12);
        let ideal = 2.0 * 5.80 / 3.0;
        assert!((d - PI * (3.87 - ideal) / 5.80).abs() < 1e-15);
        let (v, d) = quantize_phase_dac(1.0 / 3.0, 5.80, None);
        assert!((v - ideal).abs() < 1e-15 && d == 0.0);
    }

    #[test]
    fn signal_probability_paper_constants() {
        let p = DetectorParams { mu: 0.7, loss_db: 8.4, eta_det: 0.13, dark_rate: 0.0 }.signal_probability();
        let expected = 1.0 - (-0.7 * 10f64.powf(-0.84) * 0.13).exp();
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 1.31e-2).abs() < 0.01e-2);
    }

    #[test]
    fn no_photons_no_clicks() {
        let d = DetectorParams { mu: 0.0, loss_db: 0.0, eta_det: 1.0, dark_rate: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_pulse(&d, 0.5, &mut rng), PulseOutcome::NoClick);
        }
        assert!(matches!(sample_detection(&d, 0.5, 10, 3, &mut rng), Err(Error::RetryCapExceeded { step: 3, .. })));
    }

    #[test]
    fn dark_click_rate() {
        let d = DetectorParams { mu: 0.0, loss_db: 0.0, eta_det: 1.0, dark_rate: 6.5e-3 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let dark = (0..n)
            .filter(|_| matches!(sample_pulse(&d, 1.0, &mut rng), PulseOutcome::DarkClick { .. }))
            .count() as f64;
        let se = (n as f64 * 6.5e-3 * (1.0 - 6.5e-3)).sqrt();
        assert!((dark - n as f64 * 6.5e-3).abs() < 4.0 * se);
    }

    #[test]
    fn detection_matches_pulse_by_pulse() {
        let d = DetectorParams { mu: 0.7, loss_db: 8.4, eta_det: 0.13, dark_rate: 2e-3 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 20_000;
        let mut slow_pulses = 0u64;
        let mut slow_dark = 0u64;
        for _ in 0..trials {
            loop {
                slow_pulses += 1;
                match sample_pulse(&d, 0.5, &mut rng) {
                    PulseOutcome::NoClick => continue,
                    PulseOutcome::DarkClick { .. } => {
                        slow_dark += 1;
                        break;
                    }
                    PulseOutcome::SignalClick { .. } => break,
                }
            }
        }
        let mut fast_pulses = 0u64;
        let mut fast_dark = 0u64;
        for _ in 0..trials {
            let det = sample_detection(&d, 0.5, u64::MAX, 1, &mut rng).unwrap();
            fast_pulses += det.pulses;
            fast_dark += matches!(det.outcome, PulseOutcome::DarkClick { .. }) as u64;
        }
        let mean = 1.0 / d.click_probability();
        let se = ((1.0 - d.click_probability()).sqrt() * mean) / (trials as f64).sqrt();
        for total in [slow_pulses, fast_pulses] {
            assert!((total as f64 / trials as f64 - mean).abs() < 4.0 * se);
        }
        let dark_share = d.click_probability() - d.signal_probability();
        let dark_share = dark_share / d.click_probability();
        let se = (dark_share * (1.0 - dark_share) / trials as f64).sqrt();
        for dark in [slow_dark, fast_dark] {
            assert!((dark as f64 / trials as f64 - dark_share).abs() < 4.0 * se);
        }
    }

    #[test]
    fn census_exact_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let words: Vec<_> = (0..20).map(|_| PhaseWord::random(40, &mut rng).unwrap()).collect();
        let c = phase_error_census(&words, None, 5.80, None).unwrap();
        assert_eq!(c.rotations(), 800);
        assert!(c.cos_delta.iter().all(|&x| x == 1.0));
        assert!(phase_error_census(&[], None, 5.8, None).is_err());
    }

    #[test]
    fn census_truncated_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let words: Vec<_> = (0..100).map(|_| PhaseWord::random(255, &mut rng).unwrap()).collect();
        let c = phase_error_census(&words, Some(5), 5.80, None).unwrap();
        assert!(c.min_abs_cos >= (PI / 16.0).cos());
        assert!((c.mean_abs_cos - 0.9936).abs() < 1e-3);
        let hist = c.histogram(0.98, 1.0, 20);
        assert_eq!(hist.iter().sum::<usize>(), c.rotations());
    }

    #[test]
    fn validation() {
        assert!(NoiseParams::paper_profile().validate().is_ok());
        let bad = NoiseParams { visibility: 1.2, ..NoiseParams::ideal() };
        assert!(bad.validate().is_err());
        let bad = NoiseParams { v_pi: 0.0, ..NoiseParams::ideal() };
        assert!(bad.validate().is_err());
        let bad = NoiseParams { p_override: Some(-0.1), ..NoiseParams::ideal() };
        assert!(bad.validate().is_err());
        let mut bad = NoiseParams::paper_profile();
        bad.detector.as_mut().unwrap().eta_det = 2.0;
        assert!(bad.validate().is_err());
    }
}
