//! Target register held in a superposition of eigenstates of U.
//!
//! The density matrix is kept over the eigenbasis `{|u_s⟩}`. Because every
//! controlled power of U is diagonal there, one step (controlled-U, feedback
//! rotation, Hadamard, visibility-limited measurement, trace over the
//! control) acts on ρ as an element-wise (Schur) product, which reproduces
//! the two-branch collapse written in the `{u₀ˢ, u₁ˢ}` basis and extends it to
//! histories that contain measurement errors.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::phase::{fraction_value, PhaseWord};

const NORM_TOL: f64 = 1e-12;
/// Diagonal mass below which an eigenstate no longer counts as present.
const WEIGHT_TOL: f64 = 1e-14;

/// Eigenstates of the current step split by their bit `φ^s_{n-k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchSplit {
    /// Diagonal mass of eigenstates whose current bit is 0.
    pub w0: f64,
    pub w1: f64,
    pub members0: Vec<usize>,
    pub members1: Vec<usize>,
    /// Mass of eigenstates whose lower bits agree with the accepted history.
    pub consistent_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlMeasurement {
    pub bit: u8,
    /// Probability of outcome 0 before the collapse.
    pub p0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetRegister {
    eigenphases: Vec<PhaseWord>,
    coeffs: Vec<Complex64>,
    rho: DMatrix<Complex64>,
}

/// Kraus weights `m_{b,c}²` of the visibility POVM for outcome `b`, control basis state `c`.
fn povm_weight(outcome: u8, control: usize, visibility: f64) -> f64 {
    if outcome as usize == control {
        0.5 * (1.0 + visibility)
    } else {
        0.5 * (1.0 - visibility)
    }
}

impl TargetRegister {
    /// Pure register `Σ c_s |u_s⟩`.
    pub fn new(eigenphases: Vec<PhaseWord>, coeffs: Vec<Complex64>) -> Result<Self> {
        if eigenphases.is_empty() {
            return Err(Error::ContractViolation("register needs at least one eigenstate".into()));
        }
        if eigenphases.len() != coeffs.len() {
            return Err(Error::DimensionMismatch { expected: eigenphases.len(), actual: coeffs.len() });
        }
        let n = eigenphases[0].len();
        if eigenphases.iter().any(|w| w.len() != n) {
            return Err(Error::ContractViolation("eigenphases must share one bit length".into()));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormViolation { norm });
        }
        let r = coeffs.len();
        let rho = DMatrix::from_fn(r, r, |s, t| coeffs[s] * coeffs[t].conj());
        Ok(Self { eigenphases, coeffs, rho })
    }

    /// Equal superposition `r^{-1/2} Σ |u_s⟩`.
    pub fn uniform(eigenphases: Vec<PhaseWord>) -> Result<Self> {
        let amp = Complex64::new(1.0 / (eigenphases.len() as f64).sqrt(), 0.0);
        let coeffs = vec![amp; eigenphases.len()];
        Self::new(eigenphases, coeffs)
    }

    pub fn n_bits(&self) -> usize {
        self.eigenphases[0].len()
    }

    pub fn eigenphases(&self) -> &[PhaseWord] {
        &self.eigenphases
    }

    /// Initial coefficients.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// Probability of each eigenstate, `ρ_ss`.
    pub fn eigenstate_weights(&self) -> Vec<f64> {
        (0..self.rho.nrows()).map(|s| self.rho[(s, s)].re).collect()
    }

    /// Checks Hermiticity, unit trace and positivity to `tol`.
    pub fn check_state(&self, tol: f64) -> Result<()> {
        let herm = (&self.rho - self.rho.adjoint()).camax();
        if herm > tol {
            return Err(Error::ContractViolation(format!("ρ not Hermitian (deviation {herm:e})")));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > tol {
            return Err(Error::NormViolation { norm: trace });
        }
        let min_eig = self.rho.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -tol {
            return Err(Error::ContractViolation(format!("ρ has negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    fn step_of(&self, accepted: &[u8]) -> Result<usize> {
        let k = accepted.len() + 1;
        if k > self.n_bits() {
            return Err(Error::ContractViolation(format!(
                "{} accepted bits leave no step in a {}-bit register",
                accepted.len(),
                self.n_bits()
            )));
        }
        if accepted.iter().any(|&b| b > 1) {
            return Err(Error::ContractViolation("accepted bits must be 0 or 1".into()));
        }
        Ok(k)
    }

    /// Control phase of eigenstate `s` after the feedback rotation:
    /// `2π(0.φ^s_{n-k+1}…φ^s_n − Φ_k) + δ`, with Φ_k built from `accepted`
    /// (ordered `φ_{n-k+2}…φ_n`).
    fn residual_phase(&self, s: usize, accepted: &[u8], delta: f64) -> f64 {
        let n = self.n_bits();
        let k = accepted.len() + 1;
        let suffix = &self.eigenphases[s].bits()[n - k..];
        // Φ_k has a zero first bit followed by the accepted bits.
        let diff: Vec<i8> = std::iter::once(suffix[0] as i8)
            .chain(suffix[1..].iter().zip(accepted).map(|(&x, &y)| x as i8 - y as i8))
            .collect();
        let pos: Vec<u8> = diff.iter().map(|&d| u8::from(d > 0)).collect();
        let neg: Vec<u8> = diff.iter().map(|&d| u8::from(d < 0)).collect();
        TAU * (fraction_value(&pos) - fraction_value(&neg)) + delta
    }

    /// Post-Hadamard control amplitudes `((1+e^{iθ})/2, (1−e^{iθ})/2)` per eigenstate.
    fn control_amplitudes(&self, accepted: &[u8], delta: f64) -> [Vec<Complex64>; 2] {
        let r = self.rho.nrows();
        let mut a0 = Vec::with_capacity(r);
        let mut a1 = Vec::with_capacity(r);
        for s in 0..r {
            let e = Complex64::from_polar(1.0, self.residual_phase(s, accepted, delta));
            a0.push((1.0 + e) * 0.5);
            a1.push((1.0 - e) * 0.5);
        }
        [a0, a1]
    }

    pub fn branch_split(&self, accepted: &[u8]) -> Result<BranchSplit> {
        let k = self.step_of(accepted)?;
        let n = self.n_bits();
        let mut split = BranchSplit {
            w0: 0.0,
            w1: 0.0,
            members0: vec![],
            members1: vec![],
            consistent_mass: 0.0,
        };
        for (s, word) in self.eigenphases.iter().enumerate() {
            let w = self.rho[(s, s)].re;
            if w <= WEIGHT_TOL {
                continue;
            }
            if word.bits()[n - k + 1..] == *accepted {
                split.consistent_mass += w;
            }
            if word.bits()[n - k] == 0 {
                split.w0 += w;
                split.members0.push(s);
            } else {
                split.w1 += w;
                split.members1.push(s);
            }
        }
        if split.consistent_mass <= WEIGHT_TOL {
            return Err(Error::InconsistentHistory { step: k });
        }
        Ok(split)
    }

    /// Probability of outcome 0 at the step following `accepted`.
    pub fn outcome_probability(&self, accepted: &[u8], visibility: f64, delta: f64) -> Result<f64> {
        self.step_of(accepted)?;
        let amps = self.control_amplitudes(accepted, delta);
        Ok(self.outcome_probability_with(&amps, 0, visibility))
    }

    fn outcome_probability_with(&self, amps: &[Vec<Complex64>; 2], outcome: u8, visibility: f64) -> f64 {
        (0..self.rho.nrows())
            .map(|s| {
                let per_state: f64 = (0..2).map(|c| povm_weight(outcome, c, visibility) * amps[c][s].norm_sqr()).sum();
                self.rho[(s, s)].re * per_state
            })
            .sum()
    }

    /// Unnormalized `Σ_c m_{b,c}² (a_c a_c†) ∘ ρ`.
    fn kraus_update(&self, amps: &[Vec<Complex64>; 2], outcome: u8, visibility: f64) -> DMatrix<Complex64> {
        let r = self.rho.nrows();
        let (w0, w1) = (povm_weight(outcome, 0, visibility), povm_weight(outcome, 1, visibility));
        DMatrix::from_fn(r, r, |s, t| {
            let factor = amps[0][s] * amps[0][t].conj() * w0 + amps[1][s] * amps[1][t].conj() * w1;
            factor * self.rho[(s, t)]
        })
    }

    /// Collapses onto a given outcome and returns its probability.
    pub fn collapse_to(&mut self, accepted: &[u8], visibility: f64, delta: f64, outcome: u8) -> Result<f64> {
        self.step_of(accepted)?;
        let amps = self.control_amplitudes(accepted, delta);
        let p = self.outcome_probability_with(&amps, outcome, visibility);
        if p <= 0.0 {
            return Err(Error::InconsistentHistory { step: accepted.len() + 1 });
        }
        self.rho = self.kraus_update(&amps, outcome, visibility) / Complex64::new(p, 0.0);
        Ok(p)
    }

    /// Samples the control outcome and leaves ρ in the post-measurement mixture.
    pub fn measure_control_collapse<R: Rng + ?Sized>(
        &mut self,
        accepted: &[u8],
        visibility: f64,
        delta: f64,
        rng: &mut R,
    ) -> Result<ControlMeasurement> {
        self.step_of(accepted)?;
        let amps = self.control_amplitudes(accepted, delta);
        let p0 = self.outcome_probability_with(&amps, 0, visibility);
        let bit = u8::from(rng.random::<f64>() >= p0);
        let p = if bit == 0 { p0 } else { 1.0 - p0 };
        self.rho = self.kraus_update(&amps, bit, visibility) / Complex64::new(p, 0.0);
        Ok(ControlMeasurement { bit, p0 })
    }

    /// The step happened but its result was lost: `ρ ← Σ_b M_b ρ̃ M_b†`.
    pub fn nonselective_collapse(&mut self, accepted: &[u8], visibility: f64, delta: f64) -> Result<()> {
        self.step_of(accepted)?;
        let amps = self.control_amplitudes(accepted, delta);
        self.rho = self.kraus_update(&amps, 0, visibility) + self.kraus_update(&amps, 1, visibility);
        Ok(())
    }

    /// Probability that the next measurement disagrees with the current bit
    /// of the eigenstate the register is in, computed by applying the
    /// measurement to each branch of ρ separately.
    pub fn error_probability(&self, accepted: &[u8], visibility: f64, delta: f64) -> Result<f64> {
        let k = self.step_of(accepted)?;
        let n = self.n_bits();
        let amps = self.control_amplitudes(accepted, delta);
        let mut err = 0.0;
        for branch in 0..2u8 {
            let mut projected = self.clone();
            for s in 0..self.rho.nrows() {
                for t in 0..self.rho.nrows() {
                    let keep = self.eigenphases[s].bits()[n - k] == branch && self.eigenphases[t].bits()[n - k] == branch;
                    if !keep {
                        projected.rho[(s, t)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            err += projected.kraus_update(&amps, 1 - branch, visibility).trace().re;
        }
        Ok(err)
    }

    /// Measures the same step `repeats` times, re-drawing δ for each repetition.
    pub fn repeat_measurements<R: Rng + ?Sized>(
        &mut self,
        accepted: &[u8],
        visibility: f64,
        repeats: usize,
        mut delta: impl FnMut(&mut R) -> f64,
        rng: &mut R,
    ) -> Result<Vec<u8>> {
        (0..repeats)
            .map(|_| {
                let d = delta(rng);
                self.measure_control_collapse(accepted, visibility, d, rng).map(|m| m.bit)
            })
            .collect()
    }

    /// Runs every step with feedback from the sampled bits; returns the reading.
    pub fn run_trajectory<R: Rng + ?Sized>(&mut self, visibility: f64, delta: f64, rng: &mut R) -> Result<PhaseWord> {
        let n = self.n_bits();
        let mut measured = vec![0u8; n];
        for k in 1..=n {
            let m = self.measure_control_collapse(&measured[n - k + 1..], visibility, delta, rng)?;
            measured[n - k] = m.bit;
        }
        PhaseWord::new(measured)
    }
}
