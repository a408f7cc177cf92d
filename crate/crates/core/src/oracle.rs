//! Exact statevector simulation of the three equivalent measured-QFT circuits
//! for small n, used as ground truth for the serial pipeline.
//!
//! Qubit q of the input register carries phase `2^q·φ`, so the input for
//! phase φ is `2^{-n/2} Σ_j e^{2πiφj}|j⟩` with j read little-endian. Qubit q is
//! read out as bit φ_{q+1}; outcome index `Σ_q bit_q·2^{n-1-q}` therefore
//! equals the reading `φ₁…φₙ` as an integer.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 14;

/// A signed angle `numerator / 2^log2_den` in turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicTurns {
    pub numerator: i64,
    pub log2_den: u32,
}

impl DyadicTurns {
    pub fn new(numerator: i64, log2_den: u32) -> Self {
        Self { numerator, log2_den }.reduced()
    }

    fn reduced(mut self) -> Self {
        while self.log2_den > 0 && self.numerator % 2 == 0 {
            self.numerator /= 2;
            self.log2_den -= 1;
        }
        if self.numerator == 0 {
            self.log2_den = 0;
        }
        self
    }

    pub fn turns(&self) -> f64 {
        self.numerator as f64 / 2f64.powi(self.log2_den as i32)
    }

    pub fn radians(&self) -> f64 {
        TAU * self.turns()
    }

    pub fn add(self, other: Self) -> Self {
        let den = self.log2_den.max(other.log2_den);
        let a = self.numerator << (den - self.log2_den);
        let b = other.numerator << (den - other.log2_den);
        Self::new(a + b, den)
    }

    pub fn neg(self) -> Self {
        Self { numerator: -self.numerator, log2_den: self.log2_den }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Hadamard(usize),
    /// Multiplies the |11⟩ component of (control, target) by `e^{2πi·angle}`.
    ControlledPhase { control: usize, target: usize, angle: DyadicTurns },
    Measure(usize),
    /// Multiplies the target's |1⟩ amplitude by `e^{2πi·Σ angle·bit}` over
    /// the recorded outcomes of already measured qubits.
    ClassicalPhase { target: usize, terms: Vec<(usize, DyadicTurns)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    n: usize,
    gates: Vec<Gate>,
}

impl CircuitSpec {
    /// Validates indices, measurement order and that no quantum gate touches
    /// a measured qubit (a measured control is allowed and acts classically).
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        check_n(n)?;
        let mut measured = vec![false; n];
        let in_range = |q: usize| {
            if q < n {
                Ok(())
            } else {
                Err(Error::Circuit(format!("qubit {q} out of range for {n} qubits")))
            }
        };
        for (i, g) in gates.iter().enumerate() {
            match g {
                Gate::Hadamard(q) => {
                    in_range(*q)?;
                    if measured[*q] {
                        return Err(Error::Circuit(format!("gate {i}: Hadamard on measured qubit {q}")));
                    }
                }
                Gate::ControlledPhase { control, target, .. } => {
                    in_range(*control)?;
                    in_range(*target)?;
                    if control == target {
                        return Err(Error::Circuit(format!("gate {i}: control equals target")));
                    }
                    if measured[*target] {
                        return Err(Error::Circuit(format!("gate {i}: phase on measured qubit {target}")));
                    }
                }
                Gate::Measure(q) => {
                    in_range(*q)?;
                    if measured[*q] {
                        return Err(Error::Circuit(format!("gate {i}: qubit {q} measured twice")));
                    }
                    measured[*q] = true;
                }
                Gate::ClassicalPhase { target, terms } => {
                    in_range(*target)?;
                    if measured[*target] {
                        return Err(Error::Circuit(format!("gate {i}: phase on measured qubit {target}")));
                    }
                    for (q, _) in terms {
                        in_range(*q)?;
                        if !measured[*q] {
                            return Err(Error::Circuit(format!("gate {i}: rule reads unmeasured qubit {q}")));
                        }
                    }
                }
            }
        }
        if let Some(q) = measured.iter().position(|m| !m) {
            return Err(Error::Circuit(format!("qubit {q} is never measured")));
        }
        Ok(Self { n, gates })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
}

fn check_n(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "n", reason: format!("{n} not in 1..={MAX_QUBITS}") })
    }
}

/// Angle `−2^{-(j+1)}` turns (−π/2^j rad) between qubits `j` apart.
fn feedback_angle(j: usize) -> DyadicTurns {
    DyadicTurns::new(-1, j as u32 + 1)
}

/// Inverse QFT with controlled-phase gates, measured at the end.
pub fn build_qft_circuit(n: usize) -> Result<CircuitSpec> {
    check_n(n)?;
    let mut gates = Vec::new();
    for k in 1..=n {
        let target = n - k;
        for j in 1..k {
            gates.push(Gate::ControlledPhase { control: target + j, target, angle: feedback_angle(j) });
        }
        gates.push(Gate::Hadamard(target));
    }
    gates.extend((0..n).rev().map(Gate::Measure));
    CircuitSpec::new(n, gates)
}

/// The same transform with every controlled phase replaced by a phase
/// conditioned on an earlier measurement result.
pub fn build_semiclassical_circuit(n: usize) -> Result<CircuitSpec> {
    check_n(n)?;
    let mut gates = Vec::new();
    for k in 1..=n {
        let target = n - k;
        if k > 1 {
            let terms = (1..k).map(|j| (target + j, feedback_angle(j))).collect();
            gates.push(Gate::ClassicalPhase { target, terms });
        }
        gates.push(Gate::Hadamard(target));
        gates.push(Gate::Measure(target));
    }
    CircuitSpec::new(n, gates)
}

/// Input register for phase φ (turns): `2^{-n/2} Σ_j e^{2πiφj}|j⟩`.
pub fn phase_input_state(n: usize, phase_turns: f64) -> Result<Vec<Complex64>> {
    check_n(n)?;
    let norm = 1.0 / ((1usize << n) as f64).sqrt();
    Ok((0..1usize << n)
        .map(|j| Complex64::from_polar(norm, TAU * (phase_turns * j as f64).rem_euclid(1.0)))
        .collect())
}

/// Probabilities over n-bit readings, indexed as described in the module docs.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, actual: probs.len() });
        }
        Ok(Self { n, probs })
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probs[index]
    }
}

/// Half the L1 distance between two distributions over the same readings.
pub fn total_variation(a: &OutcomeDistribution, b: &OutcomeDistribution) -> Result<f64> {
    if a.probs.len() != b.probs.len() {
        return Err(Error::DimensionMismatch { expected: a.probs.len(), actual: b.probs.len() });
    }
    Ok(0.5 * a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// One measurement history: unmeasured qubits stay in the statevector, measured
/// ones are removed and their outcomes recorded.
#[derive(Clone)]
struct Branch {
    weight_check: f64,
    outcomes: Vec<Option<u8>>,
    /// `live[p]` is the qubit stored at bit p of the amplitude index.
    live: Vec<usize>,
    amps: Vec<Complex64>,
}

impl Branch {
    fn position(&self, q: usize) -> usize {
        self.live.iter().position(|&x| x == q).expect("live qubit")
    }

    fn hadamard(&mut self, q: usize) {
        let mask = 1 << self.position(q);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a, b) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[i | mask] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }

    fn phase_on_one(&mut self, q: usize, condition: Option<usize>, angle: f64) {
        let mask = 1 << self.position(q);
        let cmask = condition.map_or(0, |c| 1 << self.position(c));
        let factor = Complex64::from_polar(1.0, angle);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask != 0 && i & cmask == cmask {
                *a *= factor;
            }
        }
    }

    fn split(self, q: usize) -> [Branch; 2] {
        let p = self.position(q);
        let mask = 1usize << p;
        let low = mask - 1;
        let half = self.amps.len() / 2;
        let mut out = [0u8, 1u8].map(|bit| {
            let mut outcomes = self.outcomes.clone();
            outcomes[q] = Some(bit);
            let mut live = self.live.clone();
            live.remove(p);
            Branch { weight_check: 0.0, outcomes, live, amps: Vec::with_capacity(half) }
        });
        for rest in 0..half {
            let base = ((rest & !low) << 1) | (rest & low);
            out[0].amps.push(self.amps[base]);
            out[1].amps.push(self.amps[base | mask]);
        }
        for b in &mut out {
            b.weight_check = b.amps.iter().map(|a| a.norm_sqr()).sum();
        }
        out
    }
}

/// Branch weights below this are dropped during enumeration.
const PRUNE: f64 = 1e-30;

/// Exact outcome distribution, expanding every measurement into both branches.
pub fn outcome_distribution(circuit: &CircuitSpec, input: &[Complex64]) -> Result<OutcomeDistribution> {
    let n = circuit.n;
    if input.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, actual: input.len() });
    }
    let norm: f64 = input.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NormViolation { norm });
    }
    let mut branches = vec![Branch {
        weight_check: 1.0,
        outcomes: vec![None; n],
        live: (0..n).collect(),
        amps: input.to_vec(),
    }];
    for gate in &circuit.gates {
        match gate {
            Gate::Hadamard(q) => branches.iter_mut().for_each(|b| b.hadamard(*q)),
            Gate::ControlledPhase { control, target, angle } => {
                for b in &mut branches {
                    match b.outcomes[*control] {
                        Some(0) => {}
                        Some(_) => b.phase_on_one(*target, None, angle.radians()),
                        None => b.phase_on_one(*target, Some(*control), angle.radians()),
                    }
                }
            }
            Gate::ClassicalPhase { target, terms } => {
                for b in &mut branches {
                    let total = terms
                        .iter()
                        .filter(|(q, _)| b.outcomes[*q] == Some(1))
                        .fold(DyadicTurns::new(0, 0), |acc, (_, a)| acc.add(*a));
                    if total.numerator != 0 {
                        b.phase_on_one(*target, None, total.radians());
                    }
                }
            }
            Gate::Measure(q) => {
                branches = branches
                    .into_iter()
                    .flat_map(|b| b.split(*q))
                    .filter(|b| b.weight_check > PRUNE)
                    .collect();
            }
        }
    }
    let mut probs = vec![0.0; 1 << n];
    for b in branches {
        let index = b
            .outcomes
            .iter()
            .enumerate()
            .fold(0usize, |acc, (q, bit)| acc | ((bit.unwrap_or(0) as usize) << (n - 1 - q)));
        probs[index] += b.weight_check;
    }
    OutcomeDistribution::new(n, probs)
}

/// Norm of the statevector after applying only the unitary gates of `circuit`.
pub fn unitary_norm(circuit: &CircuitSpec, input: &[Complex64]) -> Result<f64> {
    let mut b = Branch {
        weight_check: 1.0,
        outcomes: vec![None; circuit.n],
        live: (0..circuit.n).collect(),
        amps: input.to_vec(),
    };
    if input.len() != 1 << circuit.n {
        return Err(Error::DimensionMismatch { expected: 1 << circuit.n, actual: input.len() });
    }
    for gate in &circuit.gates {
        match gate {
            Gate::Hadamard(q) => b.hadamard(*q),
            Gate::ControlledPhase { control, target, angle } => b.phase_on_one(*target, Some(*control), angle.radians()),
            Gate::ClassicalPhase { .. } | Gate::Measure(_) => {}
        }
    }
    Ok(b.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt())
}
