//! Binary phase words and exact binary-fraction angles.
//!
//! Angles are measured in turns (1 turn = 2π rad) and stored as exact
//! binary fractions so that truncation never suffers float drift. Radians
//! only appear when an angle is applied to a qubit.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest supported phase word length.
pub const MAX_BITS: usize = 4096;

/// Bits beyond this depth are below f64 resolution relative to the leading term.
const F64_DEPTH: usize = 64;

/// Value of `Σ bits[i]·2^{-(i+1)}` in f64, reading at most [`F64_DEPTH`] bits.
pub(crate) fn fraction_value(bits: &[u8]) -> f64 {
    let mut scale = 0.5;
    let mut acc = 0.0;
    for &b in bits.iter().take(F64_DEPTH) {
        if b != 0 {
            acc += scale;
        }
        scale *= 0.5;
    }
    acc
}

/// The n-bit binary fraction `0.φ₁φ₂…φₙ` being estimated.
///
/// `bits()[0]` is φ₁, the most significant fractional bit.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PhaseWord {
    bits: Vec<u8>,
}

impl PhaseWord {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidPhaseWord("word must have at least one bit".into()));
        }
        if bits.len() > MAX_BITS {
            return Err(Error::InvalidPhaseWord(format!(
                "{} bits exceeds the limit of {MAX_BITS}",
                bits.len()
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidPhaseWord(format!("bit {pos} is {}", bits[pos])));
        }
        Ok(Self { bits })
    }

    /// Parses a string of `0`/`1` characters, MSB first.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidPhaseWord(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    /// Word with bits taken from the low `n` bits of `index`, so that
    /// `value() == index / 2^n`.
    pub fn from_index(index: u64, n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::InvalidPhaseWord(format!("from_index supports 1..=64 bits, got {n}")));
        }
        Self::new((0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.random_range(0..=1u8)).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// φᵢ with 1-based `i`.
    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i - 1]
    }

    /// Σ φₖ 2^{-k}.
    pub fn value(&self) -> f64 {
        fraction_value(&self.bits)
    }

    /// The trailing fraction `0.φ_{n-k+1}…φ_n` seen by the control qubit at step `k`.
    pub fn suffix_fraction(&self, k: usize) -> f64 {
        let n = self.bits.len();
        fraction_value(&self.bits[n - k..])
    }

    /// Reading as an integer `Σ φᵢ 2^{n-i}`; only for n ≤ 64.
    pub fn index(&self) -> Option<u64> {
        (self.bits.len() <= 64).then(|| self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }
}

impl fmt::Display for PhaseWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for PhaseWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseWord(0.{self})")
    }
}

/// An exact non-negative binary fraction `Σ bits[i]·2^{-(i+1)}` in turns.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BinaryFraction {
    bits: Vec<u8>,
}

impl BinaryFraction {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Caller guarantees every element is 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn turns(&self) -> f64 {
        fraction_value(&self.bits)
    }

    pub fn radians(&self) -> f64 {
        TAU * self.turns()
    }

    /// Keeps the `m` most significant fractional bits.
    pub fn truncated(&self, m: usize) -> Self {
        Self { bits: self.bits[..m.min(self.bits.len())].to_vec() }
    }

    /// Value (turns) of the bits beyond position `m`.
    pub fn tail_turns(&self, m: usize) -> f64 {
        if m >= self.bits.len() {
            return 0.0;
        }
        fraction_value(&self.bits[m..]) * 0.5f64.powi(m as i32)
    }

    /// Number of fractional bits up to and including the last 1.
    pub fn significant_bits(&self) -> usize {
        self.bits.iter().rposition(|&b| b == 1).map_or(0, |p| p + 1)
    }

    /// `(numerator, log2 denominator)` with the fraction in lowest terms,
    /// when it fits in 127 bits.
    pub fn as_ratio(&self) -> Option<(u128, u32)> {
        let len = self.significant_bits();
        if len > 127 {
            return None;
        }
        let num = self.bits[..len].iter().fold(0u128, |acc, &b| (acc << 1) | b as u128);
        Some((num, len as u32))
    }
}
