//! Interference fringe of the rotation gate: simulated voltage scans and the
//! cosine fit that recovers visibility and V_π from them.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{check_probability, Error, Result};

/// Photon counts recorded at each drive voltage.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeScan {
    pub voltages: Vec<f64>,
    pub counts: Vec<u64>,
    pub pulses_per_point: u64,
}

impl FringeScan {
    pub fn fractions(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.pulses_per_point as f64).collect()
    }
}

/// Expected fraction of counts in the monitored port at drive `volts`.
pub fn fringe_fraction(visibility: f64, v_pi: f64, phase_offset: f64, volts: f64) -> f64 {
    0.5 * (1.0 + visibility * (PI * volts / v_pi + phase_offset).cos())
}

/// `n` evenly spaced voltages over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Draws binomial counts at each voltage.
pub fn fringe_scan<R: Rng + ?Sized>(
    visibility: f64,
    v_pi: f64,
    phase_offset: f64,
    voltages: &[f64],
    pulses_per_point: u64,
    rng: &mut R,
) -> Result<FringeScan> {
    check_probability("visibility", visibility)?;
    if pulses_per_point < 1 {
        return Err(Error::InvalidParameter { name: "pulses_per_point", reason: "must be ≥ 1".into() });
    }
    if !(v_pi > 0.0) {
        return Err(Error::InvalidParameter { name: "v_pi", reason: format!("{v_pi} must be > 0") });
    }
    let counts = voltages
        .iter()
        .map(|&volts| {
            let p = fringe_fraction(visibility, v_pi, phase_offset, volts).clamp(0.0, 1.0);
            Binomial::new(pulses_per_point, p).expect("valid binomial").sample(rng)
        })
        .collect();
    Ok(FringeScan { voltages: voltages.to_vec(), counts, pulses_per_point })
}

/// Least-squares fit of `A + B·cos(πV/V_π + offset)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeFit {
    pub visibility: f64,
    pub v_pi: f64,
    /// Phase offset in (−π, π].
    pub phase_offset: f64,
    pub mean: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the count fractions.
    pub residual: f64,
}

/// Linear part of the model at fixed angular frequency: A + C cos ωV + S sin ωV.
fn linear_fit(volts: &[f64], y: &[f64], omega: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&v, &yi) in volts.iter().zip(y) {
        let row = Vector3::new(1.0, (omega * v).cos(), (omega * v).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata.lu().solve(&aty)?;
    Some((coef, sse(volts, y, omega, &coef)))
}

fn sse(volts: &[f64], y: &[f64], omega: f64, coef: &Vector3<f64>) -> f64 {
    volts
        .iter()
        .zip(y)
        .map(|(&v, &yi)| {
            let r = yi - coef[0] - coef[1] * (omega * v).cos() - coef[2] * (omega * v).sin();
            r * r
        })
        .sum()
}

fn profile(volts: &[f64], y: &[f64], omega: f64) -> f64 {
    linear_fit(volts, y, omega).map_or(f64::INFINITY, |(_, s)| s)
}

/// Fits a scan of at least 8 points spanning at least one fringe period.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    let volts = &scan.voltages;
    if volts.len() != scan.counts.len() {
        return Err(Error::DimensionMismatch { expected: volts.len(), actual: scan.counts.len() });
    }
    if volts.len() < 8 {
        return Err(Error::FitFailed(format!("need at least 8 scan points, got {}", volts.len())));
    }
    let y = scan.fractions();
    let mut sorted = volts.clone();
    sorted.sort_by(f64::total_cmp);
    let span = sorted[sorted.len() - 1] - sorted[0];
    let max_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if !(span > 0.0 && max_gap > 0.0) {
        return Err(Error::FitFailed("scan voltages must be distinct".into()));
    }

    // Search periods from twice the span down to two samples per period;
    // fits longer than the span are rejected below.
    let omega_lo = PI / span;
    let omega_hi = (PI / max_gap).max(omega_lo * 1.5);
    const GRID: usize = 2000;
    let step = (omega_hi - omega_lo) / GRID as f64;
    let best = (0..=GRID)
        .map(|i| omega_lo + step * i as f64)
        .map(|w| (w, profile(volts, &y, w)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");

    // Golden-section refinement inside the neighbouring grid cells.
    let (mut a, mut b) = ((best.0 - step).max(omega_lo * 0.5), best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (profile(volts, &y, c), profile(volts, &y, d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = profile(volts, &y, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = profile(volts, &y, d);
        }
    }
    let mut omega = 0.5 * (a + b);
    let (lin, _) = linear_fit(volts, &y, omega).ok_or_else(|| Error::FitFailed("singular normal equations".into()))?;
    let mut params = Vector4::new(lin[0], lin[1], lin[2], omega);

    // Gauss-Newton polish of all four parameters.
    let mut current = sse(volts, &y, omega, &lin);
    for _ in 0..50 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&v, &yi) in volts.iter().zip(&y) {
            let (s, c) = (params[3] * v).sin_cos();
            let model = params[0] + params[1] * c + params[2] * s;
            let j = Vector4::new(1.0, c, s, v * (params[2] * c - params[1] * s));
            jtj += j * j.transpose();
            jtr += j * (yi - model);
        }
        let Some(delta) = jtj.lu().solve(&jtr) else { break };
        let trial = params + delta;
        let trial_sse = sse(volts, &y, trial[3], &Vector3::new(trial[0], trial[1], trial[2]));
        if !trial_sse.is_finite() || trial_sse > current {
            break;
        }
        let done = delta.norm() <= 1e-15 * params.norm();
        params = trial;
        current = trial_sse;
        if done {
            break;
        }
    }
    omega = params[3];

    let mean = params[0];
    let amplitude = params[1].hypot(params[2]);
    let fit = FringeFit {
        visibility: amplitude / mean,
        v_pi: PI / omega,
        phase_offset: (-params[2]).atan2(params[1]),
        mean,
        amplitude,
        residual: (current / y.len() as f64).sqrt(),
    };
    if !(fit.visibility.is_finite() && fit.v_pi.is_finite() && mean > 0.0) {
        return Err(Error::FitFailed(format!("degenerate parameters {fit:?}")));
    }
    if 2.0 * fit.v_pi > span * (1.0 + 1e-9) {
        return Err(Error::FitFailed(format!(
            "fitted period {} exceeds scan span {span}",
            2.0 * fit.v_pi
        )));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn noiseless(v: f64, v_pi: f64, offset: f64, volts: &[f64]) -> FringeScan {
        let pulses = 1u64 << 40;
        let counts = volts
            .iter()
            .map(|&x| (fringe_fraction(v, v_pi, offset, x) * pulses as f64).round() as u64)
            .collect();
        FringeScan { voltages: volts.to_vec(), counts, pulses_per_point: pulses }
    }

    #[test]
    fn fraction_examples() {
        assert_eq!(fringe_fraction(1.0, 5.8, 0.0, 0.0), 1.0);
        assert!((fringe_fraction(0.98, 5.8, 0.0, 5.8) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let volts = linspace(0.0, 12.0, 49);
        for &(v, v_pi, off) in &[(0.98, 5.80, 0.0), (0.9, 4.0, 0.7), (0.5, 2.5, -2.0)] {
            let fit = fit_fringe(&noiseless(v, v_pi, off, &volts)).unwrap();
            assert!((fit.visibility - v).abs() < 1e-6, "{fit:?}");
            assert!((fit.v_pi - v_pi).abs() < 1e-6, "{fit:?}");
            assert!(fit.residual < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let volts = linspace(0.0, 12.0, 61);
        let scan = fringe_scan(0.98, 5.80, 0.0, &volts, 100_000, &mut rng).unwrap();
        let fit = fit_fringe(&scan).unwrap();
        assert!((fit.visibility - 0.98).abs() < 0.01 * 0.98);
        assert!((fit.v_pi - 5.80).abs() < 0.01 * 5.80);
    }

    #[test]
    fn rejects_short_scans() {
        let scan = noiseless(0.98, 5.8, 0.0, &linspace(0.0, 12.0, 7));
        assert!(matches!(fit_fringe(&scan), Err(Error::FitFailed(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(fringe_scan(0.9, 5.8, 0.0, &[0.0], 0, &mut rng).is_err());
    }

    #[test]
    fn rejects_less_than_a_period() {
        let scan = noiseless(0.98, 5.8, 0.3, &linspace(0.0, 4.0, 30));
        assert!(fit_fringe(&scan).is_err());
    }
}
