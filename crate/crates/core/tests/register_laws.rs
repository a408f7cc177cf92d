use std::collections::HashMap;

use mqft_core::oracle::{build_qft_circuit, outcome_distribution, phase_input_state};
use mqft_core::{PhaseWord, TargetRegister};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_coeffs(r: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..r).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    raw.iter().map(|z| z / norm).collect()
}

/// Register whose first-step branches have weight `w0` and `1 − w0`, with
/// several eigenstates per branch and random relative phases.
fn register_with_w0(w0: f64, n: usize, rng: &mut impl Rng) -> TargetRegister {
    let per_branch = 3;
    let mut words = Vec::new();
    let mut coeffs = Vec::new();
    for (bit, weight) in [(0u8, w0), (1u8, 1.0 - w0)] {
        let parts: Vec<f64> = (0..per_branch).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = parts.iter().sum();
        for part in parts {
            let mut bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
            bits[n - 1] = bit;
            words.push(PhaseWord::new(bits).unwrap());
            coeffs.push(Complex64::from_polar((weight * part / total).sqrt(), rng.random::<f64>() * 6.0));
        }
    }
    TargetRegister::new(words, coeffs).unwrap()
}

#[test]
fn branch_weights_match_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let words: Vec<_> = (0..8).map(|_| PhaseWord::random(4, &mut rng).unwrap()).collect();
        let coeffs = random_coeffs(8, &mut rng);
        let reg = TargetRegister::new(words.clone(), coeffs.clone()).unwrap();
        let psi = DVector::from_vec(coeffs);
        let projector = DMatrix::from_fn(8, 8, |s, t| {
            if s == t && words[s].bit(4) == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let expect = (psi.adjoint() * &projector * &psi)[(0, 0)].re;
        let split = reg.branch_split(&[]).unwrap();
        assert!((split.w0 - expect).abs() < 1e-12);
        assert!((split.w0 + split.w1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn collapse_matches_two_branch_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let w0 = rng.random::<f64>();
        let v = rng.random::<f64>();
        let delta = (rng.random::<f64>() - 0.5) * 1.0;
        let mut reg = register_with_w0(w0, 4, &mut rng);
        let r = reg.eigenphases().len();
        let c = reg.coeffs().to_vec();

        // |u₀ˢ⟩, |u₁ˢ⟩ unnormalized so their squared norms sum to one.
        let branch = |b: u8| DVector::from_fn(r, |s, _| if reg.eigenphases()[s].bit(4) == b { c[s] } else { Complex64::new(0.0, 0.0) });
        let (u0, u1) = (branch(0), branch(1));
        let e = Complex64::from_polar(1.0, delta);
        let plus = (Complex64::new(1.0, 0.0) + e) * 0.5;
        let minus = (Complex64::new(1.0, 0.0) - e) * 0.5;
        let t0 = &u0 * plus + &u1 * minus;
        let t1 = &u0 * minus + &u1 * plus;
        let w = u0.norm_squared();
        let p0 = 0.5 * (1.0 + (2.0 * w - 1.0) * v * delta.cos());
        let rho = (&t0 * t0.adjoint() * Complex64::new((1.0 + v) / 2.0, 0.0)
            + &t1 * t1.adjoint() * Complex64::new((1.0 - v) / 2.0, 0.0))
            / Complex64::new(p0, 0.0);

        assert!((reg.outcome_probability(&[], v, delta).unwrap() - p0).abs() < 1e-12);
        let p = reg.collapse_to(&[], v, delta, 0).unwrap();
        assert!((p - p0).abs() < 1e-12);
        assert!((reg.rho() - &rho).camax() < 1e-12);
        reg.check_state(1e-12).unwrap();
    }
}

#[test]
fn repeated_measurement_error_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let w0 = rng.random::<f64>();
        let v = rng.random::<f64>();
        let delta = (rng.random::<f64>() - 0.5) * 0.8;
        let mut reg = register_with_w0(w0, 5, &mut rng);
        let outcome = rng.random_range(0..=1u8);
        reg.collapse_to(&[], v, delta, outcome).unwrap();
        let expected = 0.5 * (1.0 - v * delta.cos());
        let err = reg.error_probability(&[], v, delta).unwrap();
        assert!((err - expected).abs() < 1e-12, "{err} vs {expected}");
    }
}

#[test]
fn outcome_frequencies_follow_p0() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..4 {
        let w0 = rng.random::<f64>();
        let v = rng.random::<f64>();
        let delta = rng.random::<f64>() - 0.5;
        let reg = register_with_w0(w0, 3, &mut rng);
        let p0 = 0.5 * (1.0 + (2.0 * w0 - 1.0) * v * delta.cos());
        let reps = 100_000;
        let zeros = (0..reps)
            .filter(|_| reg.clone().measure_control_collapse(&[], v, delta, &mut rng).unwrap().bit == 0)
            .count();
        let se = (p0 * (1.0 - p0) / reps as f64).sqrt();
        assert!((zeros as f64 / reps as f64 - p0).abs() < 4.0 * se);
    }
}

fn enumerate(reg: &TargetRegister, n: usize, measured: &mut Vec<u8>, weight: f64, out: &mut HashMap<Vec<u8>, f64>) {
    let k = measured.len() + 1;
    if k > n {
        let mut reading = measured.clone();
        reading.reverse();
        *out.entry(reading).or_default() += weight;
        return;
    }
    let accepted: Vec<u8> = measured.iter().rev().copied().collect();
    for bit in 0..=1u8 {
        let mut next = reg.clone();
        if let Ok(p) = next.collapse_to(&accepted, 1.0, 0.0, bit) {
            if p > 1e-13 {
                measured.push(bit);
                enumerate(&next, n, measured, weight * p, out);
                measured.pop();
            }
        }
    }
}

#[test]
fn full_trajectory_selects_eigenphase_by_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for r in 1..=8usize {
        for n in 1..=6usize {
            let words: Vec<_> = (0..r).map(|_| PhaseWord::random(n, &mut rng).unwrap()).collect();
            let coeffs = random_coeffs(r, &mut rng);
            let reg = TargetRegister::new(words.clone(), coeffs.clone()).unwrap();
            let mut dist = HashMap::new();
            enumerate(&reg, n, &mut Vec::new(), 1.0, &mut dist);

            // Brute force: eigenstates are orthogonal, so the reading distribution
            // is the |c_s|²-mixture of each eigenstate's exact statevector outcome.
            let circuit = build_qft_circuit(n).unwrap();
            let mut brute = vec![0.0; 1 << n];
            for (word, c) in words.iter().zip(&coeffs) {
                let d = outcome_distribution(&circuit, &phase_input_state(n, word.value()).unwrap()).unwrap();
                for (b, p) in brute.iter_mut().zip(&d.probs) {
                    *b += c.norm_sqr() * p;
                }
            }
            for (idx, &expect) in brute.iter().enumerate() {
                let key = PhaseWord::from_index(idx as u64, n).unwrap().bits().to_vec();
                let got = dist.get(&key).copied().unwrap_or(0.0);
                assert!((got - expect).abs() < 1e-12, "r={r} n={n} idx={idx}: {got} vs {expect}");
            }
        }
    }
}

#[test]
fn majority_over_superposition_reduces_errors() {
    // Two eigenstates, one per branch: repeating and voting lands on the
    // branch the register collapses into with the binomial majority error.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let words = vec![PhaseWord::parse("0").unwrap(), PhaseWord::parse("1").unwrap()];
    let (v, delta, m) = (0.8, 0.0, 5);
    let p = 0.5 * (1.0 - v * f64::cos(delta));
    let trials = 40_000;
    let mut wrong = 0usize;
    for _ in 0..trials {
        let mut reg = TargetRegister::new(words.clone(), vec![Complex64::new(h, 0.0); 2]).unwrap();
        let bits = reg.repeat_measurements(&[], v, m, |_| delta, &mut rng).unwrap();
        let vote = u8::from(bits.iter().map(|&b| b as usize).sum::<usize>() * 2 > m);
        // The register settles into one branch; sample it from the final ρ.
        let w = reg.eigenstate_weights();
        let branch = u8::from(rng.random::<f64>() >= w[0]);
        wrong += usize::from(vote != branch);
    }
    let expected = mqft_core::stats::majority_vote_error(mqft_core::stats::MajoritySpec { repeats: m, p }).unwrap();
    // The final branch is itself uncertain after finitely many measurements, so
    // compare against the majority error within a loose band.
    let rate = wrong as f64 / trials as f64;
    assert!(rate < p, "voting must beat a single measurement: {rate} vs {p}");
    assert!((rate - expected).abs() < 0.03, "{rate} vs {expected}");
}
