//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run alone with `cargo test -p mqft-cli --test acceptance`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mqft_cli::experiment::{oracle_check, ModeResult};
use mqft_cli::{emit_records, run_experiment, ExperimentConfig};
use mqft_core::noise::analytic_error_probability;
use mqft_core::qubit::rotation_angle;
use mqft_core::stats::{majority_vote_error, p_max_bound, MajoritySpec};
use mqft_core::{run_serial_mqft, NoiseParams, PhaseWord, TargetRegister};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).expect("acceptance config parses")
}

fn trials_of(text: &str) -> mqft_cli::experiment::TrialSummary {
    match run_experiment(&config(text)).expect("run succeeds").result {
        ModeResult::Trials(t) => t,
        _ => unreachable!(),
    }
}

fn c1_noiseless() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let noise = NoiseParams::ideal();
    let mut wrong = 0;
    for n in [255, 1024, 4096] {
        for _ in 0..100 {
            let word = PhaseWord::random(n, &mut rng).unwrap();
            let rec = run_serial_mqft(&word, &noise, &mut rng).unwrap();
            wrong += usize::from(rec.output != word || !rec.censored);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(wrong == 0 && secs < 5.0, format!("300 words, {wrong} wrong, {secs:.2} s (limit 5 s)"))
}

fn c2_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut recovery: f64 = 1.0;
    for n in 1..=8 {
        let r = oracle_check(n, 20, 2).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_tv_semiclassical).max(r.max_tv_serial);
        recovery = recovery.min(r.min_exact_recovery.unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && (recovery - 1.0).abs() < 1e-9 && secs < 60.0,
        format!("max TV {worst:.2e} (limit 1e-9), min exact recovery {recovery:.12}, {secs:.2} s (limit 60 s)"),
    )
}

fn c3_closed_form() -> Outcome {
    let a = analytic_error_probability(0.99, 0.9936);
    let b = analytic_error_probability(0.99, 0.98);
    // One-qubit words: no feedback, so every measurement sees exactly δ.
    let delta = 0.9936f64.acos();
    let noise = NoiseParams { visibility: 0.99, extra_delta: delta, ..NoiseParams::ideal() };
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let reps = 1_000_000;
    let mut flips = 0usize;
    for _ in 0..reps {
        let word = PhaseWord::new(vec![rng.random_range(0..=1u8)]).unwrap();
        flips += run_serial_mqft(&word, &noise, &mut rng).unwrap().errors;
    }
    let rate = flips as f64 / reps as f64;
    let se = (a * (1.0 - a) / reps as f64).sqrt();
    check(
        (a - 8.2e-3).abs() <= 0.05e-3 && (b - 1.5e-2).abs() <= 0.05e-2 && (rate - a).abs() < 4.0 * se,
        format!("p(0.99,0.9936)={a:.4e}, p(0.99,0.98)={b:.4e}, MC {rate:.4e} ({:.2} SE)", (rate - a) / se),
    )
}

fn c4_truncation() -> Outcome {
    // Step k's angle depends only on the k−1 bits already measured, so
    // enumerating those patterns for k ≤ 16 covers every word with n ≤ 16.
    let mut violations = 0usize;
    let mut min_cos_m5 = f64::INFINITY;
    let mut rotations = 0usize;
    for m in 2..=8 {
        let bound = std::f64::consts::PI / f64::powi(2.0, m as i32 - 1);
        for k in 1..=16usize {
            for pattern in 0u32..1 << (k - 1) {
                let known: Vec<u8> = (0..k - 1).map(|i| ((pattern >> i) & 1) as u8).collect();
                let cmd = rotation_angle(&known, k, Some(m)).unwrap();
                rotations += 1;
                violations += usize::from(cmd.delta.abs() >= bound);
                if m == 5 {
                    min_cos_m5 = min_cos_m5.min(cmd.delta.cos().abs());
                }
            }
        }
    }
    check(
        violations == 0 && min_cos_m5 >= 0.9807,
        format!("{rotations} rotations, {violations} bound violations, min |cos δ| at m=5 = {min_cos_m5:.5}"),
    )
}

fn c5_geometric() -> Outcome {
    let start = Instant::now();
    let t = trials_of("mode = noisy\nn_qubits = 255\nn_trials = 10000\nmaster_seed = 5\np_override = 0.0103\n");
    let secs = start.elapsed().as_secs_f64();
    let p = t.estimate.unwrap().censored_mle;
    let full = t.full_successes() as f64 / t.rows.len() as f64;
    let g = t.goodness.ok_or("no goodness-of-fit result")?;
    check(
        (0.0095..=0.0112).contains(&p) && (0.05..=0.10).contains(&full) && g.p_value > 0.01 && secs < 30.0,
        format!(
            "p_hat {p:.5}, full {full:.4}, chi2 {:.1} on {} dof p={:.3}, {secs:.2} s (limit 30 s)",
            g.chi2, g.dof, g.p_value
        ),
    )
}

fn c6_majority() -> Outcome {
    let p = 0.07;
    let closed = majority_vote_error(MajoritySpec { repeats: 10, p }).unwrap();
    let brute: f64 = (0u32..1 << 10)
        .filter(|mask| 2 * mask.count_ones() >= 10)
        .map(|mask| p.powi(mask.count_ones() as i32) * (1.0 - p).powi(10 - mask.count_ones() as i32))
        .sum();
    let expected = (1.0 - closed).powi(1024);
    let t = trials_of("mode = majority\nn_qubits = 1024\nn_trials = 2000\nmaster_seed = 6\np_override = 0.07\nrepeats = 10\n");
    let full = t.full_successes() as f64 / t.rows.len() as f64;
    check(
        (closed - brute).abs() < 1e-12
            && (closed - 3e-4).abs() < 0.5e-4
            && (closed - 3.1e-4).abs() < 0.05e-4
            && (full - expected).abs() <= 0.04,
        format!("p10 {closed:.4e} (brute {brute:.4e}), full {full:.4} vs analytic {expected:.4}"),
    )
}

fn c7_bounds() -> Outcome {
    let a = p_max_bound(1024, 24, 30, 0.05).unwrap();
    let b = p_max_bound(255, 3, 21, 0.05).unwrap();
    check(
        (3.8e-4..=4.8e-4).contains(&a) && (1.0e-2..=1.4e-2).contains(&b),
        format!("p_max(1024,24,30) {a:.4e}, p_max(255,3,21) {b:.4e}"),
    )
}

fn c8_fringe() -> Outcome {
    let s = run_experiment(&config(
        "mode = fringe\nmaster_seed = 8\nvisibility = 0.98\nv_pi = 5.80\nv_min = 0\nv_max = 12\npulses_per_point = 100000\n",
    ))
    .map_err(|e| e.to_string())?;
    let ModeResult::Fringe { fit, .. } = s.result else { unreachable!() };
    let (ev, epi) = ((fit.visibility - 0.98).abs() / 0.98, (fit.v_pi - 5.80).abs() / 5.80);
    check(
        ev < 0.01 && epi < 0.01,
        format!("v {:.4} ({:.2}%), V_pi {:.4} V ({:.2}%)", fit.visibility, 100.0 * ev, fit.v_pi, 100.0 * epi),
    )
}

fn c9_repetition() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8usize);
        let r = rng.random_range(2..=8usize);
        let mut words: Vec<PhaseWord> = (0..r).map(|_| PhaseWord::random(n, &mut rng).unwrap()).collect();
        // Both branches populated so w0 is strictly inside (0, 1).
        let mut first = words[0].bits().to_vec();
        first[n - 1] = 0;
        words[0] = PhaseWord::new(first).unwrap();
        let mut second = words[1].bits().to_vec();
        second[n - 1] = 1;
        words[1] = PhaseWord::new(second).unwrap();
        let raw: Vec<Complex64> = (0..r).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut reg = TargetRegister::new(words, raw.iter().map(|z| z / norm).collect()).unwrap();
        let v = rng.random::<f64>();
        let delta = (rng.random::<f64>() - 0.5) * std::f64::consts::FRAC_PI_2;
        reg.collapse_to(&[], v, delta, rng.random_range(0..=1u8)).unwrap();
        let err = reg.error_probability(&[], v, delta).unwrap();
        worst = worst.max((err - 0.5 * (1.0 - v * delta.cos())).abs());
    }
    check(worst < 1e-12, format!("100 registers, max deviation {worst:.2e} (limit 1e-12)"))
}

fn files_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let runs = [
        "mode = noisy\npreset = paper\nn_qubits = 255\nn_trials = 40\nmaster_seed = 10\nrecord_bits = true\n",
        "mode = majority\nn_qubits = 512\nn_trials = 40\nmaster_seed = 10\np_override = 0.07\nrepeats = 4\ntie_break = random\n",
        "mode = noisy\nn_qubits = 255\nn_trials = 200\nmaster_seed = 10\np_override = 0.0103\n",
        "mode = fringe\npreset = paper\nmaster_seed = 10\n",
        "mode = census\npreset = paper\nn_qubits = 255\nn_trials = 21\nmaster_seed = 10\n",
        "mode = oracle-check\nn_qubits = 6\nmaster_seed = 10\n",
    ];
    let mut compared = 0;
    for (i, text) in runs.iter().enumerate() {
        let mut reference = None;
        for (j, workers) in [1usize, 4, 1, 3].into_iter().enumerate() {
            let mut cfg = config(text);
            cfg.workers = workers;
            let dir = tmp.path().join(format!("{i}-{j}"));
            let summary = run_experiment(&cfg).map_err(|e| e.to_string())?;
            emit_records(&summary, &dir).map_err(|e| e.to_string())?;
            let files = files_of(&dir);
            match &reference {
                None => reference = Some(files),
                Some(r) if *r == files => compared += files.len(),
                Some(_) => return Err(format!("run {i} differs with {workers} workers")),
            }
        }
    }
    Ok(format!("6 configs × 4 runs (1, 4, 1, 3 workers), {compared} file comparisons byte-identical"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("C1 noiseless correctness", c1_noiseless),
        ("C2 oracle equivalence", c2_oracle),
        ("C3 closed-form error probability", c3_closed_form),
        ("C4 truncation bound", c4_truncation),
        ("C5 geometric run lengths", c5_geometric),
        ("C6 majority voting", c6_majority),
        ("C7 p_max confidence bound", c7_bounds),
        ("C8 fringe fit", c8_fringe),
        ("C9 repetition validity", c9_repetition),
        ("C10 determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
