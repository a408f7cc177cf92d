//! Mode dispatch and parallel trial execution.
//!
//! Trial `t` draws from `ChaCha20Rng::seed_from_u64(master_seed)` switched to
//! stream `t`, so a trial's random numbers never depend on scheduling. Results
//! are collected in trial order.

use std::time::{Duration, Instant};

use mqft_core::fringe::{fit_fringe, fringe_scan, linspace, FringeFit, FringeScan};
use mqft_core::noise::{phase_error_census, PhaseErrorCensus};
use mqft_core::oracle::{
    build_qft_circuit, build_semiclassical_circuit, outcome_distribution, phase_input_state, total_variation,
    OutcomeDistribution,
};
use mqft_core::serial::exact_serial_distribution;
use mqft_core::stats::{
    estimate_error_rate, geometric_goodness_of_fit, majority_vote_error, p_max_bound, p_min_bound,
    BoundsConvention, ErrorRateEstimate, GoodnessOfFit, MajoritySpec,
};
use mqft_core::{run_serial_mqft, Error, PhaseWord, TrialRecord, TrialStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::config::{read_phase_words, ExperimentConfig, Mode, PhaseSource};
use crate::error::{CliError, Result};

/// Largest n for which every representable phase is checked against the oracle.
pub const ORACLE_EXHAUSTIVE_MAX: usize = 10;

/// Random stream of trial `index`.
pub fn trial_rng(master_seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialRecord),
    /// The detector stayed silent for `retry_cap` pulses at `step`.
    Aborted { step: usize, pulses: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub index: usize,
    pub input: PhaseWord,
    pub outcome: TrialOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub n_qubits: usize,
    pub rows: Vec<TrialRow>,
    /// Completed trials only; `None` when every trial aborted.
    pub stats: Option<TrialStats>,
    pub aborted: usize,
    pub estimate: Option<ErrorRateEstimate>,
    pub p_max: Option<f64>,
    pub p_min: Option<f64>,
    pub goodness: Option<GoodnessOfFit>,
    /// `(lower edge, count)` of successfully transformed bits.
    pub histogram: Vec<(usize, usize)>,
    /// Per-qubit error after voting, when `p_override` fixes the raw rate.
    pub predicted_p: Option<f64>,
}

impl TrialSummary {
    pub fn completed(&self) -> usize {
        self.rows.len() - self.aborted
    }

    pub fn full_successes(&self) -> usize {
        self.stats.as_ref().map_or(0, TrialStats::full_successes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusSummary {
    pub census: PhaseErrorCensus,
    /// `(lower edge, upper edge, count)` of `|cos δ|`.
    pub bins: Vec<(f64, f64, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub n: usize,
    pub phases: usize,
    /// Worst total variation between the controlled-phase circuit and the
    /// classically controlled one.
    pub max_tv_semiclassical: f64,
    /// Worst total variation between the controlled-phase circuit and the
    /// serial pipeline.
    pub max_tv_serial: f64,
    /// Smallest probability of reading a representable phase exactly; `None`
    /// when representable phases were not enumerated.
    pub min_exact_recovery: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModeResult {
    Trials(TrialSummary),
    Fringe { scan: FringeScan, fit: FringeFit },
    Census(CensusSummary),
    Oracle(OracleReport),
    Bounds { p_max: f64, p_min: Option<f64> },
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub result: ModeResult,
    pub wall_time: Duration,
}

impl RunSummary {
    /// Fails when more trials aborted than `max_abort_fraction` allows.
    pub fn check_aborts(&self) -> Result<()> {
        if let ModeResult::Trials(t) = &self.result {
            let limit = self.config.max_abort_fraction;
            if t.aborted as f64 > limit * t.rows.len() as f64 {
                return Err(CliError::AbortLimit { aborted: t.aborted, trials: t.rows.len(), limit });
            }
        }
        Ok(())
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config("workers", e.to_string()))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let start = Instant::now();
    let pool = thread_pool(config.workers)?;
    let result = pool.install(|| match config.mode {
        Mode::Ideal | Mode::Noisy | Mode::Majority => run_trials(config).map(ModeResult::Trials),
        Mode::Fringe => run_fringe(config),
        Mode::Census => run_census(config).map(ModeResult::Census),
        Mode::OracleCheck => {
            let n = config.n_qubits.expect("validated");
            oracle_check(n, config.n_trials, config.master_seed.unwrap_or(0)).map(ModeResult::Oracle)
        }
        Mode::Bounds => {
            let b = &config.bounds;
            let p_max = p_max_bound(b.k_max, b.n_max, b.trials, config.alpha)?;
            let p_min = b
                .min_side
                .map(|(k, n)| p_min_bound(k, n, b.trials, config.alpha, config.convention))
                .transpose()?;
            Ok(ModeResult::Bounds { p_max, p_min })
        }
    })?;
    Ok(RunSummary { config: config.clone(), result, wall_time: start.elapsed() })
}

/// Phase word for each trial index, drawing random words from the trial streams.
fn trial_words(config: &ExperimentConfig) -> Result<(usize, Vec<PhaseWord>)> {
    let seed = config.master_seed.unwrap_or(0);
    let trials = config.n_trials;
    let fixed = match &config.phase_word {
        PhaseSource::Random => {
            let n = config.n_qubits.expect("validated");
            let words = (0..trials)
                .into_par_iter()
                .map(|t| PhaseWord::random(n, &mut trial_rng(seed, t)))
                .collect::<mqft_core::Result<Vec<_>>>()?;
            return Ok((n, words));
        }
        PhaseSource::Bits(w) => vec![w.clone()],
        PhaseSource::File(path) => read_phase_words(path)?,
    };
    let n = fixed[0].len();
    if let Some(bad) = fixed.iter().find(|w| w.len() != n) {
        return Err(CliError::config("phase_word", format!("words of lengths {n} and {} mixed", bad.len())));
    }
    if config.n_qubits.is_some_and(|m| m != n) {
        return Err(CliError::config("n_qubits", format!("phase words have {n} bits")));
    }
    let words = match fixed.len() {
        1 => vec![fixed[0].clone(); trials],
        len if len == trials => fixed,
        len => return Err(CliError::config("phase_word", format!("file has {len} words for {trials} trials"))),
    };
    Ok((n, words))
}

fn run_trials(config: &ExperimentConfig) -> Result<TrialSummary> {
    let seed = config.master_seed.unwrap_or(0);
    let noise = if config.mode == Mode::Ideal { mqft_core::NoiseParams::ideal() } else { config.noise.clone() };
    let (n, words) = trial_words(config)?;

    let rows = words
        .into_par_iter()
        .enumerate()
        .map(|(index, input)| {
            let mut rng = trial_rng(seed, index);
            if config.phase_word == PhaseSource::Random {
                // Replay the word draw so the pipeline continues the same stream.
                PhaseWord::random(n, &mut rng)?;
            }
            let outcome = match run_serial_mqft(&input, &noise, &mut rng) {
                Ok(record) => TrialOutcome::Completed(record),
                Err(Error::RetryCapExceeded { step, pulses }) => TrialOutcome::Aborted { step, pulses },
                Err(e) => return Err(e),
            };
            Ok(TrialRow { index, input, outcome })
        })
        .collect::<mqft_core::Result<Vec<_>>>()?;

    let completed: Vec<&TrialRecord> = rows
        .iter()
        .filter_map(|r| match &r.outcome {
            TrialOutcome::Completed(rec) => Some(rec),
            TrialOutcome::Aborted { .. } => None,
        })
        .collect();
    let aborted = rows.len() - completed.len();
    let stats = (!completed.is_empty()).then(|| TrialStats::from_records(completed, n)).transpose()?;

    let mut summary = TrialSummary {
        n_qubits: n,
        rows,
        stats: None,
        aborted,
        estimate: None,
        p_max: None,
        p_min: None,
        goodness: None,
        histogram: Vec::new(),
        predicted_p: noise
            .p_override
            .map(|p| majority_vote_error(MajoritySpec { repeats: noise.repeats, p }))
            .transpose()?,
    };
    let Some(stats) = stats else {
        return Ok(summary);
    };
    let estimate = estimate_error_rate(&stats)?;
    let (k_max, n_max, lowest) = stats.extremes().expect("non-empty");
    if k_max > 0 {
        summary.p_max = Some(p_max_bound(k_max, n_max, stats.trials(), config.alpha)?);
    }
    if let Some((k_min, n_min)) = lowest {
        summary.p_min = Some(p_min_bound(k_min, n_min, stats.trials(), config.alpha, config.convention)?);
    }
    if !estimate.all_censored && config.mode != Mode::Ideal {
        summary.goodness = geometric_goodness_of_fit(&stats, estimate.censored_mle, 5.0, 1).ok();
    }
    summary.histogram = success_histogram(&stats, config.histogram_bins);
    summary.estimate = Some(estimate);
    summary.stats = Some(stats);
    Ok(summary)
}

/// Counts of successfully transformed bits in equal integer bins over `0..=n`.
pub fn success_histogram(stats: &TrialStats, bins: usize) -> Vec<(usize, usize)> {
    let values = stats.n_qubits() + 1;
    let width = values.div_ceil(bins.min(values));
    let mut counts = vec![0usize; values.div_ceil(width)];
    for b in stats.successful_bits() {
        counts[b / width] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (i * width, c)).collect()
}

fn run_fringe(config: &ExperimentConfig) -> Result<ModeResult> {
    let f = &config.fringe;
    let mut rng = trial_rng(config.master_seed.unwrap_or(0), 0);
    let volts = linspace(f.v_min, f.v_max, f.points);
    let scan = fringe_scan(config.noise.visibility, config.noise.v_pi, f.phase_offset, &volts, f.pulses_per_point, &mut rng)?;
    let fit = fit_fringe(&scan)?;
    Ok(ModeResult::Fringe { scan, fit })
}

fn run_census(config: &ExperimentConfig) -> Result<CensusSummary> {
    let (_, words) = trial_words(config)?;
    let noise = &config.noise;
    let census = phase_error_census(&words, noise.truncation, noise.v_pi, noise.dac_digits)?;
    let c = &config.census;
    let width = (c.hi - c.lo) / c.bins as f64;
    let bins = census
        .histogram(c.lo, c.hi, c.bins)
        .into_iter()
        .enumerate()
        .map(|(i, count)| (c.lo + i as f64 * width, c.lo + (i + 1) as f64 * width, count))
        .collect();
    Ok(CensusSummary { census, bins })
}

/// Compares the controlled-phase circuit, the classically controlled circuit
/// and the serial pipeline on n qubits. Every representable phase is checked
/// when n ≤ [`ORACLE_EXHAUSTIVE_MAX`], plus `random_phases` uniform phases
/// drawn from the streams of `seed`.
pub fn oracle_check(n: usize, random_phases: usize, seed: u64) -> Result<OracleReport> {
    let qft = build_qft_circuit(n)?;
    let semi = build_semiclassical_circuit(n)?;
    let exhaustive = n <= ORACLE_EXHAUSTIVE_MAX;
    let representable = if exhaustive { 1usize << n } else { 0 };
    let phases: Vec<(f64, Option<usize>)> = (0..representable)
        .map(|r| (r as f64 / (1u64 << n) as f64, Some(r)))
        .chain((0..random_phases).map(|t| (trial_rng(seed, t).random::<f64>(), None)))
        .collect();

    let per_phase = phases
        .par_iter()
        .map(|&(phase, exact)| -> Result<(f64, f64, f64)> {
            let input = phase_input_state(n, phase)?;
            let a = outcome_distribution(&qft, &input)?;
            let b = outcome_distribution(&semi, &input)?;
            let c = OutcomeDistribution::new(n, exact_serial_distribution(phase, n, 1.0, None)?)?;
            let recovery = exact.map_or(1.0, |r| a.probability(r));
            Ok((total_variation(&a, &b)?, total_variation(&a, &c)?, recovery))
        })
        .collect::<Result<Vec<_>>>()?;

    let max = |f: fn(&(f64, f64, f64)) -> f64| per_phase.iter().map(f).fold(0.0, f64::max);
    Ok(OracleReport {
        n,
        phases: phases.len(),
        max_tv_semiclassical: max(|x| x.0),
        max_tv_serial: max(|x| x.1),
        min_exact_recovery: exhaustive.then(|| per_phase.iter().map(|x| x.2).fold(1.0, f64::min)),
    })
}

/// Confidence range for the `bounds` subcommand.
pub fn bounds(
    k_max: usize,
    n_max: usize,
    min_side: Option<(usize, usize)>,
    trials: usize,
    alpha: f64,
    convention: BoundsConvention,
) -> Result<(Option<f64>, f64)> {
    let p_max = p_max_bound(k_max, n_max, trials, alpha)?;
    let p_min = min_side.map(|(k, n)| p_min_bound(k, n, trials, alpha, convention)).transpose()?;
    Ok((p_min, p_max))
}
