//! Output files of a run.
//!
//! * `trials.jsonl`: one JSON object per trial, in trial order, with fields
//!   `trial`, `aborted`, `pulses`, and for completed trials `run_length`,
//!   `censored`, `errors`. Aborted trials carry `abort_step`. With
//!   `record_bits = true` every line also has `input` and (when completed)
//!   `output` bit strings.
//! * `histogram.csv`: `bin,count` of successfully transformed bits, where
//!   `bin` is the lower edge of the bin.
//! * `fringe.csv`: `voltage,counts` per scan point.
//! * `census.csv`: `bin_lo,bin_hi,count` of `|cos δ|`.
//! * `summary.txt`: results as `#` comment lines followed by the config echo,
//!   so the file itself is a valid config that reproduces the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::experiment::{ModeResult, RunSummary, TrialOutcome, TrialSummary};
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct TrialLine {
    trial: usize,
    aborted: bool,
    pulses: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    run_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    censored: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abort_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
}

pub fn trials_jsonl(trials: &TrialSummary, record_bits: bool) -> String {
    let mut out = String::new();
    for row in &trials.rows {
        let mut line = TrialLine {
            trial: row.index,
            aborted: false,
            pulses: 0,
            run_length: None,
            censored: None,
            errors: None,
            abort_step: None,
            input: record_bits.then(|| row.input.to_string()),
            output: None,
        };
        match &row.outcome {
            TrialOutcome::Completed(rec) => {
                line.pulses = rec.pulses;
                line.run_length = Some(rec.run_length);
                line.censored = Some(rec.censored);
                line.errors = Some(rec.errors);
                line.output = record_bits.then(|| rec.output.to_string());
            }
            TrialOutcome::Aborted { step, pulses } => {
                line.aborted = true;
                line.pulses = *pulses;
                line.abort_step = Some(*step);
            }
        }
        out.push_str(&serde_json::to_string(&line).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

pub fn histogram_csv(trials: &TrialSummary) -> String {
    let mut out = String::from("bin,count\n");
    for (bin, count) in &trials.histogram {
        let _ = writeln!(out, "{bin},{count}");
    }
    out
}

/// Summary text: `#` result lines, a blank line, then the config echo.
pub fn summary_text(summary: &RunSummary) -> String {
    let mut out = String::new();
    let mut line = |key: &str, value: &dyn std::fmt::Display| {
        let _ = writeln!(out, "# {key}: {value}");
    };
    line("mode", &summary.config.mode);
    match &summary.result {
        ModeResult::Trials(t) => {
            line("n_qubits", &t.n_qubits);
            line("trials", &t.rows.len());
            line("completed", &t.completed());
            line("aborted", &t.aborted);
            line("full_successes", &t.full_successes());
            if let Some(stats) = &t.stats {
                let mean = stats.successful_bits().sum::<usize>() as f64 / stats.trials() as f64;
                line("mean_successful_bits", &mean);
                let mean_run = stats.run_lengths().iter().sum::<usize>() as f64 / stats.trials() as f64;
                line("mean_run_length", &mean_run);
            }
            if let Some(e) = &t.estimate {
                line("p_hat_inverse_mean", &e.inverse_mean);
                line("p_hat_censored_mle", &e.censored_mle);
            }
            if let Some(p) = t.p_max {
                line("p_max", &p);
            }
            if let Some(p) = t.p_min {
                line("p_min", &p);
            }
            line("alpha", &summary.config.alpha);
            if let Some(g) = &t.goodness {
                line("chi2", &g.chi2);
                line("chi2_dof", &g.dof);
                line("chi2_p_value", &g.p_value);
            }
            if let Some(p) = t.predicted_p {
                line("predicted_p", &p);
                line("predicted_full_success", &(1.0 - p).powi(t.n_qubits as i32));
            }
        }
        ModeResult::Fringe { scan, fit } => {
            line("points", &scan.voltages.len());
            line("pulses_per_point", &scan.pulses_per_point);
            line("fit_visibility", &fit.visibility);
            line("fit_v_pi", &fit.v_pi);
            line("fit_phase_offset", &fit.phase_offset);
            line("fit_residual", &fit.residual);
        }
        ModeResult::Census(c) => {
            line("rotations", &c.census.rotations());
            line("mean_abs_cos_delta", &c.census.mean_abs_cos);
            line("min_abs_cos_delta", &c.census.min_abs_cos);
        }
        ModeResult::Oracle(r) => {
            line("n_qubits", &r.n);
            line("phases", &r.phases);
            line("max_tv_semiclassical", &r.max_tv_semiclassical);
            line("max_tv_serial", &r.max_tv_serial);
            if let Some(p) = r.min_exact_recovery {
                line("min_exact_recovery", &p);
            }
        }
        ModeResult::Bounds { p_max, p_min } => {
            line("p_max", p_max);
            if let Some(p) = p_min {
                line("p_min", p);
            }
        }
    }
    out.push('\n');
    out.push_str(&summary.config.echo());
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Writes every file of the run into `dir`, creating it if needed, and
/// returns the paths written.
pub fn emit_records(summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    match &summary.result {
        ModeResult::Trials(t) => {
            written.push(write(dir, "trials.jsonl", &trials_jsonl(t, summary.config.record_bits))?);
            written.push(write(dir, "histogram.csv", &histogram_csv(t))?);
        }
        ModeResult::Fringe { scan, .. } => {
            let mut csv = String::from("voltage,counts\n");
            for (v, c) in scan.voltages.iter().zip(&scan.counts) {
                let _ = writeln!(csv, "{v},{c}");
            }
            written.push(write(dir, "fringe.csv", &csv)?);
        }
        ModeResult::Census(c) => {
            let mut csv = String::from("bin_lo,bin_hi,count\n");
            for (lo, hi, count) in &c.bins {
                let _ = writeln!(csv, "{lo},{hi},{count}");
            }
            written.push(write(dir, "census.csv", &csv)?);
        }
        ModeResult::Oracle(_) | ModeResult::Bounds { .. } => {}
    }
    written.push(write(dir, "summary.txt", &summary_text(summary))?);
    Ok(written)
}
