//! Flat `key = value` experiment configuration.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored. Keys
//! not used by the selected mode are rejected. `preset = paper` loads the
//! device values of the fiber-loop experiment before the other keys apply.
//!
//! | key | modes | value |
//! |-----|-------|-------|
//! | `mode` | all | `ideal`, `noisy`, `majority`, `fringe`, `census`, `oracle-check`, `bounds` |
//! | `master_seed` | all stochastic | u64 |
//! | `out_dir`, `workers` | all | path; thread count (0 = all cores) |
//! | `n_qubits`, `n_trials` | trial modes, census, oracle-check | counts |
//! | `phase_word` | trial modes, census | `random`, a bit string, or `file:<path>` |
//! | `record_bits`, `histogram_bins`, `max_abort_fraction` | trial modes | bool; bins; fraction |
//! | `alpha`, `convention` | trial modes, bounds | significance; `cumulative` or `exact` |
//! | `visibility`, `truncation`, `dac_digits`, `v_pi`, `detector`, `mu`, `loss_db`, `eta_det`, `dark_rate`, `retry_cap`, `p_override`, `repeats`, `tie_break`, `extra_delta` | noisy, majority | noise model (`none` disables optional ones) |
//! | `census_bins`, `census_lo`, `census_hi` | census | histogram of `|cos δ|` |
//! | `v_min`, `v_max`, `points`, `pulses_per_point`, `phase_offset` | fringe | scan |
//! | `k_max`, `n_max`, `k_min`, `n_min`, `trials` | bounds | observed extremes |

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mqft_core::noise::TieBreak;
use mqft_core::phase::MAX_BITS;
use mqft_core::stats::BoundsConvention;
use mqft_core::{DetectorParams, NoiseParams, PhaseWord};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Ideal,
    Noisy,
    Majority,
    Fringe,
    Census,
    OracleCheck,
    Bounds,
}

impl Mode {
    /// Modes that run the serial pipeline trial by trial.
    pub fn runs_trials(self) -> bool {
        matches!(self, Self::Ideal | Self::Noisy | Self::Majority)
    }

    fn allowed_keys(self) -> Vec<&'static str> {
        let mut keys = vec!["mode", "master_seed", "out_dir", "workers"];
        let trial = ["n_qubits", "n_trials", "phase_word", "record_bits", "histogram_bins", "max_abort_fraction", "alpha", "convention"];
        let noise = [
            "preset", "visibility", "truncation", "dac_digits", "v_pi", "detector", "mu", "loss_db", "eta_det",
            "dark_rate", "retry_cap", "p_override", "repeats", "tie_break", "extra_delta",
        ];
        match self {
            Self::Ideal => keys.extend(trial),
            Self::Noisy | Self::Majority => {
                keys.extend(trial);
                keys.extend(noise);
            }
            Self::Census => keys.extend([
                "n_qubits", "n_trials", "phase_word", "preset", "truncation", "dac_digits", "v_pi", "census_bins",
                "census_lo", "census_hi",
            ]),
            Self::Fringe => {
                keys.extend(["preset", "visibility", "v_pi", "v_min", "v_max", "points", "pulses_per_point", "phase_offset"])
            }
            Self::OracleCheck => keys.extend(["n_qubits", "n_trials"]),
            Self::Bounds => keys.extend(["k_max", "n_max", "k_min", "n_min", "trials", "alpha", "convention"]),
        }
        keys
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ideal" => Self::Ideal,
            "noisy" => Self::Noisy,
            "majority" => Self::Majority,
            "fringe" => Self::Fringe,
            "census" => Self::Census,
            "oracle-check" => Self::OracleCheck,
            "bounds" => Self::Bounds,
            other => return Err(CliError::config("mode", format!("unknown mode {other:?}"))),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ideal => "ideal",
            Self::Noisy => "noisy",
            Self::Majority => "majority",
            Self::Fringe => "fringe",
            Self::Census => "census",
            Self::OracleCheck => "oracle-check",
            Self::Bounds => "bounds",
        })
    }
}

/// Where trial phase words come from.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSource {
    /// A fresh uniform word per trial, drawn from the trial's stream.
    Random,
    /// The same word for every trial.
    Bits(PhaseWord),
    /// One word per line; a single word is reused for every trial.
    File(PathBuf),
}

impl fmt::Display for PhaseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Random => f.write_str("random"),
            Self::Bits(w) => write!(f, "{w}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringeConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub points: usize,
    pub pulses_per_point: u64,
    pub phase_offset: f64,
}

impl Default for FringeConfig {
    fn default() -> Self {
        Self { v_min: 0.0, v_max: 12.0, points: 61, pulses_per_point: 100_000, phase_offset: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CensusConfig {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self { bins: 20, lo: 0.98, hi: 1.0 }
    }
}

/// Observed extremes fed to the confidence-bound solver in `bounds` mode.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BoundsInput {
    pub k_max: usize,
    pub n_max: usize,
    pub min_side: Option<(usize, usize)>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// `None` means the word length of an explicit or file phase source.
    pub n_qubits: Option<usize>,
    pub n_trials: usize,
    pub master_seed: Option<u64>,
    pub phase_word: PhaseSource,
    pub noise: NoiseParams,
    pub record_bits: bool,
    pub histogram_bins: usize,
    pub max_abort_fraction: f64,
    pub alpha: f64,
    pub convention: BoundsConvention,
    pub fringe: FringeConfig,
    pub census: CensusConfig,
    pub bounds: BoundsInput,
    pub out_dir: PathBuf,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n_qubits: None,
            n_trials: 0,
            master_seed: None,
            phase_word: PhaseSource::Random,
            noise: NoiseParams::ideal(),
            record_bits: false,
            histogram_bins: 32,
            max_abort_fraction: 0.05,
            alpha: 0.05,
            convention: BoundsConvention::Cumulative,
            fringe: FringeConfig::default(),
            census: CensusConfig::default(),
            bounds: BoundsInput::default(),
            out_dir: PathBuf::from("out"),
            workers: 0,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}", lineno + 1), format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if value.is_empty() {
                return Err(CliError::config(key, "missing value"));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(CliError::config(key, "set more than once"));
            }
        }

        let mode: Mode = entries.get("mode").ok_or_else(|| CliError::config("mode", "required"))?.parse()?;
        let allowed = mode.allowed_keys();
        if let Some(bad) = entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::config(bad.clone(), format!("unknown key or not used in mode {mode}")));
        }

        let mut cfg = Self::new(mode);
        let mut fields = Fields(&entries);
        match fields.take::<String>("preset")?.as_deref() {
            None => {}
            Some("paper") => cfg.noise = NoiseParams::paper_profile(),
            Some(other) => return Err(CliError::config("preset", format!("unknown preset {other:?}"))),
        }

        cfg.master_seed = fields.take("master_seed")?;
        if let Some(dir) = fields.take::<String>("out_dir")? {
            cfg.out_dir = PathBuf::from(dir);
        }
        cfg.workers = fields.take("workers")?.unwrap_or(0);
        cfg.n_qubits = fields.take("n_qubits")?;
        if let Some(t) = fields.take("n_trials")? {
            cfg.n_trials = t;
        }
        if let Some(src) = fields.take::<String>("phase_word")? {
            cfg.phase_word = parse_phase_source(&src)?;
        }
        set(&mut cfg.record_bits, fields.take("record_bits")?);
        set(&mut cfg.histogram_bins, fields.take("histogram_bins")?);
        set(&mut cfg.max_abort_fraction, fields.take("max_abort_fraction")?);
        set(&mut cfg.alpha, fields.take("alpha")?);
        if let Some(c) = fields.take::<String>("convention")? {
            cfg.convention = c.parse().map_err(|e: mqft_core::Error| CliError::config("convention", e.to_string()))?;
        }

        let noise = &mut cfg.noise;
        set(&mut noise.visibility, fields.take("visibility")?);
        if let Some(t) = fields.take_optional::<usize>("truncation")? {
            noise.truncation = t;
        }
        if let Some(d) = fields.take_optional::<u32>("dac_digits")? {
            noise.dac_digits = d;
        }
        set(&mut noise.v_pi, fields.take("v_pi")?);
        match fields.take::<String>("detector")?.as_deref() {
            None => {}
            Some("on") => {
                noise.detector.get_or_insert_with(DetectorParams::paper);
            }
            Some("off") => noise.detector = None,
            Some(other) => return Err(CliError::config("detector", format!("expected on or off, got {other:?}"))),
        }
        for key in ["mu", "loss_db", "eta_det", "dark_rate"] {
            let Some(value) = fields.take::<f64>(key)? else { continue };
            let det = noise.detector.as_mut().ok_or_else(|| CliError::config(key, "requires detector = on"))?;
            match key {
                "mu" => det.mu = value,
                "loss_db" => det.loss_db = value,
                "eta_det" => det.eta_det = value,
                _ => det.dark_rate = value,
            }
        }
        set(&mut noise.retry_cap, fields.take("retry_cap")?);
        if let Some(p) = fields.take_optional::<f64>("p_override")? {
            noise.p_override = p;
        }
        let repeats = fields.take("repeats")?;
        set(&mut noise.repeats, repeats);
        match fields.take::<String>("tie_break")?.as_deref() {
            None => {}
            Some("pessimistic") => noise.tie_break = TieBreak::Pessimistic,
            Some("random") => noise.tie_break = TieBreak::Random,
            Some(other) => {
                return Err(CliError::config("tie_break", format!("expected pessimistic or random, got {other:?}")))
            }
        }
        set(&mut noise.extra_delta, fields.take("extra_delta")?);

        set(&mut cfg.census.bins, fields.take("census_bins")?);
        set(&mut cfg.census.lo, fields.take("census_lo")?);
        set(&mut cfg.census.hi, fields.take("census_hi")?);

        set(&mut cfg.fringe.v_min, fields.take("v_min")?);
        set(&mut cfg.fringe.v_max, fields.take("v_max")?);
        set(&mut cfg.fringe.points, fields.take("points")?);
        set(&mut cfg.fringe.pulses_per_point, fields.take("pulses_per_point")?);
        set(&mut cfg.fringe.phase_offset, fields.take("phase_offset")?);

        if mode == Mode::Bounds {
            cfg.bounds.k_max = fields.take("k_max")?.ok_or_else(|| CliError::config("k_max", "required"))?;
            cfg.bounds.n_max = fields.take("n_max")?.ok_or_else(|| CliError::config("n_max", "required"))?;
            cfg.bounds.trials = fields.take("trials")?.ok_or_else(|| CliError::config("trials", "required"))?;
            cfg.bounds.min_side = match (fields.take("k_min")?, fields.take("n_min")?) {
                (Some(k), Some(n)) => Some((k, n)),
                (None, None) => None,
                (Some(_), None) => return Err(CliError::config("n_min", "required when k_min is set")),
                (None, Some(_)) => return Err(CliError::config("k_min", "required when n_min is set")),
            };
        }

        if mode == Mode::Majority && repeats.is_none() {
            return Err(CliError::config("repeats", "required in mode majority"));
        }
        if mode.runs_trials() || matches!(mode, Mode::Census) {
            if !entries.contains_key("n_trials") {
                return Err(CliError::config("n_trials", format!("required in mode {mode}")));
            }
            if cfg.n_qubits.is_none() && cfg.phase_word == PhaseSource::Random {
                return Err(CliError::config("n_qubits", "required when phase_word is random"));
            }
        }
        if mode == Mode::OracleCheck {
            if cfg.n_qubits.is_none() {
                return Err(CliError::config("n_qubits", "required in mode oracle-check"));
            }
            if !entries.contains_key("n_trials") {
                cfg.n_trials = 20;
            }
        }
        // Keep only the noise fields the mode uses so the echo is complete.
        let full = cfg.noise.clone();
        cfg.noise = match mode {
            Mode::Noisy | Mode::Majority => full,
            Mode::Census => NoiseParams { truncation: full.truncation, dac_digits: full.dac_digits, v_pi: full.v_pi, ..NoiseParams::ideal() },
            Mode::Fringe => NoiseParams { visibility: full.visibility, v_pi: full.v_pi, ..NoiseParams::ideal() },
            _ => NoiseParams::ideal(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A seed is needed unless the run draws no random numbers.
    pub fn needs_seed(&self) -> bool {
        match self.mode {
            Mode::Bounds => false,
            Mode::Ideal | Mode::Census => self.phase_word == PhaseSource::Random,
            _ => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.needs_seed() && self.master_seed.is_none() {
            return Err(CliError::config("master_seed", format!("required in mode {}", self.mode)));
        }
        if let Some(n) = self.n_qubits {
            let limit = if self.mode == Mode::OracleCheck { mqft_core::oracle::MAX_QUBITS } else { MAX_BITS };
            if n == 0 || n > limit {
                return Err(CliError::config("n_qubits", format!("{n} not in 1..={limit}")));
            }
            if let PhaseSource::Bits(w) = &self.phase_word {
                if w.len() != n {
                    return Err(CliError::config("phase_word", format!("has {} bits but n_qubits = {n}", w.len())));
                }
            }
        }
        if (self.mode.runs_trials() || self.mode == Mode::Census) && self.n_trials == 0 {
            return Err(CliError::config("n_trials", "must be ≥ 1"));
        }
        if self.histogram_bins == 0 {
            return Err(CliError::config("histogram_bins", "must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.max_abort_fraction) {
            return Err(CliError::config("max_abort_fraction", "must lie in [0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(CliError::config("alpha", "must lie in (0, 0.5)"));
        }
        self.noise.validate().map_err(|e| match e {
            mqft_core::Error::InvalidParameter { name, reason } => CliError::config(name, reason),
            other => CliError::config("noise", other.to_string()),
        })?;
        if self.mode == Mode::Census {
            let c = &self.census;
            if c.bins == 0 {
                return Err(CliError::config("census_bins", "must be ≥ 1"));
            }
            if !(c.lo < c.hi) {
                return Err(CliError::config("census_lo", "must be below census_hi"));
            }
        }
        if self.mode == Mode::Fringe {
            let f = &self.fringe;
            if !(f.v_min < f.v_max) {
                return Err(CliError::config("v_min", "must be below v_max"));
            }
            if f.points < 8 {
                return Err(CliError::config("points", "must be ≥ 8"));
            }
            if f.pulses_per_point == 0 {
                return Err(CliError::config("pulses_per_point", "must be ≥ 1"));
            }
        }
        if self.mode == Mode::Bounds {
            let b = &self.bounds;
            if b.trials == 0 || b.n_max == 0 || b.n_max > b.trials {
                return Err(CliError::config("n_max", "must lie in 1..=trials"));
            }
            if b.k_max == 0 {
                return Err(CliError::config("k_max", "must be ≥ 1"));
            }
            if let Some((k, n)) = b.min_side {
                if k == 0 {
                    return Err(CliError::config("k_min", "must be ≥ 1"));
                }
                if n == 0 || n > b.trials {
                    return Err(CliError::config("n_min", "must lie in 1..=trials"));
                }
            }
        }
        Ok(())
    }

    /// Canonical config text for this run. `out_dir` and `workers` are left
    /// out: they do not change results.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: &dyn fmt::Display| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("mode", &self.mode);
        if let Some(seed) = self.master_seed {
            put("master_seed", &seed);
        }
        let noise = &self.noise;
        match self.mode {
            Mode::Ideal | Mode::Noisy | Mode::Majority => {
                if let Some(n) = self.n_qubits {
                    put("n_qubits", &n);
                }
                put("n_trials", &self.n_trials);
                put("phase_word", &self.phase_word);
                put("record_bits", &self.record_bits);
                put("histogram_bins", &self.histogram_bins);
                put("max_abort_fraction", &self.max_abort_fraction);
                put("alpha", &self.alpha);
                put("convention", &self.convention);
                if self.mode != Mode::Ideal {
                    put("visibility", &noise.visibility);
                    put("truncation", &OptDisplay(noise.truncation));
                    put("dac_digits", &OptDisplay(noise.dac_digits));
                    put("v_pi", &noise.v_pi);
                    match &noise.detector {
                        None => put("detector", &"off"),
                        Some(d) => {
                            put("detector", &"on");
                            put("mu", &d.mu);
                            put("loss_db", &d.loss_db);
                            put("eta_det", &d.eta_det);
                            put("dark_rate", &d.dark_rate);
                        }
                    }
                    put("retry_cap", &noise.retry_cap);
                    put("p_override", &OptDisplay(noise.p_override));
                    put("repeats", &noise.repeats);
                    put(
                        "tie_break",
                        &match noise.tie_break {
                            TieBreak::Pessimistic => "pessimistic",
                            TieBreak::Random => "random",
                        },
                    );
                    put("extra_delta", &noise.extra_delta);
                }
            }
            Mode::Census => {
                if let Some(n) = self.n_qubits {
                    put("n_qubits", &n);
                }
                put("n_trials", &self.n_trials);
                put("phase_word", &self.phase_word);
                put("truncation", &OptDisplay(noise.truncation));
                put("dac_digits", &OptDisplay(noise.dac_digits));
                put("v_pi", &noise.v_pi);
                put("census_bins", &self.census.bins);
                put("census_lo", &self.census.lo);
                put("census_hi", &self.census.hi);
            }
            Mode::Fringe => {
                let f = &self.fringe;
                put("visibility", &noise.visibility);
                put("v_pi", &noise.v_pi);
                put("v_min", &f.v_min);
                put("v_max", &f.v_max);
                put("points", &f.points);
                put("pulses_per_point", &f.pulses_per_point);
                put("phase_offset", &f.phase_offset);
            }
            Mode::OracleCheck => {
                if let Some(n) = self.n_qubits {
                    put("n_qubits", &n);
                }
                put("n_trials", &self.n_trials);
            }
            Mode::Bounds => {
                let b = &self.bounds;
                put("k_max", &b.k_max);
                put("n_max", &b.n_max);
                if let Some((k, n)) = b.min_side {
                    put("k_min", &k);
                    put("n_min", &n);
                }
                put("trials", &b.trials);
                put("alpha", &self.alpha);
                put("convention", &self.convention);
            }
        }
        out
    }
}

struct OptDisplay<T>(Option<T>);

impl<T: fmt::Display> fmt::Display for OptDisplay<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("none"),
        }
    }
}

struct Fields<'a>(&'a BTreeMap<String, String>);

impl Fields<'_> {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::config(key, format!("cannot parse {v:?}: {e}"))))
            .transpose()
    }

    /// Like `take`, with `none` mapping to `Some(None)`.
    fn take_optional<T: FromStr>(&mut self, key: &str) -> Result<Option<Option<T>>>
    where
        T::Err: fmt::Display,
    {
        match self.0.get(key).map(String::as_str) {
            None => Ok(None),
            Some("none") => Ok(Some(None)),
            Some(_) => Ok(Some(self.take(key)?)),
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_phase_source(src: &str) -> Result<PhaseSource> {
    if src == "random" {
        Ok(PhaseSource::Random)
    } else if let Some(path) = src.strip_prefix("file:") {
        Ok(PhaseSource::File(PathBuf::from(path.trim())))
    } else {
        PhaseWord::parse(src).map(PhaseSource::Bits).map_err(|e| CliError::config("phase_word", e.to_string()))
    }
}

/// Reads one phase word per non-empty line, skipping `#` comments.
pub fn read_phase_words(path: &Path) -> Result<Vec<PhaseWord>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let words = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| PhaseWord::parse(l).map_err(|e| CliError::config("phase_word", format!("{}: {e}", path.display()))))
        .collect::<Result<Vec<_>>>()?;
    if words.is_empty() {
        return Err(CliError::config("phase_word", format!("{} contains no words", path.display())));
    }
    Ok(words)
}
