//! Run-length statistics: the geometric model, error-rate estimators,
//! majority-vote error reduction and confidence bounds on the per-qubit error.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::error::{check_probability, Error, Result};
use crate::serial::TrialRecord;

/// `E(n) = (1−p)^{n−1}·p`: first error at qubit n.
pub fn geometric_pmf(n: usize, p: f64) -> f64 {
    debug_assert!(n >= 1);
    (1.0 - p).powi(n as i32 - 1) * p
}

/// `(1−p)^n`: no error in the first n qubits.
pub fn geometric_survival(n: usize, p: f64) -> f64 {
    (1.0 - p).powi(n as i32)
}

/// Run lengths of a batch of trials of equal length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialStats {
    run_lengths: Vec<usize>,
    censored: Vec<bool>,
    n_qubits: usize,
}

impl TrialStats {
    pub fn new(run_lengths: Vec<usize>, censored: Vec<bool>, n_qubits: usize) -> Result<Self> {
        if run_lengths.len() != censored.len() {
            return Err(Error::DimensionMismatch { expected: run_lengths.len(), actual: censored.len() });
        }
        for (&l, &c) in run_lengths.iter().zip(&censored) {
            if l < 1 || l > n_qubits || (c && l != n_qubits) {
                return Err(Error::InvalidParameter {
                    name: "run_lengths",
                    reason: format!("run length {l} (censored: {c}) invalid for {n_qubits} qubits"),
                });
            }
        }
        Ok(Self { run_lengths, censored, n_qubits })
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>, n_qubits: usize) -> Result<Self> {
        let (run_lengths, censored) = records.into_iter().map(|r| (r.run_length, r.censored)).unzip();
        Self::new(run_lengths, censored, n_qubits)
    }

    pub fn run_lengths(&self) -> &[usize] {
        &self.run_lengths
    }

    pub fn censored(&self) -> &[bool] {
        &self.censored
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn trials(&self) -> usize {
        self.run_lengths.len()
    }

    pub fn full_successes(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    /// Correctly transformed bits per trial: n when censored, else run length − 1.
    pub fn successful_bits(&self) -> impl Iterator<Item = usize> + '_ {
        self.run_lengths
            .iter()
            .zip(&self.censored)
            .map(|(&l, &c)| if c { l } else { l - 1 })
    }

    /// `(k_max, N_max)`: the most bits transformed without error and how many
    /// trials reached it; `(k_min, N_min)`: the earliest first-error step and
    /// how many trials failed there, absent when no trial failed.
    pub fn extremes(&self) -> Option<(usize, usize, Option<(usize, usize)>)> {
        let k_max = self.successful_bits().max()?;
        let n_max = self.successful_bits().filter(|&b| b == k_max).count();
        let failures = || self.run_lengths.iter().zip(&self.censored).filter(|(_, &c)| !c).map(|(&l, _)| l);
        let lowest = failures().min().map(|k_min| (k_min, failures().filter(|&l| l == k_min).count()));
        Some((k_max, n_max, lowest))
    }
}

/// Both per-qubit error estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRateEstimate {
    /// `1 / mean(run length)`.
    pub inverse_mean: f64,
    /// Geometric maximum likelihood with censoring: failures / Σ run lengths.
    pub censored_mle: f64,
    /// Every trial succeeded; `censored_mle` is then 0.
    pub all_censored: bool,
}

pub fn estimate_error_rate(stats: &TrialStats) -> Result<ErrorRateEstimate> {
    if stats.trials() == 0 {
        return Err(Error::InvalidParameter { name: "stats", reason: "no trials".into() });
    }
    let total: usize = stats.run_lengths.iter().sum();
    let failures = stats.trials() - stats.full_successes();
    Ok(ErrorRateEstimate {
        inverse_mean: stats.trials() as f64 / total as f64,
        censored_mle: failures as f64 / total as f64,
        all_censored: failures == 0,
    })
}

/// Per-qubit repetition with majority decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MajoritySpec {
    pub repeats: usize,
    pub p: f64,
}

/// `p_M = Σ_{j=0}^{⌊M/2⌋} C(M,j)·p^{M−j}·(1−p)^j`; ties count as errors.
pub fn majority_vote_error(spec: MajoritySpec) -> Result<f64> {
    check_probability("p", spec.p)?;
    if spec.repeats < 1 {
        return Err(Error::InvalidParameter { name: "repeats", reason: "must be ≥ 1".into() });
    }
    let m = spec.repeats as i32;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for j in 0..=m / 2 {
        if j > 0 {
            binom *= (m - j + 1) as f64 / j as f64;
        }
        sum += binom * spec.p.powi(m - j) * (1.0 - spec.p).powi(j);
    }
    Ok(sum)
}

/// `P[X ≥ k]` for `X ~ Binomial(trials, q)`.
pub fn binomial_upper_tail(trials: usize, k: usize, q: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > trials || q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    let (lq, lr) = (q.ln(), (-q).ln_1p());
    let sum: f64 = (k..=trials)
        .map(|j| (ln_binomial(trials as u64, j as u64) + j as f64 * lq + (trials - j) as f64 * lr).exp())
        .sum();
    sum.min(1.0)
}

/// How "failing by qubit k_min" is scored for the lower bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundsConvention {
    /// First error at or before k_min: `1 − (1−p)^{k_min}`.
    #[default]
    Cumulative,
    /// First error exactly at k_min: `E(k_min)`.
    ExactPmf,
}

impl std::str::FromStr for BoundsConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(Self::Cumulative),
            "exact" | "exact-pmf" => Ok(Self::ExactPmf),
            other => Err(Error::InvalidParameter {
                name: "convention",
                reason: format!("unknown convention {other:?} (expected cumulative or exact)"),
            }),
        }
    }
}

impl std::fmt::Display for BoundsConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cumulative => "cumulative",
            Self::ExactPmf => "exact",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsQuery {
    pub k_max: usize,
    pub n_max: usize,
    pub k_min: usize,
    pub n_min: usize,
    pub trials: usize,
    pub alpha: f64,
    pub convention: BoundsConvention,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceBounds {
    pub p_min: f64,
    pub p_max: f64,
}

const BISECT_LO: f64 = 1e-15;
const BISECT_REL_TOL: f64 = 1e-7;

/// Root of a monotone-on-bracket `f` by bisection on log p.
/// Returns `(lo, hi)` with `hi/lo − 1 ≤ BISECT_REL_TOL` and `f` changing sign between them.
fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (lo, hi);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.signum() == f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 {
        if f_lo == 0.0 {
            return Ok((lo, lo));
        }
        if f_hi == 0.0 {
            return Ok((hi, hi));
        }
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let lo_sign = f_lo.signum();
    while hi / lo - 1.0 > BISECT_REL_TOL {
        let mid = (lo * hi).sqrt();
        let fm = f(mid);
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "alpha", reason: format!("{alpha} not in (0, 0.5)") })
    }
}

/// Smallest p for which `n_max` or more of `trials` trials running error-free
/// through `k_max` qubits has probability below `alpha`.
pub fn p_max_bound(k_max: usize, n_max: usize, trials: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n_max > trials {
        return Err(Error::InvalidParameter { name: "n_max", reason: format!("{n_max} > {trials} trials") });
    }
    let f = |p: f64| binomial_upper_tail(trials, n_max, geometric_survival(k_max, p)) - alpha;
    let (_, hi) = bisect(f, BISECT_LO, 1.0 - 1e-12)?;
    Ok(hi)
}

/// Largest p for which `n_min` or more trials failing by qubit `k_min` has
/// probability below `alpha`.
pub fn p_min_bound(k_min: usize, n_min: usize, trials: usize, alpha: f64, convention: BoundsConvention) -> Result<f64> {
    check_alpha(alpha)?;
    if n_min > trials {
        return Err(Error::InvalidParameter { name: "n_min", reason: format!("{n_min} > {trials} trials") });
    }
    if k_min < 1 {
        return Err(Error::InvalidParameter { name: "k_min", reason: "must be ≥ 1".into() });
    }
    let fail = |p: f64| match convention {
        BoundsConvention::Cumulative => -(k_min as f64 * (-p).ln_1p()).exp_m1(),
        BoundsConvention::ExactPmf => geometric_pmf(k_min, p),
    };
    let hi = match convention {
        BoundsConvention::Cumulative => 1.0 - 1e-12,
        // E(k) increases in p up to 1/k.
        BoundsConvention::ExactPmf => 1.0 / k_min as f64,
    };
    let f = |p: f64| binomial_upper_tail(trials, n_min, fail(p)) - alpha;
    let (lo, _) = bisect(f, BISECT_LO, hi)?;
    Ok(lo)
}

/// Both sides of the error-probability range, sorted so `p_min ≤ p_max`.
pub fn confidence_bounds(q: &BoundsQuery) -> Result<ConfidenceBounds> {
    let p_max = p_max_bound(q.k_max, q.n_max, q.trials, q.alpha)?;
    let p_min = p_min_bound(q.k_min, q.n_min, q.trials, q.alpha, q.convention)?;
    Ok(ConfidenceBounds { p_min: p_min.min(p_max), p_max: p_max.max(p_min) })
}

/// Chi-square goodness of fit of run lengths against the censored geometric law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Tests run lengths against `E(l)` for first errors at l = 1…n plus the
/// censored mass `(1−p)^n`. Adjacent run lengths are pooled until each cell
/// expects at least `min_expected` trials. `fitted` parameters are removed
/// from the degrees of freedom.
pub fn geometric_goodness_of_fit(stats: &TrialStats, p: f64, min_expected: f64, fitted: usize) -> Result<GoodnessOfFit> {
    let n = stats.n_qubits();
    let total = stats.trials() as f64;
    let mut observed_by_len = vec![0usize; n + 1];
    let mut observed_censored = 0usize;
    for (&l, &c) in stats.run_lengths.iter().zip(&stats.censored) {
        if c {
            observed_censored += 1;
        } else {
            observed_by_len[l] += 1;
        }
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    for l in 1..=n {
        exp_acc += total * geometric_pmf(l, p);
        obs_acc += observed_by_len[l] as f64;
        if exp_acc >= min_expected {
            cells.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    exp_acc += total * geometric_survival(n, p);
    obs_acc += observed_censored as f64;
    if exp_acc >= min_expected || cells.is_empty() {
        cells.push((obs_acc, exp_acc));
    } else {
        let last = cells.last_mut().expect("nonempty");
        last.0 += obs_acc;
        last.1 += exp_acc;
    }
    if cells.len() < 2 + fitted {
        return Err(Error::InvalidParameter {
            name: "stats",
            reason: format!("only {} cells for the chi-square test", cells.len()),
        });
    }
    let chi2 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum::<f64>();
    let dof = cells.len() - 1 - fitted;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter { name: "dof", reason: e.to_string() })?;
    Ok(GoodnessOfFit { chi2, dof, p_value: 1.0 - dist.cdf(chi2) })
}
