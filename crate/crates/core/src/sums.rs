//! Pair-product sums `S_n = sum a_i a_{i+1}` along digit trajectories and the
//! Monte Carlo experiments built on them.

use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cf::{CfError, DigitSource, Law, RandomRealStream};
use crate::measure::truncated_pair_expectation;
use crate::numeric::summarize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SumsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Stream(#[from] CfError),
}

/// Unsigned sum that stays in a `u128` until it overflows.
#[derive(Clone, Debug, Default)]
struct WideSum {
    low: u128,
    high: BigUint,
}

impl WideSum {
    fn add(&mut self, x: u128) {
        match self.low.checked_add(x) {
            Some(v) => self.low = v,
            None => {
                self.high += self.low;
                self.low = x;
            }
        }
    }

    fn value(&self) -> BigUint {
        &self.high + self.low
    }
}

/// Which threshold counters to keep, per grid point `n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsSpec {
    /// For each exponent `c`, count `i <= n` with `b_i > n (log n)^c`.
    pub count_exponents: Vec<f64>,
    /// Keep `S_n^*`, the sum of `b_i <= n (log n)^c`, for this `c`.
    pub truncation_exponent: Option<f64>,
}

/// `floor(n (log n)^exponent)`, the integer form of the truncation threshold.
pub fn truncation_threshold(n: u64, exponent: f64) -> u128 {
    let n = n as f64;
    (n * n.ln().powf(exponent)).floor() as u128
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exceedance {
    pub threshold: u128,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSum {
    pub threshold: u128,
    pub value: BigUint,
}

/// Snapshot of a trajectory after `n` pair terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryStats {
    pub n: u64,
    /// `S_n = sum_{i<=n} a_i a_{i+1}`.
    pub pair_sum: BigUint,
    /// `sum_{i<=n} a_i`.
    pub digit_sum: BigUint,
    /// Largest `b_i`, with the smallest index attaining it.
    pub max_pair: u128,
    pub max_pair_index: u64,
    pub max_digit: u64,
    pub max_digit_index: u64,
    pub exceedances: Vec<Exceedance>,
    pub truncated: Option<TruncatedSum>,
}

impl TrajectoryStats {
    /// `S_n` minus its largest term.
    pub fn trimmed(&self) -> BigUint {
        &self.pair_sum - self.max_pair
    }

    /// Digit sum minus its largest digit.
    pub fn trimmed_digit_sum(&self) -> BigUint {
        &self.digit_sum - self.max_digit
    }
}

fn check_grid(n_grid: &[u64]) -> Result<(), SumsError> {
    if n_grid.is_empty() || n_grid[0] == 0 {
        return Err(SumsError::Config("grid must be nonempty and positive".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SumsError::Config("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One streaming pass producing a snapshot at every grid point.
///
/// Reads `max(n_grid) + 1` digits since `b_n` needs `a_{n+1}`.
pub fn trajectory_stats<S: DigitSource + ?Sized>(
    source: &mut S,
    n_grid: &[u64],
    spec: &StatsSpec,
) -> Result<Vec<TrajectoryStats>, SumsError> {
    check_grid(n_grid)?;
    let counts: Vec<Vec<u128>> = n_grid
        .iter()
        .map(|&n| spec.count_exponents.iter().map(|&c| truncation_threshold(n, c)).collect())
        .collect();
    let trunc: Vec<Option<u128>> = n_grid
        .iter()
        .map(|&n| spec.truncation_exponent.map(|c| truncation_threshold(n, c)))
        .collect();
    let mut over = vec![vec![0u64; spec.count_exponents.len()]; n_grid.len()];
    let mut kept = vec![0u128; n_grid.len()];

    let mut pair_sum = WideSum::default();
    let mut digit_sum = WideSum::default();
    let (mut max_pair, mut max_pair_index) = (0u128, 0u64);
    let (mut max_digit, mut max_digit_index) = (0u64, 0u64);
    let mut out = Vec::with_capacity(n_grid.len());
    let mut active = 0usize;
    let mut prev = source.next_digit()?;
    let last = *n_grid.last().unwrap();
    for i in 1..=last {
        let next = source.next_digit()?;
        let b = prev as u128 * next as u128;
        pair_sum.add(b);
        digit_sum.add(prev as u128);
        if b > max_pair {
            max_pair = b;
            max_pair_index = i;
        }
        if prev > max_digit {
            max_digit = prev;
            max_digit_index = i;
        }
        for g in active..n_grid.len() {
            for (slot, &thr) in over[g].iter_mut().zip(&counts[g]) {
                if b > thr {
                    *slot += 1;
                }
            }
            if let Some(thr) = trunc[g] {
                if b <= thr {
                    kept[g] += b;
                }
            }
        }
        if i == n_grid[active] {
            out.push(TrajectoryStats {
                n: i,
                pair_sum: pair_sum.value(),
                digit_sum: digit_sum.value(),
                max_pair,
                max_pair_index,
                max_digit,
                max_digit_index,
                exceedances: counts[active]
                    .iter()
                    .zip(&over[active])
                    .map(|(&threshold, &count)| Exceedance { threshold, count })
                    .collect(),
                truncated: trunc[active]
                    .map(|threshold| TruncatedSum { threshold, value: BigUint::from(kept[active]) }),
            });
            active += 1;
        }
        prev = next;
    }
    Ok(out)
}

/// `S_n^* = sum_{i<=n} b_i [b_i <= threshold]` over a finite digit list.
pub fn truncated_sum(digits: &[u64], n: usize, threshold: u128) -> Result<BigUint, SumsError> {
    if digits.len() < n + 1 {
        return Err(SumsError::Config(format!("need {} digits, got {}", n + 1, digits.len())));
    }
    let mut s = WideSum::default();
    for w in digits[..=n].windows(2) {
        let b = w[0] as u128 * w[1] as u128;
        if b <= threshold {
            s.add(b);
        }
    }
    Ok(s.value())
}

/// Settings shared by the Monte Carlo experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub law: Law,
    pub trials: u64,
    pub n_grid: Vec<u64>,
    pub master_seed: u64,
    /// Band half-width for the weak-law exceedance fraction.
    pub epsilon: f64,
    /// Truncation at `N (log N)^c`.
    pub truncation_exponent: f64,
    /// Exponent `c` for the two-large-terms count at `n (log n)^c`.
    pub spike_exponent: f64,
}

impl ExperimentConfig {
    pub fn new(law: Law, trials: u64, n_grid: Vec<u64>, master_seed: u64) -> Self {
        Self {
            law,
            trials,
            n_grid,
            master_seed,
            epsilon: 0.5,
            truncation_exponent: 1.625,
            spike_exponent: 1.6,
        }
    }

    pub fn validate(&self) -> Result<(), SumsError> {
        if self.trials == 0 {
            return Err(SumsError::Config("trials must be at least 1".into()));
        }
        check_grid(&self.n_grid)?;
        if self.n_grid[0] < 3 {
            return Err(SumsError::Config("grid points must be at least 3".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(SumsError::Config("epsilon must be positive".into()));
        }
        if !self.truncation_exponent.is_finite() || !self.spike_exponent.is_finite() {
            return Err(SumsError::Config("exponents must be finite".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// One aggregated statistic at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: u64,
    pub statistic: String,
    pub mean: f64,
    pub median: Option<f64>,
    pub std_error: Option<f64>,
    pub exceed_fraction: Option<f64>,
    pub exceed_std_error: Option<f64>,
    pub target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// Set when there are too few trials for standard errors.
    pub degenerate: bool,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, statistic: &str, n: u64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.statistic == statistic && r.n == n)
    }
}

/// `1/(2 log 2)`, the weak-law constant for `S_n / (n log^2 n)`.
pub fn pair_sum_constant() -> f64 {
    0.5 / LN_2
}

/// `1/log 2`, the Khinchin constant for the digit sum over `n log n`.
pub fn digit_sum_constant() -> f64 {
    1.0 / LN_2
}

fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

fn run_trials(
    config: &ExperimentConfig,
    spec: &StatsSpec,
) -> Result<Vec<Vec<TrajectoryStats>>, SumsError> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut s = RandomRealStream::with_stream(config.master_seed, t, config.law);
            trajectory_stats(&mut s, &config.n_grid, spec)
        })
        .collect()
}

fn value_row(n: u64, statistic: &str, xs: &[f64], target: Option<f64>) -> ReportRow {
    let (mean, median, se) = summarize(xs);
    ReportRow {
        n,
        statistic: statistic.into(),
        mean,
        median: Some(median),
        std_error: se,
        exceed_fraction: None,
        exceed_std_error: None,
        target,
    }
}

fn fraction_row(n: u64, statistic: &str, hits: &[bool]) -> ReportRow {
    let k = hits.len();
    let p = if k == 0 { f64::NAN } else { hits.iter().filter(|&&h| h).count() as f64 / k as f64 };
    ReportRow {
        n,
        statistic: statistic.into(),
        mean: p,
        median: None,
        std_error: (k >= 2).then(|| (p * (1.0 - p) / k as f64).sqrt()),
        exceed_fraction: None,
        exceed_std_error: None,
        target: None,
    }
}

fn band_row(n: u64, statistic: &str, xs: &[f64], target: f64, epsilon: f64) -> ReportRow {
    let mut row = value_row(n, statistic, xs, Some(target));
    let hits: Vec<bool> = xs.iter().map(|x| (x - target).abs() >= epsilon).collect();
    let f = fraction_row(n, statistic, &hits);
    row.exceed_fraction = Some(f.mean);
    row.exceed_std_error = f.std_error;
    row
}

fn report(name: &str, config: &ExperimentConfig, rows: Vec<ReportRow>) -> ExperimentReport {
    ExperimentReport {
        experiment: name.into(),
        config: config.clone(),
        config_hash: config.hash(),
        degenerate: config.trials < 2,
        rows,
    }
}

/// Fraction of trials with `|S_n/(n log^2 n) - 1/(2 log 2)| >= epsilon`.
pub fn weak_law_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, SumsError> {
    let runs = run_trials(config, &StatsSpec::default())?;
    let rows = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let norm = n as f64 * (n as f64).ln().powi(2);
            let xs: Vec<f64> = runs.iter().map(|r| to_f64(&r[g].pair_sum) / norm).collect();
            band_row(n, "pair_sum_ratio", &xs, pair_sum_constant(), config.epsilon)
        })
        .collect();
    Ok(report("weak_law", config, rows))
}

/// Trimmed and truncated sums against the exact finite-`n` expectation.
pub fn trimmed_law_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, SumsError> {
    let spec = StatsSpec {
        count_exponents: vec![config.truncation_exponent, config.spike_exponent],
        truncation_exponent: Some(config.truncation_exponent),
    };
    let runs = run_trials(config, &spec)?;
    let mut rows = Vec::new();
    for (g, &n) in config.n_grid.iter().enumerate() {
        let log2n = (n as f64).ln().powi(2);
        let norm = n as f64 * log2n;
        let snaps: Vec<&TrajectoryStats> = runs.iter().map(|r| &r[g]).collect();
        let threshold = snaps[0].truncated.as_ref().map_or(0, |t| t.threshold);
        let exact = truncated_pair_expectation(threshold as f64).ok().map(|e| e.value / log2n);

        let trimmed: Vec<f64> = snaps.iter().map(|s| to_f64(&s.trimmed()) / norm).collect();
        let truncated: Vec<f64> = snaps
            .iter()
            .map(|s| to_f64(&s.truncated.as_ref().unwrap().value) / norm)
            .collect();
        let equal: Vec<bool> =
            snaps.iter().map(|s| s.trimmed() == s.truncated.as_ref().unwrap().value).collect();
        let over = |s: &TrajectoryStats, k: usize| s.exceedances[k].count;
        rows.push(value_row(n, "trimmed_ratio", &trimmed, Some(pair_sum_constant())));
        rows.push(value_row(n, "truncated_ratio", &truncated, exact));
        rows.push(fraction_row(n, "trimmed_equals_truncated", &equal));
        let two_over: Vec<bool> = snaps.iter().map(|s| over(s, 0) >= 2).collect();
        rows.push(fraction_row(n, "two_over_truncation", &two_over));
        let both: Vec<bool> = equal.iter().zip(&two_over).map(|(&e, &t)| !e && t).collect();
        rows.push(fraction_row(n, "trimmed_ne_truncated_and_two_over", &both));
        let spikes: Vec<bool> = snaps.iter().map(|s| over(s, 1) >= 2).collect();
        rows.push(fraction_row(n, "two_over_spike", &spikes));
        let single: Vec<bool> = snaps
            .iter()
            .zip(&equal)
            .filter(|(s, _)| over(s, 0) == 1)
            .map(|(_, &e)| e)
            .collect();
        rows.push(fraction_row(n, "single_exceedance_agreement", &single));
    }
    Ok(report("trimmed_law", config, rows))
}

/// Khinchin weak law and Diamond-Vaaler trimmed law for the plain digit sum.
pub fn baseline_experiments(config: &ExperimentConfig) -> Result<ExperimentReport, SumsError> {
    let runs = run_trials(config, &StatsSpec::default())?;
    let mut rows = Vec::new();
    for (g, &n) in config.n_grid.iter().enumerate() {
        let norm = n as f64 * (n as f64).ln();
        let plain: Vec<f64> = runs.iter().map(|r| to_f64(&r[g].digit_sum) / norm).collect();
        let trimmed: Vec<f64> = runs.iter().map(|r| to_f64(&r[g].trimmed_digit_sum()) / norm).collect();
        rows.push(band_row(n, "digit_sum_ratio", &plain, digit_sum_constant(), config.epsilon));
        rows.push(value_row(n, "dv_trimmed_ratio", &trimmed, Some(digit_sum_constant())));
    }
    Ok(report("baselines", config, rows))
}

/// `max_{i<=n} b_i / (n log n / log log n)` along one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunningMax {
    pub points: Vec<(u64, f64)>,
    /// Minimum of the statistic over every `n` between the first and last grid point.
    pub running_min: f64,
}

fn max_scale(n: u64) -> f64 {
    let n = n as f64;
    n * n.ln() / n.ln().ln()
}

/// Exploratory statistic for the liminf of the largest pair term.
pub fn running_max_statistic<S: DigitSource + ?Sized>(
    source: &mut S,
    n_grid: &[u64],
) -> Result<RunningMax, SumsError> {
    check_grid(n_grid)?;
    if n_grid[0] < 16 {
        return Err(SumsError::Config("grid points must be at least 16".into()));
    }
    let (first, last) = (n_grid[0], *n_grid.last().unwrap());
    let mut points = Vec::with_capacity(n_grid.len());
    let mut running_min = f64::INFINITY;
    let mut max = 0u128;
    let mut g = 0usize;
    let mut prev = source.next_digit()?;
    for i in 1..=last {
        let next = source.next_digit()?;
        let b = prev as u128 * next as u128;
        if b > max {
            // Between jumps the statistic decreases, so minima sit just before them.
            if i > first {
                running_min = running_min.min(max as f64 / max_scale(i - 1));
            }
            max = b;
        }
        if i == first {
            running_min = running_min.min(max as f64 / max_scale(i));
        }
        if i == n_grid[g] {
            points.push((i, max as f64 / max_scale(i)));
            g += 1;
        }
        prev = next;
    }
    running_min = running_min.min(max as f64 / max_scale(last));
    Ok(RunningMax { points, running_min })
}

/// Running-max statistic averaged over trials; rows `running_max_ratio` per grid
/// point and `running_min` at the last grid point.
pub fn running_max_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, SumsError> {
    config.validate()?;
    let runs: Vec<RunningMax> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut s = RandomRealStream::with_stream(config.master_seed, t, config.law);
            running_max_statistic(&mut s, &config.n_grid)
        })
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<ReportRow> = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let xs: Vec<f64> = runs.iter().map(|r| r.points[g].1).collect();
            value_row(n, "running_max_ratio", &xs, Some(pair_sum_constant()))
        })
        .collect();
    let mins: Vec<f64> = runs.iter().map(|r| r.running_min).collect();
    rows.push(value_row(*config.n_grid.last().unwrap(), "running_min", &mins, Some(pair_sum_constant())));
    Ok(report("running_max", config, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::FiniteDigits;

    fn stats(digits: &[u64], grid: &[u64]) -> Vec<TrajectoryStats> {
        trajectory_stats(&mut FiniteDigits::new(digits.to_vec()), grid, &StatsSpec::default()).unwrap()
    }

    #[test]
    fn pair_sum_examples() {
        let s = &stats(&[1, 2, 3, 1, 7], &[3])[0];
        assert_eq!(s.pair_sum, BigUint::from(11u32));
        assert_eq!(s.digit_sum, BigUint::from(6u32));
        let ones = &stats(&[1; 11], &[10])[0];
        assert_eq!(ones.pair_sum, BigUint::from(10u32));
        assert_eq!(ones.trimmed(), BigUint::from(9u32));
    }

    #[test]
    fn ties_take_the_smallest_index() {
        let s = &stats(&[1, 5, 1, 1], &[3])[0];
        assert_eq!((s.max_pair, s.max_pair_index), (5, 1));
        assert_eq!(s.trimmed(), BigUint::from(6u32));
    }

    #[test]
    fn truncation_filter() {
        let d = [1, 1_000_000, 1, 1];
        assert_eq!(truncated_sum(&d, 3, 100).unwrap(), BigUint::from(1u32));
        assert_eq!(truncated_sum(&d, 3, u128::MAX).unwrap(), BigUint::from(2_000_001u32));
        assert!(truncated_sum(&d, 4, 100).is_err());
    }

    #[test]
    fn wide_sum_overflows_into_big() {
        let mut w = WideSum::default();
        w.add(u128::MAX);
        w.add(u128::MAX);
        w.add(2);
        assert_eq!(w.value(), BigUint::from(u128::MAX) * 2u32 + 2u32);
    }

    #[test]
    fn snapshot_counts_and_truncation() {
        let spec = StatsSpec { count_exponents: vec![0.0], truncation_exponent: Some(0.0) };
        // b = (2, 6, 3) against floor(3 * 1) = 3
        let s = trajectory_stats(&mut FiniteDigits::new(vec![1, 2, 3, 1]), &[3], &spec).unwrap();
        assert_eq!(s[0].exceedances[0], Exceedance { threshold: 3, count: 1 });
        assert_eq!(s[0].truncated.as_ref().unwrap().value, BigUint::from(5u32));
    }

    #[test]
    fn bad_grids_are_rejected() {
        let mut f = FiniteDigits::new(vec![1; 10]);
        assert!(trajectory_stats(&mut f, &[3, 3], &StatsSpec::default()).is_err());
        assert!(trajectory_stats(&mut f, &[], &StatsSpec::default()).is_err());
    }

    #[test]
    fn exhausted_source_propagates() {
        let mut f = FiniteDigits::new(vec![1, 1, 1]);
        assert!(matches!(
            trajectory_stats(&mut f, &[5], &StatsSpec::default()),
            Err(SumsError::Stream(CfError::Exhausted(3)))
        ));
    }

    #[test]
    fn single_trial_report_is_flagged() {
        let c = ExperimentConfig::new(Law::Lebesgue, 1, vec![10], 4);
        let r = weak_law_experiment(&c).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].std_error.is_none());
        assert_eq!(r.rows[0].target, Some(pair_sum_constant()));
    }

    #[test]
    fn all_ones_running_max_vanishes() {
        let mut f = FiniteDigits::new(vec![1; 100_002]);
        let r = running_max_statistic(&mut f, &[1000, 100_000]).unwrap();
        assert!(r.points[1].1 < 1e-4);
        assert!((r.running_min - r.points[1].1).abs() < 1e-18);
    }

    #[test]
    fn constants() {
        assert!((pair_sum_constant() - 0.721_347_5).abs() < 1e-7);
        assert!((digit_sum_constant() - 1.442_695_0).abs() < 1e-7);
    }
}
