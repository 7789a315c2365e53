//! Subcommand definitions and handlers.

use std::path::PathBuf;

use cflab::arith::{
    composition_sum, constructive_c_epsilon, divisor_ratio_scan, CompositionQuery, DEFAULT_COMPOSITION_CAP,
};
use cflab::fractal::{
    check_lemma55_hypotheses, covering_statistics, envelope_membership, envelope_theorem17_18,
    falconer_from_psi, feasible_delta, schedule_membership, schedule_theorem16, GrowthFunction, NkRule,
};
use cflab::measure::{
    asymptotic_product_measure, gauss, lebesgue, pair_count, product_set, product_set_residual,
    truncated_pair_expectation,
};
use cflab::sums::{
    baseline_experiments, running_max_experiment, trimmed_law_experiment, weak_law_experiment,
    ExperimentConfig, ExperimentReport,
};
use cflab::{expand_rational, Law, RandomRealStream};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::Serialize;
use serde_json::json;

use crate::output::Table;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "cflab", version, about = "Continued fraction digit-law experiments")]
pub struct Cli {
    /// Directory for CSV, JSON and manifest files.
    #[arg(long, global = true, default_value = "cflab-out")]
    pub out_dir: PathBuf,
    /// Worker threads; falls back to CFLAB_THREADS, then the hardware count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Continued fraction digits of a rational or of a seeded random real.
    Expand(ExpandArgs),
    /// Gauss and Lebesgue measure of {a1 a2 >= t}.
    MeasureProductSet(ProductSetArgs),
    /// Expectation of a1 a2 truncated at a threshold.
    Expectation(ExpectationArgs),
    /// Exceedance fractions of S_n / (n log^2 n).
    WeakLaw(ExperimentArgs),
    /// Trimmed and truncated sums against the strong-law normalization.
    TrimmedLaw(ExperimentArgs),
    /// Digit-sum baselines.
    Baselines(ExperimentArgs),
    /// Running maximum of a_n a_{n+1} against n log n / log log n.
    RunningMax(ExperimentArgs),
    /// Constructive divisor bound and an exhaustive scan.
    DivisorCheck(DivisorArgs),
    /// Weighted composition sums against their bound.
    CompositionCheck(CompositionArgs),
    /// Falconer lower bound from psi = log phi.
    Falconer(FalconerArgs),
    /// Spike schedule with bounded fillers and a sampled member.
    Schedule(ScheduleArgs),
    /// Two-sided digit envelope and a sampled member.
    Envelope(EnvelopeArgs),
    /// Hypothesis check for the covering lemma.
    Lemma55(Lemma55Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Expand(_) => "expand",
            Command::MeasureProductSet(_) => "measure-product-set",
            Command::Expectation(_) => "expectation",
            Command::WeakLaw(_) => "weak-law",
            Command::TrimmedLaw(_) => "trimmed-law",
            Command::Baselines(_) => "baselines",
            Command::RunningMax(_) => "running-max",
            Command::DivisorCheck(_) => "divisor-check",
            Command::CompositionCheck(_) => "composition-check",
            Command::Falconer(_) => "falconer",
            Command::Schedule(_) => "schedule",
            Command::Envelope(_) => "envelope",
            Command::Lemma55(_) => "lemma55",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Expand(a) => a.seed,
            Command::WeakLaw(a) | Command::TrimmedLaw(a) | Command::Baselines(a) | Command::RunningMax(a) => {
                Some(a.seed)
            }
            Command::Schedule(a) => Some(a.filler_seed),
            Command::Envelope(a) => Some(a.seed),
            _ => None,
        }
    }
}

fn parse_law(s: &str) -> Result<Law, String> {
    s.parse().map_err(|e: cflab::CfError| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct ExpandArgs {
    #[arg(long, requires = "den", conflicts_with = "seed")]
    pub num: Option<String>,
    #[arg(long, requires = "num")]
    pub den: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, default_value = "lebesgue", value_parser = parse_law)]
    pub law: Law,
    /// Number of digits (a cap for rationals).
    #[arg(long, default_value_t = 20)]
    pub digits: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ProductSetArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpectationArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub threshold: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [1000u64, 10_000, 100_000])]
    pub n_grid: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "lebesgue", value_parser = parse_law)]
    pub law: Law,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.625)]
    pub truncation_exponent: f64,
    #[arg(long, default_value_t = 1.6)]
    pub spike_exponent: f64,
}

impl ExperimentArgs {
    pub fn config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.law, self.trials, self.n_grid.clone(), self.seed);
        c.epsilon = self.epsilon;
        c.truncation_exponent = self.truncation_exponent;
        c.spike_exponent = self.spike_exponent;
        c
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DivisorArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub limit: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct CompositionArgs {
    #[arg(long)]
    pub n_max: u64,
    #[arg(long)]
    pub m_max: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub s_list: Vec<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// phi(n) = exp(n^alpha)
    Sub,
    /// phi(n) = exp(alpha^n)
    Super,
    /// phi(n) = exp(alpha n)
    Exp,
}

fn growth(family: Family, alpha: f64) -> GrowthFunction {
    match family {
        Family::Sub => GrowthFunction::SubExponential { alpha },
        Family::Super => GrowthFunction::SuperExponential { alpha },
        Family::Exp => GrowthFunction::Exponential { rate: alpha },
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FalconerArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub horizon: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScheduleArgs {
    #[arg(long, value_enum, default_value = "sub")]
    pub family: Family,
    #[arg(long)]
    pub alpha: f64,
    /// Filler digit cap.
    #[arg(long = "M", visible_alias = "digit-cap", default_value_t = 3)]
    pub digit_cap: u64,
    #[arg(long)]
    pub tau: f64,
    /// Omit to use the midpoint of the admissible interval.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 1)]
    pub filler_seed: u64,
    /// Spikes re-checked on the sampled point.
    #[arg(long, default_value_t = 20)]
    pub k_max: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EnvelopeArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub horizon: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Indices at which S_n / phi(n) is reported; defaults to powers of ten.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<u64>,
    /// Level for covering statistics.
    #[arg(long)]
    pub covering_level: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct Lemma55Args {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.75)]
    pub s: f64,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    /// `power:<exponent>` for floor(k^exponent) or `linear:<step>`.
    #[arg(long)]
    pub nk_rule: NkRule,
    #[arg(long, default_value_t = 1_000_000)]
    pub horizon: u64,
}

/// Result of one subcommand.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub report: serde_json::Value,
    pub summary: String,
    /// A verified inequality failed.
    pub violated: bool,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Expand(a) => expand(a),
        Command::MeasureProductSet(a) => measure_product_set(a),
        Command::Expectation(a) => expectation(a),
        Command::WeakLaw(a) => experiment(weak_law_experiment(&a.config())?),
        Command::TrimmedLaw(a) => experiment(trimmed_law_experiment(&a.config())?),
        Command::Baselines(a) => experiment(baseline_experiments(&a.config())?),
        Command::RunningMax(a) => experiment(running_max_experiment(&a.config())?),
        Command::DivisorCheck(a) => divisor_check(a),
        Command::CompositionCheck(a) => composition_check(a),
        Command::Falconer(a) => falconer(a),
        Command::Schedule(a) => schedule(a),
        Command::Envelope(a) => envelope(a),
        Command::Lemma55(a) => lemma55(a),
    }
}

fn expand(a: &ExpandArgs) -> Result<Outcome, CliError> {
    let (digits, source) = match (&a.num, &a.den, a.seed) {
        (Some(n), Some(d), _) => {
            let parse = |s: &str| {
                s.parse::<BigInt>().map_err(|_| CliError::Usage(format!("`{s}` is not an integer")))
            };
            let seq = expand_rational(&parse(n)?, &parse(d)?, a.digits)?;
            (seq.into_vec(), json!({"numerator": n, "denominator": d}))
        }
        (None, None, Some(seed)) => {
            let digits = RandomRealStream::with_stream(seed, a.stream, a.law)
                .take(a.digits)
                .collect::<Result<Vec<_>, _>>()?;
            (digits, json!({"seed": seed, "stream": a.stream, "law": a.law}))
        }
        _ => return Err(CliError::Usage("give either --num and --den or --seed".into())),
    };
    let mut table = Table::new(&["index", "digit"]);
    for (i, d) in digits.iter().enumerate() {
        table.push(vec![(i as u64 + 1).into(), (*d).into()]);
    }
    let summary = digits.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    Ok(Outcome { table, report: json!({"source": source, "digits": digits}), summary, violated: false })
}

fn measure_product_set(a: &ProductSetArgs) -> Result<Outcome, CliError> {
    let mut table = Table::new(&["t", "mu", "mu_error_bound", "lambda", "asymptotic", "residual", "components"]);
    let mut summary = Vec::new();
    for &t in &a.t {
        let set = product_set(t)?;
        let mu = gauss(&set);
        let lambda = lebesgue(&set);
        let residual = product_set_residual(t)?;
        table.push(vec![
            t.into(),
            mu.value.into(),
            mu.error_bound.into(),
            lambda.value.into(),
            asymptotic_product_measure(t).into(),
            residual.into(),
            (set.len() as u64).into(),
        ]);
        summary.push(format!("t={t}: mu={:.7} lambda={:.7}", mu.value, lambda.value));
    }
    let report = json!({ "t": a.t });
    Ok(Outcome { table, report, summary: summary.join("; "), violated: false })
}

fn expectation(a: &ExpectationArgs) -> Result<Outcome, CliError> {
    let mut table = Table::new(&["threshold", "expectation", "error_bound", "normalized", "terms"]);
    let mut summary = Vec::new();
    for &t in &a.threshold {
        let e = truncated_pair_expectation(t)?;
        let normalized = 2.0 * std::f64::consts::LN_2 * e.value / t.ln().powi(2);
        table.push(vec![
            t.into(),
            e.value.into(),
            e.error_bound.into(),
            normalized.into(),
            pair_count(t.floor() as u64).into(),
        ]);
        summary.push(format!("threshold={t}: E={:.6} normalized={normalized:.6}", e.value));
    }
    Ok(Outcome { table, report: json!({ "threshold": a.threshold }), summary: summary.join("; "), violated: false })
}

pub const EXPERIMENT_COLUMNS: [&str; 9] = [
    "experiment",
    "statistic",
    "n",
    "mean",
    "median",
    "std_error",
    "exceed_fraction",
    "exceed_std_error",
    "target",
];

fn experiment(report: ExperimentReport) -> Result<Outcome, CliError> {
    let mut table = Table::new(&EXPERIMENT_COLUMNS);
    for r in &report.rows {
        table.push(vec![
            report.experiment.as_str().into(),
            r.statistic.as_str().into(),
            r.n.into(),
            r.mean.into(),
            r.median.into(),
            r.std_error.into(),
            r.exceed_fraction.into(),
            r.exceed_std_error.into(),
            r.target.into(),
        ]);
    }
    let summary = format!(
        "{}: {} rows, {} trials, config {}",
        report.experiment,
        report.rows.len(),
        report.config.trials,
        &report.config_hash[..12]
    );
    Ok(Outcome { table, report: to_value(&report), summary, violated: false })
}

fn divisor_check(a: &DivisorArgs) -> Result<Outcome, CliError> {
    let c = constructive_c_epsilon(a.epsilon)?;
    let scan = divisor_ratio_scan(a.epsilon, a.limit)?;
    let log2_ratio = scan.max_ratio.log2();
    let holds = log2_ratio <= c.log2_c as f64;
    let mut table =
        Table::new(&["epsilon", "m", "prime", "l0", "log2_c", "limit", "max_ratio", "argmax", "holds"]);
    table.push(vec![
        a.epsilon.into(),
        c.m.into(),
        c.prime.into(),
        c.l0.into(),
        c.log2_c.into(),
        scan.limit.into(),
        scan.max_ratio.into(),
        scan.argmax.into(),
        holds.into(),
    ]);
    let summary = format!(
        "M={} l0={} c=2^{}; max delta(n)/n^eps over n<={} is {:.6} at n={} ({})",
        c.m,
        c.l0,
        c.log2_c,
        scan.limit,
        scan.max_ratio,
        scan.argmax,
        if holds { "holds" } else { "VIOLATED" }
    );
    Ok(Outcome { table, report: json!({"constant": c, "scan": scan}), summary, violated: !holds })
}

fn composition_check(a: &CompositionArgs) -> Result<Outcome, CliError> {
    if a.n_max < 1 || a.m_max < 1 {
        return Err(CliError::Usage("--n-max and --m-max must be at least 1".into()));
    }
    let mut table = Table::new(&["n", "m", "s", "compositions", "sum", "bound", "holds"]);
    let mut failures = 0u64;
    for &s in &a.s_list {
        for n in 1..=a.n_max {
            for m in n..=a.m_max {
                let r = composition_sum(CompositionQuery { n, m, s }, DEFAULT_COMPOSITION_CAP)?;
                failures += u64::from(!r.holds);
                table.push(vec![n.into(), m.into(), s.into(), r.compositions.into(), r.sum.into(), r.bound.into(), r.holds.into()]);
            }
        }
    }
    let summary = format!("{} cases, {failures} violations", table.rows.len());
    Ok(Outcome { table, report: json!({"failures": failures}), summary, violated: failures > 0 })
}

fn falconer(a: &FalconerArgs) -> Result<Outcome, CliError> {
    let g = growth(a.family, a.alpha);
    g.validate()?;
    let e = falconer_from_psi(|n| g.psi(n), a.horizon)?;
    let mut table = Table::new(&["family", "alpha", "horizon", "value", "raw_value", "window_min", "window_max"]);
    table.push(vec![
        format!("{:?}", a.family).to_lowercase().into(),
        a.alpha.into(),
        a.horizon.into(),
        e.value.into(),
        e.raw_value.into(),
        e.window_min.into(),
        e.window_max.into(),
    ]);
    let summary = format!("falconer bound {:.6} at horizon {}", e.value, a.horizon);
    Ok(Outcome { table, report: to_value(&e), summary, violated: false })
}

fn schedule(a: &ScheduleArgs) -> Result<Outcome, CliError> {
    let g = growth(a.family, a.alpha);
    let s = schedule_theorem16(&g, a.digit_cap, a.tau, a.delta, a.horizon)?;
    let m = schedule_membership(&s, a.filler_seed, a.k_max)?;
    let mut table = Table::new(&["k", "n_k", "epsilon_k", "prescribed_digit", "ln_sum", "ln_bound", "holds"]);
    for c in &m.sandwich {
        table.push(vec![
            (c.k as u64).into(),
            c.n_k.into(),
            s.epsilon_seq[c.k - 1].into(),
            s.prescribed[c.k - 1].to_string().into(),
            c.ln_sum.into(),
            c.ln_bound.into(),
            c.holds.into(),
        ]);
    }
    let violated = !m.all_hold();
    let summary = format!(
        "delta={:.6} (admissible {:?}); {} spikes up to {}; membership {}",
        s.delta,
        feasible_delta(a.tau).map(|(_, hi)| hi),
        s.n_seq.len(),
        a.horizon,
        if violated { "VIOLATED" } else { "holds" }
    );
    let report = json!({
        "schedule": s,
        "admissible_delta": feasible_delta(a.tau),
        "membership": m,
    });
    Ok(Outcome { table, report, summary, violated })
}

fn envelope(a: &EnvelopeArgs) -> Result<Outcome, CliError> {
    let g = growth(a.family, a.alpha);
    let env = envelope_theorem17_18(&g, a.horizon)?;
    let grid: Vec<u64> = if a.grid.is_empty() {
        std::iter::successors(Some(10u64), |x| x.checked_mul(10)).take_while(|&x| x < a.horizon).collect()
    } else {
        a.grid.clone()
    };
    let m = envelope_membership(&env, a.seed, &grid)?;
    let mut table = Table::new(&["n", "ln_d", "ratio", "deviation"]);
    for &(n, ratio) in &m.ratios {
        table.push(vec![n.into(), env.ln_d(n).into(), ratio.into(), (ratio - 1.0).abs().into()]);
    }
    let covering = a.covering_level.map(|l| covering_statistics(&env, l)).transpose()?;
    let violated = !(m.in_range && m.ranges_inside);
    let summary = format!(
        "threshold N={}; {} widened ranges; digits {}",
        env.threshold,
        env.widened.len(),
        if violated { "OUT OF RANGE" } else { "in range" }
    );
    let report = json!({
        "growth": env.growth,
        "horizon": env.horizon,
        "threshold": env.threshold,
        "widened": env.widened,
        "membership": m,
        "covering": covering,
    });
    Ok(Outcome { table, report, summary, violated })
}

fn lemma55(a: &Lemma55Args) -> Result<Outcome, CliError> {
    let g = growth(a.family, a.alpha);
    let r = check_lemma55_hypotheses(&g, a.nk_rule, a.s, a.epsilon, a.horizon)?;
    let mut table = Table::new(&[
        "s",
        "epsilon",
        "m_constant",
        "k_max",
        "first_k",
        "min_ratio",
        "min_increment",
        "precondition_failure",
        "established",
    ]);
    table.push(vec![
        a.s.into(),
        a.epsilon.into(),
        r.m_constant.into(),
        r.k_max.into(),
        r.first_k.into(),
        r.min_ratio.into(),
        r.min_increment.into(),
        r.precondition_failure.into(),
        r.established.into(),
    ]);
    let summary = match r.first_k {
        Some(k) if r.established => format!("M={:.4}; hypotheses hold for {k} <= k <= {}", r.m_constant, r.k_max),
        _ if r.precondition_failure => "n_k - n_(k-1) >= 2 fails; not established".to_string(),
        _ => format!("M={:.4}; not established within the horizon", r.m_constant),
    };
    Ok(Outcome { table, report: to_value(&r), summary, violated: false })
}
