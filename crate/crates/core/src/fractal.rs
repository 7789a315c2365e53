//! Cantor constructions inside level sets of `S_n / phi(n)`: the sparse spike
//! schedule with bounded fillers, the two-sided digit envelope, Falconer-type
//! dimension lower bounds and the hypothesis checks for the covering argument.

use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::arith::{constructive_c_epsilon, zeta, ArithError};
use crate::cf::{CfError, DigitSource};
use crate::numeric::{exp_ceil, exp_floor, ln_biguint, ln_diff_exp, uniform_between, NeumaierSum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FractalError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit: {0}")]
    Resource(String),
}

impl From<ArithError> for FractalError {
    fn from(e: ArithError) -> Self {
        match e {
            ArithError::Domain(m) => FractalError::Domain(m),
            ArithError::Resource(m) => FractalError::Resource(m),
        }
    }
}

/// A growth function `phi`, described through `psi = log phi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GrowthFunction {
    /// `phi(n) = exp(n^alpha)`.
    SubExponential { alpha: f64 },
    /// `phi(n) = exp(alpha^n)`.
    SuperExponential { alpha: f64 },
    /// `phi(n) = exp(rate n)`.
    Exponential { rate: f64 },
    /// `psi(n)` given for `n = 1..=len`.
    Tabulated { psi: Vec<f64> },
}

impl GrowthFunction {
    pub fn validate(&self) -> Result<(), FractalError> {
        let ok = match self {
            GrowthFunction::SubExponential { alpha } => *alpha > 0.0 && alpha.is_finite(),
            GrowthFunction::SuperExponential { alpha } => *alpha > 1.0 && alpha.is_finite(),
            GrowthFunction::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            GrowthFunction::Tabulated { psi } => {
                !psi.is_empty()
                    && psi.iter().all(|v| v.is_finite())
                    && psi.windows(2).all(|w| w[0] < w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(FractalError::Config(format!("invalid growth function {self:?}")))
        }
    }

    /// Largest index with a defined value.
    pub fn max_index(&self) -> u64 {
        match self {
            GrowthFunction::Tabulated { psi } => psi.len() as u64,
            _ => u64::MAX,
        }
    }

    /// `psi(n) = log phi(n)`; may be infinite for large super-exponential `n`.
    pub fn psi(&self, n: u64) -> f64 {
        let x = n as f64;
        match self {
            GrowthFunction::SubExponential { alpha } => x.powf(*alpha),
            GrowthFunction::SuperExponential { alpha } => alpha.powf(x),
            GrowthFunction::Exponential { rate } => rate * x,
            GrowthFunction::Tabulated { psi } => {
                psi.get((n as usize).wrapping_sub(1)).copied().unwrap_or(f64::NAN)
            }
        }
    }

    /// `log psi(n)`, finite even where `psi` overflows.
    pub fn ln_psi(&self, n: u64) -> f64 {
        let x = n as f64;
        match self {
            GrowthFunction::SubExponential { alpha } => alpha * x.ln(),
            GrowthFunction::SuperExponential { alpha } => x * alpha.ln(),
            _ => self.psi(n).ln(),
        }
    }

    /// `x_n = psi(n) - psi(n - 1)`.
    pub fn increment(&self, n: u64) -> f64 {
        self.psi(n) - self.psi(n - 1)
    }

    pub fn phi(&self, n: u64) -> f64 {
        self.psi(n).exp()
    }

    /// `log(phi(n) - phi(n-1))` for `n >= 2`.
    pub fn ln_phi_step(&self, n: u64) -> f64 {
        ln_diff_exp(self.psi(n), self.psi(n - 1))
    }

    fn check_horizon(&self, horizon: u64) -> Result<(), FractalError> {
        self.validate()?;
        if horizon > self.max_index() {
            return Err(FractalError::Config(format!(
                "horizon {horizon} exceeds the table length {}",
                self.max_index()
            )));
        }
        if !self.psi(horizon).is_finite() {
            return Err(FractalError::Resource(format!("psi({horizon}) overflows")));
        }
        Ok(())
    }
}

/// How `n_1` was certified.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCheck {
    /// Window check plus monotonicity of `psi(n) / n^{1/2 - tau}` for the family.
    Symbolic,
    /// Window check only.
    WindowOnly { warning: String },
}

/// The spike schedule `n_k` with prescribed digits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparseSchedule {
    pub growth: GrowthFunction,
    pub tau: f64,
    pub delta: f64,
    pub digit_cap: u64,
    pub horizon: u64,
    pub n_seq: Vec<u64>,
    pub epsilon_seq: Vec<f64>,
    #[serde(skip)]
    pub prescribed: Vec<BigUint>,
    pub tail_check: TailCheck,
}

impl SparseSchedule {
    /// `r(n)`, the number of `n_k <= n`.
    pub fn r(&self, n: u64) -> usize {
        self.n_seq.partition_point(|&m| m <= n)
    }

    /// `k` with `n_k = n` (1-based), if any.
    pub fn spike_index(&self, n: u64) -> Option<usize> {
        self.n_seq.binary_search(&n).ok().map(|i| i + 1)
    }

    /// `log((1 + eps_k) phi(n_k))`, 1-based `k`.
    pub fn ln_target(&self, k: usize) -> f64 {
        self.epsilon_seq[k - 1].ln_1p() + self.growth.psi(self.n_seq[k - 1])
    }
}

/// Left condition of the spacing inequality, `(1 + 1/(1-delta))(1/2 - tau)`.
pub fn spacing_condition(tau: f64, delta: f64) -> f64 {
    (1.0 + 1.0 / (1.0 - delta)) * (0.5 - tau)
}

/// The open interval `(0, delta_max)` of admissible `delta`, if nonempty.
pub fn feasible_delta(tau: f64) -> Option<(f64, f64)> {
    if !(tau > 0.0 && tau < 0.5) {
        return None;
    }
    let slack = 1.0 / (0.5 - tau) - 1.0;
    let delta_max = 1.0 - 1.0 / slack;
    (delta_max > 0.0).then_some((0.0, delta_max.min(1.0)))
}

fn find_n1(phi: &GrowthFunction, tau: f64, horizon: u64) -> Result<u64, FractalError> {
    let below = |n: u64| phi.psi(n) < (n as f64).powf(0.5 - tau);
    let mut n1 = 3u64;
    'outer: while n1 <= horizon {
        let end = (10 * n1).min(phi.max_index());
        for n in n1..=end {
            if !below(n) {
                n1 = n + 1;
                continue 'outer;
            }
        }
        return Ok(n1);
    }
    Err(FractalError::Domain("log phi(n) < n^(1/2 - tau) never settles within the horizon".into()))
}

/// The spike schedule for the full-dimension construction.
///
/// `delta = None` picks the midpoint of the admissible interval.
pub fn schedule_theorem16(
    phi: &GrowthFunction,
    digit_cap: u64,
    tau: f64,
    delta: Option<f64>,
    horizon: u64,
) -> Result<SparseSchedule, FractalError> {
    phi.check_horizon(horizon)?;
    if digit_cap < 1 {
        return Err(FractalError::Config("digit cap must be at least 1".into()));
    }
    if !(tau > 0.0 && tau < 0.5) {
        return Err(FractalError::Config(format!("tau must lie in (0, 1/2), got {tau}")));
    }
    let delta = match delta {
        Some(d) => d,
        None => {
            let (_, hi) = feasible_delta(tau)
                .ok_or_else(|| FractalError::Config(format!("no admissible delta for tau = {tau}")))?;
            hi / 2.0
        }
    };
    if !(delta > 0.0 && delta < 1.0) || spacing_condition(tau, delta) >= 1.0 {
        return Err(FractalError::Config(format!(
            "delta = {delta} violates (1 + 1/(1-delta))(1/2 - tau) < 1 (admissible: {:?})",
            feasible_delta(tau)
        )));
    }
    let tail_check = match phi {
        GrowthFunction::SubExponential { alpha } => {
            if *alpha >= 0.5 {
                return Err(FractalError::Domain(format!(
                    "limsup log log phi / log n = {alpha} is not below 1/2"
                )));
            }
            if *alpha >= 0.5 - tau {
                return Err(FractalError::Config(format!(
                    "tau = {tau} too large: need alpha = {alpha} < 1/2 - tau"
                )));
            }
            TailCheck::Symbolic
        }
        GrowthFunction::SuperExponential { .. } | GrowthFunction::Exponential { .. } => {
            return Err(FractalError::Domain("phi(n+1)/phi(n) does not tend to 1".into()));
        }
        GrowthFunction::Tabulated { .. } => TailCheck::WindowOnly {
            warning: "tabulated growth: the tail condition is only checked on [n1, 10 n1]".into(),
        },
    };
    let n1 = find_n1(phi, tau, horizon)?;
    let eps = |k: usize| (k as f64).powf(-delta);
    let mut n_seq = vec![n1];
    let mut epsilon_seq = vec![eps(1)];
    loop {
        let k = n_seq.len();
        let prev = n_seq[k - 1];
        let need = eps(k).ln_1p() + phi.psi(prev);
        let mut n = prev + 4;
        while n <= horizon && phi.psi(n) < need {
            n += 1;
        }
        if n > horizon {
            break;
        }
        n_seq.push(n);
        epsilon_seq.push(eps(k + 1));
    }
    let mut prescribed = Vec::with_capacity(n_seq.len());
    for k in 0..n_seq.len() {
        let cur = epsilon_seq[k].ln_1p() + phi.psi(n_seq[k]);
        let ln_y = if k == 0 {
            cur
        } else {
            ln_diff_exp(cur, epsilon_seq[k - 1].ln_1p() + phi.psi(n_seq[k - 1]))
        };
        prescribed.push(exp_floor(ln_y - LN_2) + 1u32);
    }
    Ok(SparseSchedule {
        growth: phi.clone(),
        tau,
        delta,
        digit_cap,
        horizon,
        n_seq,
        epsilon_seq,
        prescribed,
        tail_check,
    })
}

/// Digits of a point of the spike construction: prescribed spikes, ones next to
/// them and uniform fillers in `[1, M]`.
#[derive(Clone, Debug)]
pub struct ScheduleSampler<'a> {
    schedule: &'a SparseSchedule,
    rng: ChaCha8Rng,
    pos: u64,
}

pub fn sample_e_phi_m(schedule: &SparseSchedule, filler_seed: u64) -> ScheduleSampler<'_> {
    ScheduleSampler { schedule, rng: ChaCha8Rng::seed_from_u64(filler_seed), pos: 0 }
}

impl ScheduleSampler<'_> {
    /// Next digit, or `None` past the schedule horizon.
    pub fn next_big(&mut self) -> Option<BigUint> {
        if self.pos >= self.schedule.horizon {
            return None;
        }
        self.pos += 1;
        let n = self.pos;
        let s = self.schedule;
        if let Some(k) = s.spike_index(n) {
            return Some(s.prescribed[k - 1].clone());
        }
        if s.spike_index(n + 1).is_some() || (n > 1 && s.spike_index(n - 1).is_some()) {
            return Some(BigUint::one());
        }
        let one = BigUint::one();
        Some(uniform_between(&mut self.rng, &one, &BigUint::from(s.digit_cap)))
    }
}

impl Iterator for ScheduleSampler<'_> {
    type Item = BigUint;
    fn next(&mut self) -> Option<BigUint> {
        self.next_big()
    }
}

impl DigitSource for ScheduleSampler<'_> {
    fn next_digit(&mut self) -> Result<u64, CfError> {
        let pos = self.pos;
        self.next_big().ok_or(CfError::Exhausted(pos))?.to_u64().ok_or(CfError::DigitOverflow)
    }
}

/// `S_{n_k}` against `(1 + eps_k) phi(n_k)` for one spike.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichCheck {
    pub k: usize,
    pub n_k: u64,
    pub ln_sum: f64,
    pub ln_bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleMembership {
    pub prescribed_ok: bool,
    pub neighbours_ok: bool,
    pub fillers_ok: bool,
    pub sandwich: Vec<SandwichCheck>,
}

impl ScheduleMembership {
    pub fn all_hold(&self) -> bool {
        self.prescribed_ok && self.neighbours_ok && self.fillers_ok && self.sandwich.iter().all(|c| c.holds)
    }
}

/// Samples a point and re-checks its digits and the lower sandwich bound for `k <= k_max`.
pub fn schedule_membership(
    schedule: &SparseSchedule,
    filler_seed: u64,
    k_max: usize,
) -> Result<ScheduleMembership, FractalError> {
    let k_max = k_max.min(schedule.n_seq.len());
    if k_max == 0 {
        return Err(FractalError::Resource("no spikes within the horizon".into()));
    }
    let last = schedule.n_seq[k_max - 1] + 1;
    if last > schedule.horizon {
        return Err(FractalError::Resource("horizon too short for the last spike".into()));
    }
    let digits: Vec<BigUint> = sample_e_phi_m(schedule, filler_seed).take(last as usize).collect();
    let at = |n: u64| &digits[(n - 1) as usize];
    let one = BigUint::one();
    let cap = BigUint::from(schedule.digit_cap);
    let mut prescribed_ok = true;
    let mut neighbours_ok = true;
    for k in 1..=k_max {
        let n = schedule.n_seq[k - 1];
        prescribed_ok &= at(n) == &schedule.prescribed[k - 1];
        neighbours_ok &= at(n - 1) == &one && at(n + 1) == &one;
    }
    let fillers_ok = (1..=last)
        .filter(|&n| (n..=n + 2).all(|m| m < 2 || schedule.spike_index(m - 1).is_none()))
        .all(|n| at(n) >= &one && at(n) <= &cap);
    let mut sandwich = Vec::new();
    let mut sum = BigUint::from(0u8);
    let mut k = 0usize;
    for i in 1..last {
        sum += at(i) * at(i + 1);
        if k < k_max && i == schedule.n_seq[k] {
            k += 1;
            let ln_sum = ln_biguint(&sum);
            let ln_bound = schedule.ln_target(k);
            let holds = ln_sum >= ln_bound - 1e-12 * ln_bound.abs().max(1.0);
            sandwich.push(SandwichCheck { k, n_k: i, ln_sum, ln_bound, holds });
        }
    }
    Ok(ScheduleMembership { prescribed_ok, neighbours_ok, fillers_ok, sandwich })
}

/// The two-sided digit envelope `d_n <= a_n <= (1 + 1/psi(n)) d_n` for `n > N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DigitEnvelope {
    pub growth: GrowthFunction,
    pub horizon: u64,
    /// `log d_n` for `n = 1..=horizon` (index `n - 1`).
    pub ln_d: Vec<f64>,
    /// Digits are 1 up to and including this index.
    pub threshold: u64,
    /// Indices whose integer range was empty and got widened.
    pub widened: Vec<u64>,
}

const EXACT_RANGE_LN: f64 = 34.0;
const MAX_RANGE_LN: f64 = 1.0e5;

impl DigitEnvelope {
    pub fn ln_d(&self, n: u64) -> f64 {
        self.ln_d[(n - 1) as usize]
    }

    /// `log((1 + 1/psi(n)) d_n)`.
    pub fn ln_upper(&self, n: u64) -> f64 {
        self.ln_d(n) + (1.0 / self.growth.psi(n)).ln_1p()
    }

    /// Integer digit range at `n > N`.
    pub fn digit_range(&self, n: u64) -> Result<(BigUint, BigUint), FractalError> {
        if n <= self.threshold || n > self.horizon {
            return Err(FractalError::Domain(format!("index {n} outside ({}, {}]", self.threshold, self.horizon)));
        }
        if self.ln_upper(n) > MAX_RANGE_LN {
            return Err(FractalError::Resource(format!("digits at index {n} are too large to materialize")));
        }
        let lo = exp_ceil(self.ln_d(n));
        let mut hi = exp_floor(self.ln_upper(n));
        if hi < lo {
            hi += 1u32;
        }
        Ok((lo, hi))
    }

    /// `log m` where `m` counts the admissible digits at absolute index `n`.
    pub fn ln_count(&self, n: u64) -> f64 {
        if self.ln_upper(n) < EXACT_RANGE_LN {
            let (lo, hi) = self.digit_range(n).expect("small range");
            ln_biguint(&(hi - lo + 1u32))
        } else {
            self.ln_d(n) - self.growth.ln_psi(n)
        }
    }

    /// `log eps_n`, the gap lower bound at level `n` (absolute index `N + n`).
    pub fn ln_gap(&self, level: u64) -> f64 {
        let nn = self.threshold;
        let s: NeumaierSum = (1..=level).map(|i| self.ln_upper(nn + i)).collect();
        -2.0 * (nn + level + 2) as f64 * LN_2 - 2.0 * s.value()
    }

    /// Largest level whose data lies within the horizon.
    pub fn max_level(&self) -> u64 {
        self.horizon - self.threshold
    }
}

/// Builds `d_n` from `d_1 = 1`, `d_2 = phi(1)`, `d_n d_{n+1} = phi(n) - phi(n-1)` in log space.
pub fn envelope_theorem17_18(phi: &GrowthFunction, horizon: u64) -> Result<DigitEnvelope, FractalError> {
    if horizon < 3 {
        return Err(FractalError::Config("horizon must be at least 3".into()));
    }
    phi.check_horizon(horizon)?;
    let mut ln_d = Vec::with_capacity(horizon as usize);
    ln_d.push(0.0);
    ln_d.push(phi.psi(1));
    for n in 2..horizon {
        if !(phi.psi(n) > phi.psi(n - 1)) {
            return Err(FractalError::Domain(format!("phi is not increasing at {n}")));
        }
        let step = phi.ln_phi_step(n);
        ln_d.push(step - ln_d[(n - 1) as usize]);
    }
    let bad = |n: u64| {
        let l = ln_d[(n - 1) as usize];
        let psi = phi.psi(n);
        !(psi > 0.0) || l < LN_2 || l - phi.ln_psi(n) < LN_2
    };
    let threshold = (1..=horizon).rev().find(|&n| bad(n)).unwrap_or(0);
    if threshold + 2 > horizon {
        return Err(FractalError::Resource(format!(
            "no threshold index found within horizon {horizon}"
        )));
    }
    let mut env = DigitEnvelope { growth: phi.clone(), horizon, ln_d, threshold, widened: Vec::new() };
    for n in threshold + 1..=horizon {
        if env.ln_upper(n) >= EXACT_RANGE_LN {
            break;
        }
        let lo = exp_ceil(env.ln_d(n));
        let hi = exp_floor(env.ln_upper(n));
        if hi < lo {
            env.widened.push(n);
        }
    }
    Ok(env)
}

/// Digits of a point of the envelope set.
#[derive(Clone, Debug)]
pub struct EnvelopeSampler<'a> {
    envelope: &'a DigitEnvelope,
    rng: ChaCha8Rng,
    pos: u64,
}

pub fn sample_e_envelope(envelope: &DigitEnvelope, seed: u64) -> EnvelopeSampler<'_> {
    EnvelopeSampler { envelope, rng: ChaCha8Rng::seed_from_u64(seed), pos: 0 }
}

impl EnvelopeSampler<'_> {
    pub fn next_big(&mut self) -> Option<Result<BigUint, FractalError>> {
        if self.pos >= self.envelope.horizon {
            return None;
        }
        self.pos += 1;
        if self.pos <= self.envelope.threshold {
            return Some(Ok(BigUint::one()));
        }
        Some(self.envelope.digit_range(self.pos).map(|(lo, hi)| uniform_between(&mut self.rng, &lo, &hi)))
    }
}

impl Iterator for EnvelopeSampler<'_> {
    type Item = Result<BigUint, FractalError>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_big()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeMembership {
    pub threshold: u64,
    /// Every digit past the threshold lies in its integer range.
    pub in_range: bool,
    /// The integer ranges sit inside the real ranges (log-space check).
    pub ranges_inside: bool,
    /// `(n, S_n / phi(n))`.
    pub ratios: Vec<(u64, f64)>,
}

/// Samples an envelope point and reports `S_n / phi(n)` at the grid points.
pub fn envelope_membership(
    envelope: &DigitEnvelope,
    seed: u64,
    grid: &[u64],
) -> Result<EnvelopeMembership, FractalError> {
    let last = grid.iter().copied().max().unwrap_or(0);
    if last + 1 > envelope.horizon {
        return Err(FractalError::Config("grid needs index n + 1 within the horizon".into()));
    }
    let digits: Vec<BigUint> =
        sample_e_envelope(envelope, seed).take((last + 1) as usize).collect::<Result<_, _>>()?;
    let mut in_range = true;
    let mut ranges_inside = true;
    for n in envelope.threshold + 1..=last + 1 {
        let (lo, hi) = envelope.digit_range(n)?;
        let a = &digits[(n - 1) as usize];
        in_range &= &lo <= a && a <= &hi;
        let tol = 1e-12 * envelope.ln_upper(n).abs().max(1.0);
        ranges_inside &= ln_biguint(&lo) >= envelope.ln_d(n) - tol && ln_biguint(&hi) <= envelope.ln_upper(n) + tol;
    }
    let mut ratios = Vec::new();
    let mut sum = BigUint::from(0u8);
    for i in 1..=last {
        sum += &digits[(i - 1) as usize] * &digits[i as usize];
        if grid.contains(&i) {
            ratios.push((i, (ln_biguint(&sum) - envelope.growth.psi(i)).exp()));
        }
    }
    Ok(EnvelopeMembership { threshold: envelope.threshold, in_range, ranges_inside, ratios })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMethod {
    Falconer,
    CoveringSlope,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    /// Bound evaluated at the horizon, clipped to `[0, 1]`.
    pub value: f64,
    pub raw_value: f64,
    pub method: DimensionMethod,
    pub horizon: u64,
    /// Range of the evaluated ratio over the last 10% of indices.
    pub window_min: f64,
    pub window_max: f64,
}

fn estimate(ratios: &[f64], horizon: u64, method: DimensionMethod) -> Result<DimensionEstimate, FractalError> {
    let raw = *ratios.last().ok_or_else(|| FractalError::Config("empty sequence".into()))?;
    if !raw.is_finite() {
        return Err(FractalError::Domain("ratio is not finite".into()));
    }
    let start = ratios.len() - (ratios.len() / 10).max(1);
    let window = &ratios[start..];
    Ok(DimensionEstimate {
        value: raw.clamp(0.0, 1.0),
        raw_value: raw,
        method,
        horizon,
        window_min: window.iter().copied().fold(f64::INFINITY, f64::min),
        window_max: window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `sum_{k<n} psi(k) / (psi(n) + 2 sum_{k<n} psi(k))` at `n = horizon`.
pub fn falconer_from_psi(psi: impl Fn(u64) -> f64, horizon: u64) -> Result<DimensionEstimate, FractalError> {
    if horizon < 2 {
        return Err(FractalError::Config("horizon must be at least 2".into()));
    }
    let mut acc = NeumaierSum::new();
    acc.add(psi(1));
    let mut ratios = Vec::with_capacity(horizon as usize);
    for n in 2..=horizon {
        let a = acc.value();
        let p = psi(n);
        ratios.push(a / (p + 2.0 * a));
        acc.add(p);
    }
    estimate(&ratios, horizon, DimensionMethod::Falconer)
}

/// `log(m_1...m_{n-1}) / -log(m_n eps_n)` at the last level, from `log m_n` and `log eps_n`.
pub fn falconer_from_levels(ln_m: &[f64], ln_gap: &[f64]) -> Result<DimensionEstimate, FractalError> {
    if ln_m.len() != ln_gap.len() || ln_m.len() < 2 {
        return Err(FractalError::Config("need matching sequences of length at least 2".into()));
    }
    if let Some(i) = ln_m.iter().position(|&l| l < LN_2 - 1e-12) {
        return Err(FractalError::Domain(format!("m_{} < 2", i + 1)));
    }
    if ln_gap.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(FractalError::Domain("gaps must be strictly decreasing".into()));
    }
    let mut acc = NeumaierSum::new();
    let mut ratios = Vec::with_capacity(ln_m.len());
    for n in 1..ln_m.len() {
        acc.add(ln_m[n - 1]);
        ratios.push(acc.value() / -(ln_m[n] + ln_gap[n]));
    }
    estimate(&ratios, ln_m.len() as u64, DimensionMethod::Falconer)
}

/// Level-`n` covering data of the envelope construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringStats {
    pub level: u64,
    /// `log prod_{i<=n} m_i`.
    pub ln_count: f64,
    /// Upper bound on the length of a level-`n` interval.
    pub ln_length_max: f64,
    /// Lower bound on the length of a level-`n` interval.
    pub ln_length_min: f64,
    /// Lower bound on gaps between level-`n` intervals.
    pub ln_gap: f64,
    /// `log(m_1...m_{n-1}) / -log(m_n eps_n)`.
    pub slope: f64,
}

pub fn covering_statistics(env: &DigitEnvelope, level: u64) -> Result<CoveringStats, FractalError> {
    if level < 1 || level + 1 > env.max_level() {
        return Err(FractalError::Config(format!("level must lie in [1, {}]", env.max_level().saturating_sub(1))));
    }
    let nn = env.threshold;
    let counts: Vec<f64> = (1..=level).map(|i| env.ln_count(nn + i)).collect();
    let ln_count: f64 = counts.iter().copied().collect::<NeumaierSum>().value();
    let ln_length_max = -2.0 * (1..=level).map(|i| env.ln_d(nn + i)).collect::<NeumaierSum>().value();
    let upper: f64 = (1..=level + 1).map(|i| env.ln_upper(nn + i)).collect::<NeumaierSum>().value();
    let ln_length_min = -((2 * (nn + level + 1) + 1) as f64) * LN_2 - 2.0 * upper;
    let ln_gap = env.ln_gap(level);
    let prior = ln_count - counts[counts.len() - 1];
    let slope = prior / -(counts[counts.len() - 1] + ln_gap);
    Ok(CoveringStats { level, ln_count, ln_length_max, ln_length_min, ln_gap, slope })
}

/// Rule generating the subsequence `n_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum NkRule {
    /// `n_k = floor(k^exponent)`.
    PowerFloor { exponent: f64 },
    /// `n_k = step k`.
    Linear { step: u64 },
}

impl NkRule {
    pub fn at(&self, k: u64) -> u64 {
        match self {
            NkRule::PowerFloor { exponent } => (k as f64).powf(*exponent).floor() as u64,
            NkRule::Linear { step } => step * k,
        }
    }
}

impl std::str::FromStr for NkRule {
    type Err = FractalError;
    fn from_str(s: &str) -> Result<Self, FractalError> {
        let bad = || FractalError::Config(format!("bad n_k rule `{s}`; use power:<exp> or linear:<step>"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "power" => Ok(NkRule::PowerFloor { exponent: arg.parse().map_err(|_| bad())? }),
            "linear" => Ok(NkRule::Linear { step: arg.parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma55Report {
    pub s: f64,
    pub epsilon: f64,
    /// `log2 c_eps`.
    pub log2_c_epsilon: u64,
    pub zeta_value: f64,
    /// `(2s - 1 - eps)^{-1} log(c_eps 4.5 (2 + zeta(2s - eps)))`.
    pub m_constant: f64,
    /// Number of `k >= 1` with `n_k <= horizon`.
    pub k_max: u64,
    /// First `k` from which all three conditions hold up to `k_max`.
    pub first_k: Option<u64>,
    /// Smallest `psi(n_k) - psi(n_{k-1} + 1)` over `[first_k, k_max]`.
    pub min_increment: Option<f64>,
    /// Smallest `psi(n_k) / (n_k - n_{k-1})` over `[first_k, k_max]`.
    pub min_ratio: Option<f64>,
    pub gap_failures: u64,
    pub ratio_failures: u64,
    pub increment_failures: u64,
    /// `n_k - n_{k-1} >= 2` fails at the horizon end, so the rule itself is unusable.
    pub precondition_failure: bool,
    pub established: bool,
}

/// `M = (2s - 1 - eps)^{-1} log(c_eps 4.5 (2 + zeta(2s - eps)))`.
pub fn lemma55_constant(s: f64, epsilon: f64) -> Result<(f64, u64, f64), FractalError> {
    if !(s > 0.5 && s < 1.0) {
        return Err(FractalError::Config(format!("s must lie in (1/2, 1), got {s}")));
    }
    if !(epsilon > 0.0 && epsilon < 2.0 * s - 1.0) {
        return Err(FractalError::Config(format!("epsilon must lie in (0, 2s - 1), got {epsilon}")));
    }
    let c = constructive_c_epsilon(epsilon)?;
    let z = zeta(2.0 * s - epsilon)?;
    let ln_c = c.log2_c as f64 * LN_2;
    Ok(((ln_c + (4.5 * (2.0 + z)).ln()) / (2.0 * s - 1.0 - epsilon), c.log2_c, z))
}

/// Checks the spacing, growth-per-gap and increment conditions along `n_k`.
pub fn check_lemma55_hypotheses(
    phi: &GrowthFunction,
    rule: NkRule,
    s: f64,
    epsilon: f64,
    horizon: u64,
) -> Result<Lemma55Report, FractalError> {
    phi.validate()?;
    if horizon > phi.max_index() {
        return Err(FractalError::Config("horizon exceeds the table".into()));
    }
    let (m_constant, log2_c_epsilon, zeta_value) = lemma55_constant(s, epsilon)?;
    let ln_m = m_constant.ln();
    let mut n_seq = Vec::new();
    let mut k = 1u64;
    loop {
        let n = rule.at(k);
        if n > horizon || n == 0 && k > 1000 {
            break;
        }
        n_seq.push(n);
        k += 1;
    }
    let k_max = n_seq.len() as u64;
    // ok[k - 2] holds for k = 2..=k_max
    let mut checks = Vec::new();
    let (mut gap_failures, mut ratio_failures, mut increment_failures) = (0, 0, 0);
    for k in 2..=k_max as usize {
        let (prev, cur) = (n_seq[k - 2], n_seq[k - 1]);
        let gap_ok = cur >= prev + 2;
        let (ratio, ratio_ok, incr, incr_ok) = if cur > prev && prev >= 1 {
            let ln_ratio = phi.ln_psi(cur) - ((cur - prev) as f64).ln();
            let a = phi.ln_psi(cur);
            let b = phi.ln_psi(prev + 1);
            let incr = if a > b { ln_diff_exp(a, b).exp() } else { -(ln_diff_exp(b, a).exp()) };
            (ln_ratio.exp(), ln_ratio >= ln_m, incr, a > b)
        } else {
            (0.0, false, 0.0, false)
        };
        gap_failures += u64::from(!gap_ok);
        ratio_failures += u64::from(!ratio_ok);
        increment_failures += u64::from(!incr_ok);
        checks.push((gap_ok && ratio_ok && incr_ok, ratio, incr));
    }
    let tail_start = checks.iter().rposition(|c| !c.0).map_or(0, |i| i + 1);
    let first_k = (tail_start < checks.len()).then(|| tail_start as u64 + 2);
    let tail = &checks[tail_start..];
    let min_increment = (!tail.is_empty()).then(|| tail.iter().map(|c| c.2).fold(f64::INFINITY, f64::min));
    let min_ratio = (!tail.is_empty()).then(|| tail.iter().map(|c| c.1).fold(f64::INFINITY, f64::min));
    let precondition_failure = k_max >= 2 && n_seq[k_max as usize - 1] < n_seq[k_max as usize - 2] + 2;
    let needed = (checks.len() / 10).max(3);
    let established = first_k.is_some() && tail.len() >= needed;
    Ok(Lemma55Report {
        s,
        epsilon,
        log2_c_epsilon,
        zeta_value,
        m_constant,
        k_max,
        first_k,
        min_increment,
        min_ratio,
        gap_failures,
        ratio_failures,
        increment_failures,
        precondition_failure,
        established,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_families() {
        let g = GrowthFunction::SubExponential { alpha: 0.5 };
        assert!((g.psi(4) - 2.0).abs() < 1e-15);
        assert!((g.ln_phi_step(4) - (4f64.sqrt().exp() - 3f64.sqrt().exp()).ln()).abs() < 1e-12);
        let s = GrowthFunction::SuperExponential { alpha: 2.0 };
        assert_eq!(s.psi(10), 1024.0);
        assert!((s.ln_psi(2000) - 2000.0 * LN_2).abs() < 1e-9);
        assert!(GrowthFunction::Tabulated { psi: vec![1.0, 1.0] }.validate().is_err());
        assert!(GrowthFunction::SuperExponential { alpha: 1.0 }.validate().is_err());
    }

    #[test]
    fn delta_feasibility() {
        let (lo, hi) = feasible_delta(0.05).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 2.0 / 11.0).abs() < 1e-12);
        assert!(spacing_condition(0.05, 0.5) > 1.0);
        assert!(spacing_condition(0.05, 0.1) < 1.0);
        let phi = GrowthFunction::SubExponential { alpha: 0.4 };
        assert!(matches!(schedule_theorem16(&phi, 3, 0.05, Some(0.5), 1000), Err(FractalError::Config(_))));
        assert!(matches!(schedule_theorem16(&phi, 3, 0.05, Some(0.95), 1000), Err(FractalError::Config(_))));
        assert!(schedule_theorem16(&phi, 3, 0.05, None, 1000).is_ok());
    }

    #[test]
    fn schedule_rejects_fast_growth() {
        let phi = GrowthFunction::SuperExponential { alpha: 2.0 };
        assert!(matches!(schedule_theorem16(&phi, 3, 0.05, None, 50), Err(FractalError::Domain(_))));
        let phi = GrowthFunction::SubExponential { alpha: 0.6 };
        assert!(matches!(schedule_theorem16(&phi, 3, 0.05, None, 50), Err(FractalError::Domain(_))));
    }

    #[test]
    fn first_prescribed_digit() {
        let phi = GrowthFunction::SubExponential { alpha: 0.4 };
        let s = schedule_theorem16(&phi, 3, 0.05, Some(0.1), 10_000).unwrap();
        assert_eq!(s.n_seq[0], 3);
        let y = (1.0 + 1.0) * 3f64.powf(0.4).exp();
        assert_eq!(s.prescribed[0], BigUint::from((0.5 * y).floor() as u64 + 1));
    }

    #[test]
    fn unit_cap_fillers_are_ones() {
        let phi = GrowthFunction::SubExponential { alpha: 0.4 };
        let s = schedule_theorem16(&phi, 1, 0.05, Some(0.1), 2000).unwrap();
        let spikes: Vec<u64> = s.n_seq.clone();
        for (i, d) in sample_e_phi_m(&s, 7).enumerate() {
            let n = i as u64 + 1;
            if !spikes.contains(&n) {
                assert_eq!(d, BigUint::one());
            }
        }
    }

    #[test]
    fn envelope_small_values() {
        let phi = GrowthFunction::SubExponential { alpha: 0.5 };
        let env = envelope_theorem17_18(&phi, 400).unwrap();
        assert!((env.ln_d(2).exp() - std::f64::consts::E).abs() < 1e-12);
        assert!((env.ln_d(3).exp() - ((2f64.sqrt() - 1.0).exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn falconer_closed_forms() {
        let e = falconer_from_psi(|n| 2f64.powi(n as i32), 60).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() < 1e-6);
        let c = falconer_from_psi(|_| 3.0, 10_000).unwrap();
        assert!((c.value - 0.5).abs() < 1e-3);
    }

    #[test]
    fn falconer_levels_guard() {
        assert!(falconer_from_levels(&[1.0, 0.1], &[-1.0, -2.0]).is_err());
        assert!(falconer_from_levels(&[1.0, 1.0], &[-2.0, -1.0]).is_err());
        let e = falconer_from_levels(&[1.0, 1.0, 1.0], &[-2.0, -4.0, -6.0]).unwrap();
        assert!((e.raw_value - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn nk_rules() {
        assert_eq!("power:1.5".parse::<NkRule>().unwrap(), NkRule::PowerFloor { exponent: 1.5 });
        assert_eq!("linear:2".parse::<NkRule>().unwrap().at(5), 10);
        assert!("cubic:2".parse::<NkRule>().is_err());
    }

    #[test]
    fn lemma55_constant_value() {
        let (m, log2c, z) = lemma55_constant(0.75, 0.25).unwrap();
        assert_eq!(log2c, 119);
        assert!((z - 4.595_111_825_8).abs() < 1e-8);
        let want = (119.0 * LN_2 + (4.5 * (2.0 + z)).ln()) / 0.25;
        assert!((m - want).abs() < 1e-9);
        assert!(lemma55_constant(0.75, 0.6).is_err());
    }
}
