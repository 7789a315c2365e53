//! Lebesgue and Gauss measures of cylinder unions, the exact measure of
//! `{a1 a2 >= t}`, truncated pair expectations and mixing ratios.

use std::f64::consts::LN_2;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::cf::{convergents, DigitSequence};
use crate::numeric::NeumaierSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit: {0}")]
    Resource(String),
}

/// A computed measure (or measure ratio) with an absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureValue {
    pub value: f64,
    pub error_bound: f64,
}

impl MeasureValue {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.error_bound
    }
}

/// An interval with rational endpoints in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational, lo_closed: bool, hi_closed: bool) -> Self {
        Self { lo, hi, lo_closed, hi_closed }
    }

    pub fn open(lo: BigRational, hi: BigRational) -> Self {
        Self::new(lo, hi, false, false)
    }

    pub fn length(&self) -> BigRational {
        &self.hi - &self.lo
    }

    /// Gauss measure of this interval, `log((1+hi)/(1+lo)) / log 2`.
    fn gauss(&self) -> f64 {
        let one = BigRational::one();
        let ratio = self.length() / (&one + &self.lo);
        ratio.to_f64().unwrap_or(f64::NAN).ln_1p() / LN_2
    }
}

/// A finite union of pairwise disjoint intervals, sorted by left endpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntervalUnion {
    parts: Vec<Interval>,
}

impl IntervalUnion {
    /// Sorts, validates and merges touching intervals.
    pub fn new(mut parts: Vec<Interval>) -> Result<Self, MeasureError> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        for p in &parts {
            if p.lo < zero || p.hi > one {
                return Err(MeasureError::Domain("endpoints must lie in [0, 1]".into()));
            }
            if p.lo > p.hi || (p.lo == p.hi && !(p.lo_closed && p.hi_closed)) {
                return Err(MeasureError::Domain("empty interval".into()));
            }
        }
        parts.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for p in parts {
            if let Some(last) = merged.last_mut() {
                if p.lo < last.hi || (p.lo == last.hi && p.lo_closed && last.hi_closed) {
                    return Err(MeasureError::Domain("intervals overlap".into()));
                }
                if p.lo == last.hi && (p.lo_closed || last.hi_closed) {
                    last.hi = p.hi;
                    last.hi_closed = p.hi_closed;
                    continue;
                }
            }
            merged.push(p);
        }
        Ok(Self { parts: merged })
    }

    /// The open unit interval.
    pub fn unit() -> Self {
        Self { parts: vec![Interval::open(BigRational::zero(), BigRational::one())] }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Exact total length.
    pub fn lebesgue_exact(&self) -> BigRational {
        self.parts.iter().fold(BigRational::zero(), |acc, p| acc + p.length())
    }

    /// Component endpoints as floats.
    pub fn bounds_f64(&self) -> Vec<(f64, f64)> {
        self.parts
            .iter()
            .map(|p| (p.lo.to_f64().unwrap_or(0.0), p.hi.to_f64().unwrap_or(1.0)))
            .collect()
    }
}

/// Sum of the exact part lengths, each rounded once.
pub fn lebesgue(u: &IntervalUnion) -> MeasureValue {
    let sum: NeumaierSum = u.parts.iter().map(|p| p.length().to_f64().unwrap_or(f64::NAN)).collect();
    let value = sum.value();
    MeasureValue { value, error_bound: value * f64::EPSILON * (4.0 + u.len() as f64) }
}

pub fn gauss(u: &IntervalUnion) -> MeasureValue {
    let sum: NeumaierSum = u.parts.iter().map(Interval::gauss).collect();
    let value = sum.value();
    MeasureValue { value, error_bound: value * f64::EPSILON * (4.0 + u.len() as f64) }
}

/// Gauss measure of the cylinder `I(i, j)`.
pub fn pair_cylinder_gauss(i: u64, j: u64) -> f64 {
    let ij = i as f64 * j as f64;
    (1.0 / ((ij + i as f64 + 1.0) * (ij + j as f64 + 1.0))).ln_1p() / LN_2
}

fn check_t(t: f64) -> Result<(u64, impl Fn(u64) -> u64), MeasureError> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(MeasureError::Domain(format!("t must be >= 1, got {t}")));
    }
    let floor = t.floor() as u64;
    let integral = t == t.floor();
    let ceil_div = move |a: u64| {
        if integral {
            floor.div_ceil(a)
        } else {
            (t / a as f64).ceil() as u64
        }
    };
    Ok((floor, ceil_div))
}

/// The set `{x : a1(x) a2(x) >= t}` as an exact interval union.
pub fn product_set(t: f64) -> Result<IntervalUnion, MeasureError> {
    let (tf, ceil_div) = check_t(t)?;
    let r = |p: u64, q: u64| BigRational::new(BigInt::from(p), BigInt::from(q));
    let mut parts = vec![Interval::open(BigRational::zero(), r(1, tf + 1))];
    for a in 1..=tf {
        let c = ceil_div(a);
        // 1/(a + 1/c) = c/(ac + 1)
        parts.push(Interval::new(r(c, a * c + 1), r(1, a), true, false));
    }
    IntervalUnion::new(parts)
}

/// Gauss measure of [`product_set`] from the per-block closed form.
pub fn product_set_measure(t: f64) -> Result<MeasureValue, MeasureError> {
    let (tf, ceil_div) = check_t(t)?;
    let mut sum = NeumaierSum::new();
    sum.add((1.0 / (tf as f64 + 1.0)).ln_1p());
    for a in 1..=tf {
        let c = ceil_div(a) as f64;
        let a = a as f64;
        sum.add((1.0 / (a * (a * c + c + 1.0))).ln_1p());
    }
    let value = sum.value() / LN_2;
    Ok(MeasureValue { value, error_bound: value * f64::EPSILON * 8.0 })
}

/// Leading term `log t / (t log 2)` of the measure of `{a1 a2 >= t}`.
pub fn asymptotic_product_measure(t: f64) -> f64 {
    t.ln() / (t * LN_2)
}

/// `mu(product_set(t)) t log 2 - log t`.
pub fn product_set_residual(t: f64) -> Result<f64, MeasureError> {
    Ok(product_set_measure(t)?.value * t * LN_2 - t.ln())
}

/// Default cap on the number of `(i, j)` pairs summed by [`truncated_pair_expectation`].
pub const DEFAULT_MAX_TERMS: u64 = 200_000_000;

/// Number of pairs with `i j <= t`.
pub fn pair_count(t: u64) -> u64 {
    let mut total = 0u64;
    let mut i = 1u64;
    while i <= t {
        let q = t / i;
        let next = t / q + 1;
        total += q * (next - i);
        i = next;
    }
    total
}

/// `sum_{i j <= threshold} i j mu(I(i, j))` with the default term cap.
pub fn truncated_pair_expectation(threshold: f64) -> Result<MeasureValue, MeasureError> {
    truncated_pair_expectation_capped(threshold, DEFAULT_MAX_TERMS)
}

/// Expectation of `a1 a2` truncated at `threshold` under the Gauss measure.
///
/// Terms are accumulated in ascending order of `k = i j`: each block of `k`
/// values is scattered into a buffer and then added with compensation.
pub fn truncated_pair_expectation_capped(
    threshold: f64,
    max_terms: u64,
) -> Result<MeasureValue, MeasureError> {
    if !(threshold >= 1.0) || !threshold.is_finite() {
        return Err(MeasureError::Domain(format!("threshold must be >= 1, got {threshold}")));
    }
    let t = threshold.floor() as u64;
    let terms = pair_count(t);
    if terms > max_terms {
        return Err(MeasureError::Resource(format!(
            "{terms} terms needed for threshold {t}, cap is {max_terms}"
        )));
    }
    const BLOCK: u64 = 1 << 20;
    let mut acc = NeumaierSum::new();
    let mut buf = vec![0.0f64; BLOCK.min(t) as usize];
    let mut k0 = 1u64;
    while k0 <= t {
        let k1 = (k0 + BLOCK).min(t + 1);
        let width = (k1 - k0) as usize;
        buf[..width].iter_mut().for_each(|v| *v = 0.0);
        for i in 1..k1 {
            let jlo = k0.div_ceil(i).max(1);
            let jhi = (k1 - 1) / i;
            for j in jlo..=jhi {
                let k = i * j;
                let denom = (k + i + 1) as f64 * (k + j + 1) as f64;
                buf[(k - k0) as usize] += (1.0 / denom).ln_1p();
            }
        }
        for (off, &m) in buf[..width].iter().enumerate() {
            acc.add((k0 + off as u64) as f64 * m);
        }
        k0 = k1;
    }
    let value = acc.value() / LN_2;
    let error_bound = value * f64::EPSILON * (8.0 + 2.0 * (t as f64).sqrt());
    Ok(MeasureValue { value, error_bound })
}

/// Numerical settings for [`correlation_ratio`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixingConfig {
    /// Digits `j <= depth` are summed term by term in the transfer operator.
    pub depth: u64,
    /// Cells in the piecewise-constant bracket that certifies the error bound.
    pub cells: usize,
    /// Chebyshev nodes for the spectral value.
    pub nodes: usize,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self { depth: 2000, cells: 4096, nodes: 64 }
    }
}

/// `mu(I(prefix) ∩ T^{-m-gap} B) / (mu(I(prefix)) mu(B))` with `m = |prefix|`.
///
/// The value comes from a Chebyshev discretization of the transfer operator
/// `Pf(y) = sum_j f(1/(j+y))/(j+y)^2` applied to the density of `T^m x` on the
/// cylinder. The error bound comes from an independent upper/lower
/// piecewise-constant bracket of the same iteration, whose tail beyond `depth`
/// is bounded by `sum_{j>J} (j+y)^{-2} <= 1/(J+y)`.
pub fn correlation_ratio(
    prefix: &DigitSequence,
    b: &IntervalUnion,
    gap: u64,
    cfg: &MixingConfig,
) -> Result<MeasureValue, MeasureError> {
    if prefix.is_empty() {
        return Err(MeasureError::Domain("prefix must be nonempty".into()));
    }
    if cfg.depth < 1 || cfg.cells < 2 || cfg.nodes < 4 {
        return Err(MeasureError::Domain("invalid mixing configuration".into()));
    }
    let mu_b = gauss(b).value;
    if !(mu_b > 0.0) {
        return Err(MeasureError::Domain("B has zero measure".into()));
    }
    if b.lebesgue_exact().is_one() {
        return Ok(MeasureValue { value: 1.0, error_bound: 0.0 });
    }
    let conv = convergents(prefix);
    let m = conv.len();
    let (p, q) = (conv[m - 1].p.clone(), conv[m - 1].q.clone());
    let (pp, qp) = if m >= 2 {
        (conv[m - 2].p.clone(), conv[m - 2].q.clone())
    } else {
        (BigInt::zero(), BigInt::one())
    };
    let cyl = Interval::open(
        BigRational::new(p.clone(), q.clone()),
        BigRational::new(&p + &pp, &q + &qp),
    );
    let cyl = if cyl.lo > cyl.hi { Interval::open(cyl.hi, cyl.lo) } else { cyl };
    let mu_i = cyl.gauss();

    if gap == 0 {
        let image: Vec<Interval> = b
            .parts()
            .iter()
            .map(|part| {
                let map = |y: &BigRational| {
                    (BigRational::from(p.clone()) + BigRational::from(pp.clone()) * y)
                        / (BigRational::from(q.clone()) + BigRational::from(qp.clone()) * y)
                };
                let (u, v) = (map(&part.lo), map(&part.hi));
                if u <= v {
                    Interval::open(u, v)
                } else {
                    Interval::open(v, u)
                }
            })
            .collect();
        let image = IntervalUnion::new(image)?;
        let joint = gauss(&image);
        let value = joint.value / (mu_i * mu_b);
        return Ok(MeasureValue { value, error_bound: value * 1e-13 + joint.error_bound });
    }

    let coeff = [&q, &qp, &(&q + &p), &(&qp + &pp)].map(|x| x.to_f64().unwrap_or(f64::INFINITY));
    let f0 = move |y: f64| 1.0 / (LN_2 * (coeff[0] + coeff[1] * y) * (coeff[2] + coeff[3] * y));
    let pieces = b.bounds_f64();

    let value = spectral_ratio(&f0, &pieces, gap, cfg) / mu_b;
    let (lo, hi) = bracket_integral(&f0, &pieces, gap, mu_i, cfg);
    let (lo, hi) = (lo / (mu_i * mu_b), hi / (mu_i * mu_b));
    let error_bound = (value - lo).max(hi - value).max(0.0) * (1.0 + 1e-12);
    Ok(MeasureValue { value, error_bound })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

struct Chebyshev {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Chebyshev {
    fn new(n: usize) -> Self {
        let nodes = (0..n)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
            .collect();
        let weights = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                if i == 0 || i == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Self { nodes, weights }
    }

    fn eval(&self, values: &[f64], u: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((&y, &w), &f) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = u - y;
            if d == 0.0 {
                return f;
            }
            let c = w / d;
            num += c * f;
            den += c;
        }
        num / den
    }
}

fn spectral_ratio(f0: &dyn Fn(f64) -> f64, pieces: &[(f64, f64)], gap: u64, cfg: &MixingConfig) -> f64 {
    let cheb = Chebyshev::new(cfg.nodes);
    let gl3 = gauss_legendre(3);
    let gl = gauss_legendre(cfg.nodes / 2 + 2);
    let j_max = cfg.depth as f64;
    let mut f: Vec<f64> = cheb.nodes.iter().map(|&y| f0(y)).collect();
    for _ in 0..gap {
        let next = cheb
            .nodes
            .iter()
            .map(|&y| {
                let mut s = NeumaierSum::new();
                for j in 1..=cfg.depth {
                    let x = j as f64 + y;
                    s.add(cheb.eval(&f, 1.0 / x) / (x * x));
                }
                let edge = j_max + 0.5 + y;
                let v = 1.0 / edge;
                let tail: f64 = gl3
                    .iter()
                    .map(|&(t, w)| 0.5 * v * w * cheb.eval(&f, 0.5 * v * (t + 1.0)))
                    .sum();
                s.add(tail - cheb.eval(&f, 0.0) / (12.0 * edge * edge * edge));
                s.value()
            })
            .collect();
        f = next;
    }
    let integrate = |a: f64, b: f64| -> f64 {
        gl.iter()
            .map(|&(t, w)| 0.5 * (b - a) * w * cheb.eval(&f, a + 0.5 * (b - a) * (t + 1.0)))
            .sum()
    };
    let on_b: NeumaierSum = pieces.iter().map(|&(a, b)| integrate(a, b)).collect();
    on_b.value() / integrate(0.0, 1.0)
}

/// Rigorous lower and upper bounds for `int_B P^gap f0`.
fn bracket_integral(
    f0: &dyn Fn(f64) -> f64,
    pieces: &[(f64, f64)],
    gap: u64,
    total_mass: f64,
    cfg: &MixingConfig,
) -> (f64, f64) {
    const UP: f64 = 1.0 + 1e-13;
    const DOWN: f64 = 1.0 - 1e-13;
    let m = cfg.cells;
    let h = 1.0 / m as f64;
    let mut hi: Vec<f64> = (0..m).map(|c| f0(c as f64 * h) * UP).collect();
    let mut lo: Vec<f64> = (0..m).map(|c| f0((c + 1) as f64 * h) * DOWN).collect();
    let cell = |u: f64, slack: f64| (((u * m as f64) + slack).floor().max(0.0) as usize).min(m - 1);
    let j_max = cfg.depth;
    for _ in 0..gap {
        let mut pre_max = hi.clone();
        let mut pre_min = lo.clone();
        for c in 1..m {
            pre_max[c] = pre_max[c].max(pre_max[c - 1]);
            pre_min[c] = pre_min[c].min(pre_min[c - 1]);
        }
        let mut new_hi = vec![0.0; m];
        let mut new_lo = vec![0.0; m];
        for c in 0..m {
            let (y0, y1) = (c as f64 * h, (c + 1) as f64 * h);
            let (mut up, mut down) = (0.0, 0.0);
            for j in 1..=j_max {
                let (a, b) = (j as f64 + y0, j as f64 + y1);
                let (first, last) = (cell(1.0 / b, -1e-9), cell(1.0 / a, 1e-9));
                let mut mx = hi[first];
                let mut mn = lo[first];
                for k in first + 1..=last {
                    mx = mx.max(hi[k]);
                    mn = mn.min(lo[k]);
                }
                up += mx / (a * a);
                down += mn / (b * b);
            }
            let edge = cell(1.0 / (j_max as f64 + 1.0 + y0), 1e-9);
            up += pre_max[edge] / (j_max as f64 + y0);
            down += pre_min[edge] / (j_max as f64 + 1.0 + y1);
            new_hi[c] = up * UP;
            new_lo[c] = down * DOWN;
        }
        hi = new_hi;
        lo = new_lo;
    }
    let mut in_b = vec![0.0; m];
    for &(a, b) in pieces {
        for (c, slot) in in_b.iter_mut().enumerate() {
            let (y0, y1) = (c as f64 * h, (c + 1) as f64 * h);
            let overlap = (b.min(y1) - a.max(y0)).max(0.0);
            *slot += overlap;
        }
    }
    let (mut b_lo, mut b_hi, mut c_lo, mut c_hi) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..m {
        let inside = in_b[c].min(h);
        let outside = (h - inside).max(0.0);
        b_lo += lo[c] * inside;
        b_hi += hi[c] * inside;
        c_lo += lo[c] * outside;
        c_hi += hi[c] * outside;
    }
    let lower = b_lo.max(total_mass - c_hi) * DOWN;
    let upper = b_hi.min(total_mass - c_lo) * UP;
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn gauss_examples() {
        assert!((gauss(&IntervalUnion::unit()).value - 1.0).abs() < 1e-15);
        let half = IntervalUnion::new(vec![Interval::new(r(0, 1), r(1, 2), false, true)]).unwrap();
        assert!((gauss(&half).value - 1.5f64.log2()).abs() < 1e-15);
        let i11 = IntervalUnion::new(vec![Interval::new(r(1, 2), r(2, 3), true, false)]).unwrap();
        assert!((gauss(&i11).value - (10.0f64 / 9.0).log2()).abs() < 1e-15);
        assert!((pair_cylinder_gauss(1, 1) - (10.0f64 / 9.0).log2()).abs() < 1e-15);
        assert!((pair_cylinder_gauss(2, 1) - (21.0f64 / 20.0).log2()).abs() < 1e-15);
    }

    #[test]
    fn union_validation_and_merge() {
        assert!(IntervalUnion::new(vec![Interval::open(r(0, 1), r(3, 2))]).is_err());
        assert!(IntervalUnion::new(vec![Interval::open(r(0, 1), r(1, 2)), Interval::open(r(1, 3), r(1, 1))])
            .is_err());
        let u = IntervalUnion::new(vec![
            Interval::new(r(1, 2), r(1, 1), true, false),
            Interval::open(r(0, 1), r(1, 2)),
        ])
        .unwrap();
        assert_eq!(u.len(), 1);
        let v = IntervalUnion::new(vec![Interval::open(r(1, 2), r(1, 1)), Interval::open(r(0, 1), r(1, 2))])
            .unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn product_set_small_t() {
        let full = product_set(1.0).unwrap();
        assert_eq!(full.lebesgue_exact(), r(1, 1));
        let two = product_set(2.0).unwrap();
        assert_eq!(two.lebesgue_exact(), r(5, 6));
        assert!((gauss(&two).value - 0.847_996_906_554_950).abs() < 1e-12);
        assert!((product_set_measure(2.0).unwrap().value - gauss(&two).value).abs() < 1e-15);
        assert!(product_set(0.5).is_err());
    }

    #[test]
    fn asymptotic_examples() {
        assert!((asymptotic_product_measure(std::f64::consts::E) - 0.530_737_845_423_043).abs() < 1e-12);
        assert!((asymptotic_product_measure(1e6) - 1.9932e-5).abs() < 1e-9);
    }

    #[test]
    fn expectation_small_thresholds() {
        let e1 = truncated_pair_expectation(1.0).unwrap().value;
        assert!((e1 - (10.0f64 / 9.0).log2()).abs() < 1e-15);
        let e2 = truncated_pair_expectation(2.0).unwrap().value;
        let want = (10.0f64 / 9.0).log2() + 4.0 * (21.0f64 / 20.0).log2();
        assert!((e2 - want).abs() < 1e-15);
    }

    #[test]
    fn expectation_cap_is_a_resource_error() {
        assert!(matches!(
            truncated_pair_expectation_capped(1e4, 1000),
            Err(MeasureError::Resource(_))
        ));
    }

    #[test]
    fn pair_count_matches_direct_sum() {
        for t in [1u64, 2, 10, 97, 1000] {
            let direct: u64 = (1..=t).map(|i| t / i).sum();
            assert_eq!(pair_count(t), direct);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(5);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }
}
