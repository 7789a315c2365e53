//! Divisor counts, the explicit constant in `delta(n) <= c n^eps`, zeta values
//! and weighted composition sums.

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::NeumaierSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArithError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit: {0}")]
    Resource(String),
}

/// Prime factorization as `(prime, exponent)` pairs with increasing primes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Factorization(Vec<(u64, u32)>);

impl Factorization {
    pub fn of(mut n: u64) -> Result<Self, ArithError> {
        if n == 0 {
            return Err(ArithError::Domain("cannot factor 0".into()));
        }
        let mut out = Vec::new();
        let mut p = 2u64;
        while p * p <= n {
            if n % p == 0 {
                let mut e = 0;
                while n % p == 0 {
                    n /= p;
                    e += 1;
                }
                out.push((p, e));
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if n > 1 {
            out.push((n, 1));
        }
        Ok(Self(out))
    }

    pub fn pairs(&self) -> &[(u64, u32)] {
        &self.0
    }

    pub fn value(&self) -> u64 {
        self.0.iter().map(|&(p, e)| p.pow(e)).product()
    }
}

/// Number of ordered pairs `(a, b)` with `a b = n`; `delta(1) = 1`.
pub fn divisor_count(n: u64) -> Result<u64, ArithError> {
    Ok(Factorization::of(n)?.pairs().iter().map(|&(_, e)| e as u64 + 1).product())
}

/// `delta(n)` for every `n <= limit`, index 0 unused.
pub fn divisor_counts_up_to(limit: usize) -> Vec<u32> {
    // Linear sieve tracking the exponent of the smallest prime factor.
    let mut d = vec![0u32; limit + 1];
    let mut spf_exp = vec![0u32; limit + 1];
    let mut primes: Vec<usize> = Vec::new();
    if limit >= 1 {
        d[1] = 1;
    }
    for i in 2..=limit {
        if d[i] == 0 {
            primes.push(i);
            d[i] = 2;
            spf_exp[i] = 1;
        }
        for &p in &primes {
            let ip = i * p;
            if ip > limit {
                break;
            }
            if i % p == 0 {
                spf_exp[ip] = spf_exp[i] + 1;
                d[ip] = d[i] / (spf_exp[i] + 1) * (spf_exp[ip] + 1);
                break;
            }
            spf_exp[ip] = 1;
            d[ip] = d[i] * 2;
        }
    }
    d
}

/// The constant `c = 2^{M l0}` with `delta(n) <= c n^eps`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CEpsilon {
    /// Index of the first prime with `p^eps >= 2`.
    pub m: u64,
    pub prime: u64,
    /// Smallest `l0 >= 1` with `2^{eps l} >= l + 1` for every `l >= l0`.
    pub l0: u64,
    /// `log2 c = M l0`.
    pub log2_c: u64,
    #[serde(skip)]
    pub c: BigUint,
}

const PRIME_SEARCH_LIMIT: f64 = 1e9;

/// Follows the factor-by-factor argument: primes below `p_M` contribute at most
/// `2^{l0}` each, larger primes contribute at most 1.
pub fn constructive_c_epsilon(eps: f64) -> Result<CEpsilon, ArithError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ArithError::Domain(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let target = 2f64.powf(1.0 / eps);
    if target > PRIME_SEARCH_LIMIT {
        return Err(ArithError::Resource(format!("prime search up to {target:.3e}")));
    }
    let limit = (target.ceil() as usize).max(2) * 2 + 16;
    let mut composite = vec![false; limit + 1];
    let mut index = 0u64;
    let mut found = None;
    for p in 2..=limit {
        if composite[p] {
            continue;
        }
        index += 1;
        if (p as f64).powf(eps) >= 2.0 {
            found = Some((index, p as u64));
            break;
        }
        let mut q = p * p;
        while q <= limit {
            composite[q] = true;
            q += p;
        }
    }
    let (m, prime) = found.expect("Bertrand's postulate puts a prime below 2 * target");
    let holds = |l: u64| 2f64.powf(eps * l as f64) >= (l + 1) as f64;
    // Past l = 1/(eps ln 2) - 1 the gap 2^{eps l} - (l + 1) is increasing.
    let turning = (1.0 / (eps * std::f64::consts::LN_2)).ceil() as u64 + 1;
    let mut l = 1u64;
    let mut last_fail = 0u64;
    while l <= turning || !holds(l) {
        if !holds(l) {
            last_fail = l;
        }
        l += 1;
    }
    let l0 = last_fail + 1;
    let log2_c = m * l0;
    Ok(CEpsilon { m, prime, l0, log2_c, c: BigUint::from(1u8) << log2_c })
}

/// Result of scanning `delta(n) / n^eps` for `n <= limit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivisorScan {
    pub limit: u64,
    pub max_ratio: f64,
    pub argmax: u64,
}

pub fn divisor_ratio_scan(eps: f64, limit: u64) -> Result<DivisorScan, ArithError> {
    if limit < 1 || limit > 500_000_000 {
        return Err(ArithError::Resource(format!("scan limit {limit} out of range")));
    }
    let d = divisor_counts_up_to(limit as usize);
    let (mut max_ratio, mut argmax) = (0.0f64, 1u64);
    for (n, &dn) in d.iter().enumerate().skip(1) {
        let r = dn as f64 / (n as f64).powf(eps);
        if r > max_ratio {
            max_ratio = r;
            argmax = n as u64;
        }
    }
    Ok(DivisorScan { limit, max_ratio, argmax })
}

const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Riemann zeta for real `r > 1` by Euler-Maclaurin summation.
pub fn zeta(r: f64) -> Result<f64, ArithError> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(ArithError::Domain(format!("zeta needs r > 1, got {r}")));
    }
    const N: u64 = 16;
    let mut s: NeumaierSum = (1..N).map(|k| (k as f64).powf(-r)).collect();
    let n = N as f64;
    s.add(n.powf(1.0 - r) / (r - 1.0));
    s.add(0.5 * n.powf(-r));
    // B_{2k}/(2k)! * r (r+1) ... (r+2k-2) * N^{-r-2k+1}
    let mut rising = r;
    let mut fact = 2.0;
    for (k, &b) in BERNOULLI.iter().enumerate() {
        let k = k as u64 + 1;
        s.add(b / fact * rising * n.powf(-r - (2 * k - 1) as f64));
        rising *= (r + (2 * k - 1) as f64) * (r + (2 * k) as f64);
        fact *= ((2 * k + 1) * (2 * k + 2)) as f64;
    }
    Ok(s.value())
}

/// A weighted composition sum query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompositionQuery {
    pub n: u64,
    pub m: u64,
    pub s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompositionResult {
    pub query: CompositionQuery,
    pub compositions: u64,
    pub sum: f64,
    pub bound: f64,
    pub holds: bool,
}

pub const DEFAULT_COMPOSITION_CAP: u64 = 10_000_000;

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// `sum over i_1 + ... + i_n = m of prod i_k^{-2s}` against `(4.5 (2 + zeta(2s)))^n m^{-2s}`.
pub fn composition_sum(q: CompositionQuery, cap: u64) -> Result<CompositionResult, ArithError> {
    if q.n < 1 || q.n > q.m {
        return Err(ArithError::Domain(format!("need 1 <= n <= m, got n={} m={}", q.n, q.m)));
    }
    if !(q.s > 0.5 && q.s < 1.0) {
        return Err(ArithError::Domain(format!("s must lie in (1/2, 1), got {}", q.s)));
    }
    let count = binomial(q.m - 1, q.n - 1).filter(|&c| c <= cap).ok_or_else(|| {
        ArithError::Resource(format!("C({}, {}) compositions exceed cap {cap}", q.m - 1, q.n - 1))
    })?;
    let w: Vec<f64> = (0..=q.m).map(|i| if i == 0 { 0.0 } else { (i as f64).powf(-2.0 * q.s) }).collect();
    let mut acc = NeumaierSum::new();
    // Lexicographic depth-first walk; the running product is extended one part at a time.
    fn walk(w: &[f64], parts_left: u64, remaining: u64, prod: f64, acc: &mut NeumaierSum) {
        if parts_left == 1 {
            acc.add(prod * w[remaining as usize]);
            return;
        }
        for first in 1..=remaining - (parts_left - 1) {
            walk(w, parts_left - 1, remaining - first, prod * w[first as usize], acc);
        }
    }
    walk(&w, q.n, q.m, 1.0, &mut acc);
    let sum = acc.value();
    let bound = (4.5 * (2.0 + zeta(2.0 * q.s)?)).powi(q.n as i32) * (q.m as f64).powf(-2.0 * q.s);
    Ok(CompositionResult { query: q, compositions: count, sum, bound, holds: sum <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_examples() {
        assert_eq!(divisor_count(12).unwrap(), 6);
        assert_eq!(divisor_count(7).unwrap(), 2);
        assert_eq!(divisor_count(1).unwrap(), 1);
        assert!(divisor_count(0).is_err());
        let d = divisor_counts_up_to(12);
        assert_eq!(&d[1..], &[1, 2, 2, 3, 2, 4, 2, 4, 3, 4, 2, 6]);
    }

    #[test]
    fn factorization_roundtrip() {
        let f = Factorization::of(360).unwrap();
        assert_eq!(f.pairs(), &[(2, 3), (3, 2), (5, 1)]);
        assert_eq!(f.value(), 360);
    }

    #[test]
    fn c_epsilon_examples() {
        let c = constructive_c_epsilon(0.25).unwrap();
        assert_eq!((c.m, c.prime, c.l0, c.log2_c), (7, 17, 17, 119));
        assert_eq!(c.c, BigUint::from(1u8) << 119u32);
        let c = constructive_c_epsilon(1.0).unwrap();
        assert_eq!((c.m, c.prime, c.l0), (1, 2, 1));
        assert_eq!(c.c, BigUint::from(2u8));
        assert!(constructive_c_epsilon(0.0).is_err());
    }

    #[test]
    fn zeta_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((zeta(2.0).unwrap() - pi2 / 6.0).abs() < 1e-13);
        assert!((zeta(4.0).unwrap() - pi2 * pi2 / 90.0).abs() < 1e-13);
        assert!((zeta(1.5).unwrap() - 2.612_375_348_685_488).abs() < 1e-12);
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn composition_examples() {
        let one = composition_sum(CompositionQuery { n: 1, m: 7, s: 0.6 }, 100).unwrap();
        assert!((one.sum - 7f64.powf(-1.2)).abs() < 1e-15);
        let two = composition_sum(CompositionQuery { n: 2, m: 3, s: 0.75 }, 100).unwrap();
        assert!((two.sum - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((two.bound - 82.9).abs() < 0.1, "{}", two.bound);
        assert!(two.holds);
        assert!(matches!(
            composition_sum(CompositionQuery { n: 10, m: 40, s: 0.75 }, 1000),
            Err(ArithError::Resource(_))
        ));
        assert!(composition_sum(CompositionQuery { n: 3, m: 2, s: 0.75 }, 100).is_err());
    }
}
