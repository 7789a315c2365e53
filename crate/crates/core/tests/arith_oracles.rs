use cflab::arith::{
    composition_sum, constructive_c_epsilon, divisor_count, divisor_counts_up_to, zeta, CompositionQuery,
    DEFAULT_COMPOSITION_CAP,
};
use proptest::prelude::*;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn brute_divisors(n: u64) -> u64 {
    (1..=n).filter(|d| n % d == 0).count() as u64
}

proptest! {
    #[test]
    fn divisor_count_is_multiplicative(m in 1u64..5000, n in 1u64..5000) {
        prop_assume!(gcd(m, n) == 1);
        prop_assert_eq!(divisor_count(m * n).unwrap(), divisor_count(m).unwrap() * divisor_count(n).unwrap());
    }
}

#[test]
fn sieve_matches_trial_division() {
    let d = divisor_counts_up_to(3000);
    for n in 1..=3000u64 {
        assert_eq!(d[n as usize] as u64, brute_divisors(n));
        assert_eq!(divisor_count(n).unwrap(), brute_divisors(n));
    }
}

/// `S_K + (K+1)^{1-r}/(r-1) <= zeta(r) <= S_K + K^{1-r}/(r-1)`.
#[test]
fn zeta_within_integral_bracket() {
    for r in [1.1, 1.25, 1.5, 2.0, 2.5, 3.0, 5.0] {
        let k = 200_000u64;
        let partial: f64 = (1..=k).rev().map(|n| (n as f64).powf(-r)).sum();
        let lo = partial + ((k + 1) as f64).powf(1.0 - r) / (r - 1.0);
        let hi = partial + (k as f64).powf(1.0 - r) / (r - 1.0);
        let z = zeta(r).unwrap();
        assert!(z >= lo - 1e-12 && z <= hi + 1e-12, "r = {r}: {z} not in [{lo}, {hi}]");
    }
    assert!((zeta(2.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
    assert!((zeta(4.0).unwrap() - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-14);
    assert!(zeta(1.0).is_err());
}

/// Weighted composition sums by convolution, `f_n(m) = sum_i i^{-2s} f_{n-1}(m - i)`.
fn convolution(n: u64, m: u64, s: f64) -> f64 {
    let w = |i: u64| (i as f64).powf(-2.0 * s);
    let mut f: Vec<f64> = (0..=m).map(|k| if k == 0 { 0.0 } else { w(k) }).collect();
    for _ in 1..n {
        let mut g = vec![0.0; (m + 1) as usize];
        for total in 2..=m {
            g[total as usize] = (1..total).map(|i| w(i) * f[(total - i) as usize]).sum();
        }
        f = g;
    }
    f[m as usize]
}

#[test]
fn composition_sums_match_convolution() {
    for s in [0.6, 0.75, 0.9] {
        for n in 1..=5u64 {
            for m in n..=20u64 {
                let res = composition_sum(CompositionQuery { n, m, s }, DEFAULT_COMPOSITION_CAP).unwrap();
                let want = convolution(n, m, s);
                assert!((res.sum - want).abs() < 1e-12 * want, "n={n} m={m} s={s}");
                assert!(res.holds);
            }
        }
    }
}

#[test]
fn composition_counts_are_binomial() {
    let r = composition_sum(CompositionQuery { n: 3, m: 7, s: 0.75 }, DEFAULT_COMPOSITION_CAP).unwrap();
    assert_eq!(r.compositions, 15);
    assert!(composition_sum(CompositionQuery { n: 12, m: 60, s: 0.75 }, 1000).is_err());
}

#[test]
fn constructive_constant_quarter() {
    let c = constructive_c_epsilon(0.25).unwrap();
    assert_eq!((c.m, c.l0, c.log2_c), (7, 17, 119));
    assert_eq!(c.prime, 17);
    // every prime power bound used by the recipe: (l + 1) <= 2^{l0} for l < l0
    for l in 1..c.l0 {
        assert!(l + 1 <= 1 << c.l0);
    }
}
