use cflab::fractal::{
    check_lemma55_hypotheses, covering_statistics, envelope_membership, envelope_theorem17_18, falconer_from_levels,
    falconer_from_psi, sample_e_envelope, sample_e_phi_m, schedule_membership, schedule_theorem16, GrowthFunction,
    NkRule,
};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

fn sub(alpha: f64) -> GrowthFunction {
    GrowthFunction::SubExponential { alpha }
}

#[test]
fn schedule_is_minimal() {
    let phi = sub(0.4);
    let s = schedule_theorem16(&phi, 3, 0.05, Some(0.1), 200_000).unwrap();
    let psi = |n: u64| (n as f64).powf(0.4);
    assert!(s.n_seq.len() > 50);
    // n_1: first n >= 3 from which psi(n) < n^{0.45}
    assert_eq!(s.n_seq[0], 3);
    for k in 1..s.n_seq.len() {
        let (prev, cur) = (s.n_seq[k - 1], s.n_seq[k]);
        let eps_prev = (k as f64).powf(-0.1);
        let need = psi(prev) + eps_prev.ln_1p();
        assert!(cur >= prev + 4);
        assert!(psi(cur) >= need, "k = {k}");
        let below = cur - 1;
        assert!(below < prev + 4 || psi(below) < need, "n_{k} = {cur} is not minimal");
    }
}

#[test]
fn schedule_prescribed_digits() {
    let phi = sub(0.4);
    let s = schedule_theorem16(&phi, 3, 0.05, Some(0.1), 50_000).unwrap();
    let psi = |n: u64| (n as f64).powf(0.4);
    let target = |k: usize| (1.0 + (k as f64).powf(-0.1)) * psi(s.n_seq[k - 1]).exp();
    assert_eq!(s.prescribed[0], BigUint::from((0.5 * target(1)).floor() as u64 + 1));
    for k in 2..=12 {
        let y = 0.5 * (target(k) - target(k - 1));
        assert_eq!(s.prescribed[k - 1].to_f64().unwrap(), y.floor() + 1.0, "k = {k}");
    }
}

#[test]
fn schedule_sparsity() {
    let phi = sub(0.4);
    let s = schedule_theorem16(&phi, 3, 0.05, None, 1_000_000).unwrap();
    let ratios: Vec<f64> = [1_000u64, 10_000, 100_000, 1_000_000].iter().map(|&n| s.r(n) as f64 / n as f64).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(ratios[3] < 0.001);
}

#[test]
fn sampled_schedule_point_is_a_member() {
    let phi = sub(0.4);
    let s = schedule_theorem16(&phi, 3, 0.05, None, 100_000).unwrap();
    for seed in 0..5 {
        let m = schedule_membership(&s, seed, 20).unwrap();
        assert!(m.all_hold(), "seed {seed}: {m:?}");
        assert_eq!(m.sandwich.len(), 20);
    }
    let digits: Vec<BigUint> = sample_e_phi_m(&s, 1).take(3000).collect();
    let cap = BigUint::from(3u8);
    for (i, d) in digits.iter().enumerate() {
        let n = i as u64 + 1;
        match s.spike_index(n) {
            Some(k) => assert_eq!(d, &s.prescribed[k - 1]),
            None if s.spike_index(n + 1).is_some() || s.spike_index(n - 1).is_some() => assert!(d.is_one()),
            None => assert!(d >= &BigUint::one() && d <= &cap),
        }
    }
}

#[test]
fn envelope_recurrence_in_log_space() {
    let phi = sub(0.5);
    let env = envelope_theorem17_18(&phi, 50_000).unwrap();
    for n in 2..50_000u64 {
        let step = (n as f64).sqrt().exp() - ((n - 1) as f64).sqrt().exp();
        let got = (env.ln_d(n) + env.ln_d(n + 1)).exp();
        assert!((got / step - 1.0).abs() < 1e-9, "n = {n}");
    }
    assert!((env.ln_d(10_000) / 100.0 - 0.5).abs() < 0.05);
    for n in env.threshold + 1..=50_000 {
        assert!(env.ln_d(n) >= 2f64.ln() && env.ln_d(n) - phi.ln_psi(n) >= 2f64.ln());
        assert!(env.ln_count(n) >= 2f64.ln() - 1e-12);
    }
}

#[test]
fn envelope_linear_psi_ratio() {
    let env = envelope_theorem17_18(&GrowthFunction::Exponential { rate: 1.0 }, 200).unwrap();
    let ratio = (env.ln_d(101) - env.ln_d(99)).exp();
    assert!((ratio - 1f64.exp()).abs() < 1e-6);
}

#[test]
fn envelope_sampling() {
    let env = envelope_theorem17_18(&sub(0.5), 20_001).unwrap();
    let a: Vec<BigUint> = sample_e_envelope(&env, 3).take(3000).map(Result::unwrap).collect();
    let b: Vec<BigUint> = sample_e_envelope(&env, 3).take(3000).map(Result::unwrap).collect();
    assert_eq!(a, b);
    for (i, d) in a.iter().enumerate() {
        let n = i as u64 + 1;
        if n <= env.threshold {
            assert!(d.is_one());
        } else {
            let x = d.to_f64().unwrap().ln();
            assert!(x >= env.ln_d(n) - 1e-12 && x <= env.ln_upper(n) + 1e-12, "n = {n}");
        }
    }
    let grid = [1_000, 2_000, 5_000, 10_000, 20_000];
    let m = envelope_membership(&env, 3, &grid).unwrap();
    assert!(m.in_range && m.ranges_inside);
    for &(n, ratio) in &m.ratios {
        if n >= 4 * env.threshold {
            assert!((0.5..=2.0).contains(&ratio), "n = {n}: {ratio}");
        }
    }
}

#[test]
fn covering_counts_and_slope() {
    let env = envelope_theorem17_18(&GrowthFunction::SuperExponential { alpha: 2.0 }, 60).unwrap();
    let first = covering_statistics(&env, 1).unwrap();
    assert_eq!(first.ln_count, env.ln_count(env.threshold + 1));
    let mut prev = first.ln_count;
    for level in 2..=40 {
        let c = covering_statistics(&env, level).unwrap();
        assert!(c.ln_count >= prev);
        assert!(c.ln_length_min <= c.ln_length_max);
        prev = c.ln_count;
    }
    let slope = covering_statistics(&env, 40).unwrap().slope;
    assert!((0.30..=0.37).contains(&slope), "{slope}");
}

#[test]
fn falconer_targets() {
    for alpha in [1.5f64, 2.0, 3.0] {
        let e = falconer_from_psi(|n| alpha.powf(n as f64), 200).unwrap();
        assert!((e.value - 1.0 / (1.0 + alpha)).abs() < 1e-4, "alpha = {alpha}");
    }
    let e = falconer_from_psi(|n| (n as f64).powf(0.75), 1_000_000).unwrap();
    assert!((e.value - 0.5).abs() < 0.01);
    let c = falconer_from_psi(|_| 2.0, 10_000).unwrap();
    assert!((c.value - 0.5).abs() < 1e-3);
}

#[test]
fn falconer_from_envelope_levels_agrees_with_closed_form() {
    let env = envelope_theorem17_18(&GrowthFunction::SuperExponential { alpha: 2.0 }, 60).unwrap();
    let levels = 50;
    let ln_m: Vec<f64> = (1..=levels).map(|i| env.ln_count(env.threshold + i)).collect();
    let ln_gap: Vec<f64> = (1..=levels).map(|i| env.ln_gap(i)).collect();
    let e = falconer_from_levels(&ln_m, &ln_gap).unwrap();
    assert!((e.value - 1.0 / 3.0).abs() < 1e-6, "{}", e.value);
}

#[test]
fn lemma55_examples() {
    let r = check_lemma55_hypotheses(&sub(0.75), NkRule::PowerFloor { exponent: 4.0 / 3.0 }, 0.75, 0.25, 1_000_000)
        .unwrap();
    assert!(r.established);
    let k = r.first_k.unwrap();
    // psi(n_k) / (n_k - n_{k-1}) ~ 0.75 k^{2/3} crosses M ~ 343.5 near k ~ 9800
    assert!((9_000..12_000).contains(&k), "{k}");
    assert!((r.m_constant - 343.5).abs() < 0.1);
    let sup = GrowthFunction::SuperExponential { alpha: 2.0 };
    let r = check_lemma55_hypotheses(&sup, NkRule::Linear { step: 2 }, 0.75, 0.25, 1000).unwrap();
    assert!(r.established && r.first_k.unwrap() <= 10);
    let r = check_lemma55_hypotheses(&sub(0.75), NkRule::Linear { step: 1 }, 0.75, 0.25, 1000).unwrap();
    assert!(r.precondition_failure && !r.established);
}
