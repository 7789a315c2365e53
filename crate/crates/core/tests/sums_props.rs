use cflab::cf::FiniteDigits;
use cflab::sums::{
    trajectory_stats, truncated_sum, truncation_threshold, weak_law_experiment, ExperimentConfig, StatsSpec,
};
use cflab::Law;
use num_bigint::BigUint;
use proptest::prelude::*;

proptest! {
    #[test]
    fn snapshots_match_brute_force(
        digits in prop::collection::vec(prop_oneof![1u64..5, 1u64..100_000], 40..120),
        c in 0.5f64..2.5,
    ) {
        let grid = [5u64, 17, 39];
        let spec = StatsSpec { count_exponents: vec![c], truncation_exponent: Some(c) };
        let snaps = trajectory_stats(&mut FiniteDigits::new(digits.clone()), &grid, &spec).unwrap();
        for s in &snaps {
            let n = s.n as usize;
            let b: Vec<u128> = digits.windows(2).take(n).map(|w| w[0] as u128 * w[1] as u128).collect();
            let thr = truncation_threshold(s.n, c);
            let max = *b.iter().max().unwrap();
            prop_assert_eq!(s.pair_sum.clone(), BigUint::from(b.iter().sum::<u128>()));
            prop_assert_eq!(s.max_pair, max);
            prop_assert_eq!(s.max_pair_index as usize, b.iter().position(|&x| x == max).unwrap() + 1);
            prop_assert_eq!(s.trimmed(), BigUint::from(b.iter().sum::<u128>() - max));
            prop_assert_eq!(s.exceedances[0].count as usize, b.iter().filter(|&&x| x > thr).count());
            let kept: u128 = b.iter().filter(|&&x| x <= thr).sum();
            prop_assert_eq!(s.truncated.as_ref().unwrap().value.clone(), BigUint::from(kept));
            prop_assert_eq!(truncated_sum(&digits, n, thr).unwrap(), BigUint::from(kept));
            prop_assert_eq!(s.digit_sum.clone(), BigUint::from(digits[..n].iter().sum::<u64>()));
        }
    }
}

#[test]
fn grids_are_validated() {
    let spec = StatsSpec::default();
    assert!(trajectory_stats(&mut FiniteDigits::new(vec![1; 10]), &[], &spec).is_err());
    assert!(trajectory_stats(&mut FiniteDigits::new(vec![1; 10]), &[3, 3], &spec).is_err());
    // too few digits for the last grid point
    assert!(trajectory_stats(&mut FiniteDigits::new(vec![1; 5]), &[5], &spec).is_err());
}

#[test]
fn experiment_is_thread_independent() {
    let config = ExperimentConfig::new(Law::Gauss, 24, vec![100, 1000], 11);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| weak_law_experiment(&config).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn config_hash_tracks_every_field() {
    let a = ExperimentConfig::new(Law::Lebesgue, 10, vec![100], 1);
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.spike_exponent = 1.7;
    assert_ne!(a.hash(), b.hash());
}
