use proptest::prelude::*;
use support_limits::model::*;
use support_limits::Error;

fn binom(n: u64, r: u64) -> u64 {
    (0..r).fold(1, |c, i| c * (n - i) / (i + 1))
}

#[test]
fn dims_reject_bad_shapes() {
    assert!(matches!(ProblemDims::new(10, 0, 5, 0), Err(Error::InvalidConfig(_))));
    assert!(matches!(ProblemDims::new(3, 4, 5, 0), Err(Error::InvalidConfig(_))));
    assert!(matches!(ProblemDims::new(10, 3, 5, 3), Err(Error::InvalidConfig(_))));
    assert!(ProblemDims::new(10, 3, 0, 2).is_ok());
}

#[test]
fn model_validation() {
    assert!(ModelSpec::linear(0.0).validate(3).is_err());
    assert!(ModelSpec::one_bit(f64::NAN).validate(3).is_err());
    assert!(ModelSpec::group_testing(0.5, 1.0).validate(3).is_err());
    assert!(ModelSpec::group_testing(0.1, 4.0).validate(3).is_err());
    assert!(ModelSpec::group_testing(0.0, 3.0).validate(3).is_ok());
    let mixed = ModelSpec { channel: Channel::Linear { sigma: 1.0 }, design: Design::Bernoulli { nu: 1.0 } };
    assert!(mixed.validate(3).is_err());
}

#[test]
fn prior_validation() {
    let lin = ModelSpec::linear(1.0);
    let gt = ModelSpec::group_testing(0.0, 1.0);
    assert!(SignalPrior::AllOnes.validate(2, &lin).is_err());
    assert!(SignalPrior::FixedVector { b: vec![1.0, 1.0] }.validate(2, &gt).is_err());
    assert!(SignalPrior::FixedVector { b: vec![1.0] }.validate(2, &lin).is_err());
    assert!(SignalPrior::FixedVector { b: vec![1.0, 0.0] }.validate(2, &lin).is_err());
    assert!(SignalPrior::PermutedVector { b: vec![1.0, 2.0], m_beta: 1 }.validate(2, &lin).is_err());
    assert!(SignalPrior::permuted(vec![1.0, 2.0, 2.0]).validate(3, &lin).is_ok());
    assert!(SignalPrior::IidGaussian { sigma_beta_sq: 0.0 }.validate(2, &lin).is_err());
}

#[test]
fn permuted_counts_distinct_values() {
    match SignalPrior::permuted(vec![0.5, -0.5, 0.5, 2.0]) {
        SignalPrior::PermutedVector { m_beta, .. } => assert_eq!(m_beta, 3),
        other => panic!("unexpected prior {other:?}"),
    }
}

#[test]
fn partition_counts_match_binomials() {
    for k in 1..=10usize {
        let all: Vec<usize> = (1..=k).collect();
        assert_eq!(enumerate_partitions(k, &all).unwrap().len() as u64, (1u64 << k) - 1);
        for ell in 1..=k {
            let parts = enumerate_partitions(k, &[ell]).unwrap();
            assert_eq!(parts.len() as u64, binom(k as u64, ell as u64));
            assert!(parts.iter().all(|q| q.ell() == ell && q.k() == k));
        }
    }
    assert!(matches!(enumerate_partitions(30, &[1]), Err(Error::Guard(_))));
}

#[test]
fn min_and_max_info_partitions() {
    let b = [3.0, -0.5, 2.0, 0.5, -1.0];
    let lo = min_info_partition(&b, 2).unwrap();
    assert_eq!(lo.s_dif, vec![1, 3]);
    let hi = max_info_partition(&b, 2).unwrap();
    assert_eq!(hi.s_dif, vec![0, 2]);
    assert!(min_info_partition(&b, 0).is_err());
    assert!(max_info_partition(&b, 6).is_err());
}

proptest! {
    #[test]
    fn min_info_partition_has_least_energy(b in prop::collection::vec(0.1f64..5.0, 1..9), pick in 0usize..100) {
        let k = b.len();
        let ell = pick % k + 1;
        let best = min_info_partition(&b, ell).unwrap().energies(&b).0;
        let worst = max_info_partition(&b, ell).unwrap().energies(&b).0;
        for q in enumerate_partitions(k, &[ell]).unwrap() {
            let e = q.energies(&b).0;
            prop_assert!(best <= e + 1e-12 && e <= worst + 1e-12);
        }
    }

    #[test]
    fn mask_round_trip(k in 1usize..20, raw in 1u64..(1 << 20)) {
        let mask = raw & ((1u64 << k) - 1);
        prop_assume!(mask != 0);
        let q = Partition::from_mask(k, mask);
        prop_assert_eq!(q.mask(), mask);
        let rebuilt = Partition::new(q.s_dif.clone(), q.s_eq.clone(), k).unwrap();
        prop_assert_eq!(rebuilt, q);
    }

    #[test]
    fn snr_round_trip(snr in -30.0f64..40.0, sigma in 0.1f64..10.0) {
        let c = c_beta_from_snr(snr, sigma);
        prop_assert!((snr_db_from_c_beta(c, sigma) - snr).abs() < 1e-10);
    }
}

#[test]
fn snr_uses_k_sigma_beta_sq() {
    let prior = SignalPrior::IidGaussian { sigma_beta_sq: 0.1 };
    let v = snr_db(&prior, &ModelSpec::linear(1.0), 10).unwrap();
    assert!(v.abs() < 1e-12);
    assert!(snr_db(&SignalPrior::AllOnes, &ModelSpec::linear(1.0), 10).is_err());
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let dims = ProblemDims::new(20, 3, 15, 0).unwrap();
    let model = ModelSpec::one_bit(0.5);
    let prior = SignalPrior::IidGaussian { sigma_beta_sq: 1.0 };
    let a = sample_realization(&dims, &model, &prior, 7).unwrap();
    let b = sample_realization(&dims, &model, &prior, 7).unwrap();
    let c = sample_realization(&dims, &model, &prior, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.support.len(), 3);
    assert!(a.support.windows(2).all(|w| w[0] < w[1]));
    assert!(a.y.iter().all(|&v| v == 1.0 || v == -1.0));
    assert_eq!(a.x.len(), 15);
    assert!(a.x.iter().all(|r| r.len() == 20));
}

#[test]
fn trial_streams_differ() {
    use rand::Rng;
    let mut r0 = trial_rng(3, 0);
    let mut r1 = trial_rng(3, 1);
    let mut r0b = trial_rng(3, 0);
    let (a, b, c): (u64, u64, u64) = (r0.random(), r1.random(), r0b.random());
    assert_eq!(a, c);
    assert_ne!(a, b);
}

#[test]
fn noiseless_linear_matches_signal() {
    // sigma tiny: y equals x_S b_S to within the noise scale.
    let dims = ProblemDims::new(8, 2, 10, 0).unwrap();
    let b = vec![1.5, -2.0];
    let r = sample_realization(&dims, &ModelSpec::linear(1e-12), &SignalPrior::FixedVector { b: b.clone() }, 1).unwrap();
    assert_eq!(r.beta_support(), b);
    for (row, y) in r.columns(&r.support).iter().zip(&r.y) {
        let s: f64 = row.iter().zip(&b).map(|(x, v)| x * v).sum();
        assert!((s - y).abs() < 1e-9);
    }
}

#[test]
fn group_testing_design_frequency_and_or_channel() {
    // nu / k = 0.25; over 200 x 40 entries the frequency is within 5 SE.
    let dims = ProblemDims::new(40, 4, 200, 0).unwrap();
    let r = sample_realization(&dims, &ModelSpec::group_testing(0.0, 1.0), &SignalPrior::AllOnes, 11).unwrap();
    let ones: f64 = r.x.iter().flatten().sum();
    let total = (200 * 40) as f64;
    let se = (0.25 * 0.75 / total).sqrt();
    assert!((ones / total - 0.25).abs() < 5.0 * se);
    for (row, y) in r.x.iter().zip(&r.y) {
        let hit = r.support.iter().any(|&j| row[j] == 1.0);
        assert_eq!(*y, if hit { 1.0 } else { 0.0 });
    }
}

#[test]
fn permuted_prior_keeps_the_multiset() {
    let mut rng = trial_rng(5, 0);
    let b = vec![1.0, 2.0, 2.0, 3.0];
    for _ in 0..20 {
        let mut v = sample_beta(&SignalPrior::permuted(b.clone()), 4, &mut rng);
        v.sort_by(f64::total_cmp);
        assert_eq!(v, b);
    }
}

#[test]
fn one_bit_sign_follows_signal_without_noise() {
    // Vanishing noise: the sign follows the signal.
    let mut rng = trial_rng(1, 0);
    let ch = Channel::OneBit { sigma: 1e-300 };
    assert!((0..100).all(|_| sample_observation(&ch, 1.0, &mut rng) == 1.0));
    assert!((0..100).all(|_| sample_observation(&ch, -1.0, &mut rng) == -1.0));
}
