use proptest::prelude::*;
use shiftrec_core::data::{consensus_instance, generate_supported, SyntheticSpec};
use shiftrec_core::recsys::find_consensus_patterns;
use shiftrec_core::{
    fairness_probe, ConsensusPattern, Coord, ConvergenceConfig, Error, Method, Recommender, Shape, SparseTensor,
};

fn matrix(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> SparseTensor {
    SparseTensor::from_entries(
        Shape::new(vec![rows, cols]).unwrap(),
        entries.iter().map(|&(i, j, v)| (Coord::from([i, j]), v)),
    )
    .unwrap()
}

fn cfg() -> ConvergenceConfig {
    ConvergenceConfig::default()
}

#[test]
fn known_ratings_pass_through() {
    let t = matrix(2, 3, &[(1, 1, 4.0), (1, 3, 2.5), (2, 2, 1.0), (2, 3, 3.0)]);
    let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
    for (alpha, v) in t.iter() {
        assert_eq!(rs.recommend(&alpha).unwrap().to_bits(), v.to_bits());
    }
    assert!(matches!(rs.recommend(&Coord::from([3, 1])), Err(Error::OutOfBounds { .. })));
}

#[test]
fn sc_and_uc_two_by_two_predictions() {
    let sc = Recommender::new(&matrix(2, 2, &[(1, 2, 2.0), (2, 1, 3.0), (2, 2, 4.0)]), Method::Sc, &cfg()).unwrap();
    assert!((sc.recommend(&Coord::from([1, 1])).unwrap() - 1.0).abs() < 1e-9);
    let uc = Recommender::new(&matrix(2, 2, &[(1, 2, 4.0), (2, 1, 6.0), (2, 2, 8.0)]), Method::Uc, &cfg()).unwrap();
    assert!((uc.recommend(&Coord::from([1, 1])).unwrap() - 3.0).abs() < 1e-9);
}

#[test]
fn top_n_ranks_unrated_items() {
    // rows share the column pattern (1, 1, 4, 2); user 1 has rated items 1 and 2
    let mut entries = vec![(1, 1, 1.0), (1, 2, 1.0)];
    entries.extend([(2, 1, 1.0), (2, 2, 1.0), (2, 3, 4.0), (2, 4, 2.0)]);
    let rs = Recommender::new(&matrix(2, 4, &entries), Method::Sc, &cfg()).unwrap();
    assert!((rs.recommend(&Coord::from([1, 3])).unwrap() - 4.0).abs() < 1e-9);
    assert!((rs.recommend(&Coord::from([1, 4])).unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(rs.top_n(1, 1).unwrap().items, vec![3]);
    assert_eq!(rs.top_n(1, 5).unwrap().items, vec![3, 4]);
    assert!(rs.top_n(2, 3).unwrap().items.is_empty());
    assert!(matches!(rs.top_n(1, 0), Err(Error::InvalidConfig(_))));
}

#[test]
fn equal_predictions_rank_by_item_id() {
    let entries = [(1, 1, 2.0), (2, 1, 2.0), (2, 2, 3.0), (2, 3, 3.0), (2, 4, 3.0)];
    let rs = Recommender::new(&matrix(2, 4, &entries), Method::Sc, &cfg()).unwrap();
    assert_eq!(rs.top_n(1, 3).unwrap().items, vec![2, 3, 4]);
}

#[test]
fn products_ordered_by_every_rater_stay_ordered() {
    // item 1 below item 2 for users 1..3; users 4 and 5 rated neither
    let entries = [
        (1, 1, 1.0),
        (1, 2, 3.0),
        (1, 3, 4.0),
        (2, 1, 2.0),
        (2, 2, 2.5),
        (3, 1, 4.0),
        (3, 2, 5.0),
        (3, 3, 1.0),
        (4, 3, 5.0),
        (5, 3, 2.0),
        (5, 4, 1.0),
    ];
    let t = matrix(5, 4, &entries);
    let pattern = ConsensusPattern::new(&t, 2, vec![1, 2]).unwrap();
    assert_eq!(pattern.sigma_bar, vec![Coord::from([4]), Coord::from([5])]);
    let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
    let outcome = rs.verify_consensus(&pattern).unwrap();
    assert!(outcome.holds(), "{outcome:?}");
    assert_eq!(outcome.checked, 2);
    for u in [4, 5] {
        assert!(rs.recommend(&Coord::from([u, 1])).unwrap() < rs.recommend(&Coord::from([u, 2])).unwrap());
    }
}

#[test]
fn users_ordered_on_every_shared_product_stay_ordered() {
    let (t, pattern) = consensus_instance(&[4, 7], 1, 3, 17).unwrap();
    assert_eq!(pattern.axis, 1);
    let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
    assert!(rs.verify_consensus(&pattern).unwrap().holds());
}

#[test]
fn attribute_ordering_on_a_three_way_tensor() {
    let (t, pattern) = consensus_instance(&[4, 3, 3], 3, 2, 5).unwrap();
    let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
    assert_eq!(rs.completion().catalog().order(), 2);
    let outcome = rs.verify_consensus(&pattern).unwrap();
    assert!(outcome.holds(), "{outcome:?}");
}

#[test]
fn malformed_patterns_are_rejected() {
    let t = matrix(3, 3, &[(1, 1, 1.0), (1, 2, 2.0), (2, 1, 1.0), (3, 2, 5.0), (3, 3, 5.0)]);
    // columns 1 and 2 have different known sets
    assert!(matches!(ConsensusPattern::new(&t, 2, vec![1, 2]), Err(Error::MalformedPattern(_))));
    // rows 1 and 3 have different known sets too
    assert!(ConsensusPattern::new(&t, 1, vec![1, 3]).is_err());
    let ties = matrix(2, 2, &[(1, 1, 2.0), (2, 1, 2.0)]);
    assert!(matches!(ConsensusPattern::new(&ties, 1, vec![1, 2]), Err(Error::MalformedPattern(_))));
    assert!(ConsensusPattern::new(&ties, 3, vec![1, 2]).is_err());
    assert!(ConsensusPattern::new(&ties, 1, vec![1]).is_err());
}

#[test]
fn pattern_for_other_data_is_rejected() {
    let (t, pattern) = consensus_instance(&[5, 6], 2, 2, 3).unwrap();
    let other = t.filter(|c, _| c.0 != pattern.sigma[0].0.iter().copied().chain([pattern.gamma[0]]).collect::<Vec<_>>());
    let rs = Recommender::new(&other, Method::Sc, &cfg()).unwrap();
    assert!(rs.verify_consensus(&pattern).is_err());
}

#[test]
fn discovered_patterns_hold() {
    let (t, _) = consensus_instance(&[6, 5], 2, 3, 8).unwrap();
    let patterns = find_consensus_patterns(&t, 2, 10).unwrap();
    assert!(!patterns.is_empty());
    let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
    for p in &patterns {
        assert!(rs.verify_consensus(p).unwrap().holds());
    }
}

fn fairness_instance() -> SparseTensor {
    let spec = SyntheticSpec {
        factor_range: (0.0, 2.5),
        ..SyntheticSpec::additive(vec![30, 25], 0.4)
    };
    generate_supported(&spec, 4, 50).unwrap().0.observed
}

#[test]
fn shifting_one_user_leaves_others_untouched() {
    let t = fairness_instance();
    let ns: Vec<usize> = (1..=25).collect();
    let report = fairness_probe(&t, 3, 1.0, &ns, Method::Sc, &cfg()).unwrap();
    assert!(report.max_other_deviation <= 1e-9, "{report:?}");
    assert!(report.unaffected());
    assert!(report.shifted_user_deviation <= 1e-9);
    let csv = report.to_csv();
    assert!(csv.starts_with("N,changed_user_count\n1,0\n"));
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn zero_delta_changes_nothing() {
    let t = fairness_instance();
    let report = fairness_probe(&t, 1, 0.0, &[1, 5], Method::Sc, &cfg()).unwrap();
    assert_eq!(report.max_other_deviation, 0.0);
    assert_eq!(report.changed_users, vec![0, 0]);
}

#[test]
fn uc_probe_scales_the_user() {
    let t = fairness_instance().map_values(|v| v.abs() + 1.0).unwrap();
    let report = fairness_probe(&t, 2, 1.0, &[1, 10], Method::Uc, &cfg()).unwrap();
    assert!(report.scale_factor.unwrap() > 1.0);
    assert!(report.max_other_deviation <= 1e-9);
    assert!(report.shifted_user_deviation <= 1e-9);
}

#[test]
fn user_without_ratings_is_an_error() {
    let t = matrix(3, 3, &[(1, 1, 1.0), (2, 2, 2.0)]);
    assert!(fairness_probe(&t, 3, 1.0, &[1], Method::Sc, &cfg()).is_err());
    assert!(fairness_probe(&t, 4, 1.0, &[1], Method::Sc, &cfg()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn consensus_holds_on_matrices(m in 2usize..=8, n in 2usize..=8, axis in 1usize..=2, seed in any::<u64>()) {
        let extent = if axis == 1 { m } else { n };
        let rest = if axis == 1 { n } else { m };
        prop_assume!(rest >= 2);
        let slices = 2 + (seed as usize) % (extent - 1);
        let (t, pattern) = consensus_instance(&[m, n], axis, slices, seed).unwrap();
        let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
        let outcome = rs.verify_consensus(&pattern).unwrap();
        prop_assert!(outcome.holds(), "{:?}", outcome.violations);
    }

    #[test]
    fn consensus_holds_on_three_way_tensors(extents in prop::collection::vec(2usize..=4, 3), axis in 1usize..=3, seed in any::<u64>()) {
        let extent = extents[axis - 1];
        let slices = 2 + (seed as usize) % (extent - 1);
        let (t, pattern) = consensus_instance(&extents, axis, slices, seed).unwrap();
        let rs = Recommender::new(&t, Method::Sc, &cfg()).unwrap();
        let outcome = rs.verify_consensus(&pattern).unwrap();
        prop_assert!(outcome.holds(), "{:?}", outcome.violations);
    }

    #[test]
    fn single_user_shift_is_invisible_to_others(seed in any::<u64>(), delta in -3.0..3.0f64, user in 1usize..=12) {
        let t = generate_supported(&SyntheticSpec::additive(vec![12, 10], 0.5), seed, 50).unwrap().0.observed;
        prop_assume!(t.iter().any(|(c, _)| c.0[0] == user));
        let report = fairness_probe(&t, user, delta, &[1, 3, 5], Method::Sc, &cfg()).unwrap();
        prop_assert!(report.max_other_deviation <= 1e-9);
        prop_assert!(report.unaffected());
        prop_assert!(report.shifted_user_deviation <= 1e-9);
    }
}
