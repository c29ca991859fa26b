use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;
use shiftrec_core::coo::{parse_coo, read_coo, save_coo, write_coo};
use shiftrec_core::data::{
    generate, parse_movielens, parse_movielens_reader, split, Flavor, RatingsDataset, Scale, SplitSpec, SyntheticSpec,
};
use shiftrec_core::{Coord, Error, Shape, SparseTensor};

const ML100K_SAMPLE: &str = "196\t242\t3\t881250949\n186\t302\t3\t891717742\n22\t377\t1\t878887116\n196\t377\t4\t881250950\n";

fn dataset(users: usize, items: usize, seed: u64) -> RatingsDataset {
    let spec = SyntheticSpec {
        factor_range: (0.5, 2.5),
        discretize: Some(Scale::ONE_TO_FIVE),
        ..SyntheticSpec::additive(vec![users, items], 0.5)
    };
    RatingsDataset::from_matrix(generate(&spec, seed).unwrap().observed, Scale::ONE_TO_FIVE).unwrap()
}

#[test]
fn ml100k_lines_are_remapped_densely() {
    let ds = parse_movielens_reader(ML100K_SAMPLE.as_bytes(), Flavor::Ml100k, "sample").unwrap();
    assert_eq!((ds.users(), ds.items(), ds.ratings()), (3, 3, 4));
    // external ids sorted ascending: users 22, 186, 196; items 242, 302, 377
    assert_eq!(ds.user_index(196), Some(3));
    assert_eq!(ds.item_index(377), Some(3));
    assert_eq!(ds.matrix.get(&Coord::from([3, 3])), Some(4.0));
    assert_eq!(ds.matrix.get(&Coord::from([1, 3])), Some(1.0));
}

#[test]
fn ml1m_and_ml10m_separators_and_scales() {
    let text = "1::1193::5::978300760\n1::661::3::978302109\n2::1193::4::978298413\n";
    let ds = parse_movielens_reader(text.as_bytes(), Flavor::Ml1m, "ml1m").unwrap();
    assert_eq!((ds.users(), ds.items(), ds.ratings()), (2, 2, 3));

    let half = "5::10::3.5::838985046\n";
    assert!(parse_movielens_reader(half.as_bytes(), Flavor::Ml10m, "ml10m").is_ok());
    assert!(parse_movielens_reader(half.as_bytes(), Flavor::Ml1m, "ml1m").is_err());
}

#[test]
fn malformed_rating_names_line_and_field() {
    let text = "1::5::3::978300761\n1::5::x::978300760\n";
    let err = parse_movielens_reader(text.as_bytes(), Flavor::Ml1m, "ratings.dat").unwrap_err();
    match &err {
        Error::Parse { line, message, .. } => {
            assert_eq!(*line, 2);
            assert!(message.contains("rating"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(err.to_string().contains("ratings.dat"));
}

#[test]
fn duplicates_and_out_of_scale_ratings_are_rejected() {
    let dup = "1\t2\t3\t0\n1\t2\t4\t1\n";
    assert!(matches!(
        parse_movielens_reader(dup.as_bytes(), Flavor::Ml100k, "dup"),
        Err(Error::Parse { line: 2, .. })
    ));
    let high = "1\t2\t6\t0\n";
    assert!(parse_movielens_reader(high.as_bytes(), Flavor::Ml100k, "high").is_err());
    let short = "1\t2\t3\n";
    assert!(parse_movielens_reader(short.as_bytes(), Flavor::Ml100k, "short").is_err());
}

#[test]
fn gzip_input_is_read_transparently() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.data.gz");
    let mut enc = GzEncoder::new(std::fs::File::create(&path).unwrap(), Compression::default());
    enc.write_all(ML100K_SAMPLE.as_bytes()).unwrap();
    enc.finish().unwrap();
    let ds = parse_movielens(&path, Flavor::Ml100k).unwrap();
    assert_eq!(ds.ratings(), 4);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = parse_movielens(std::path::Path::new("/nonexistent/u.data"), Flavor::Ml100k).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn coo_format_details() {
    let text = "# a comment\n# shape 2 3\n1 3 -0.5\n\n2 1 4\n";
    let t = parse_coo(text.as_bytes(), "inline").unwrap();
    assert_eq!(t.shape().extents(), &[2, 3]);
    assert_eq!(t.get(&Coord::from([1, 3])), Some(-0.5));
    assert!(parse_coo("1 1 2.0\n".as_bytes(), "x").is_err());
    assert!(parse_coo("# shape 2 2\n3 1 1.0\n".as_bytes(), "x").is_err());
    assert!(parse_coo("# shape 2 2\n1 1 abc\n".as_bytes(), "x").is_err());
}

#[test]
fn split_counts_follow_floor() {
    let ds = dataset(40, 50, 1);
    let spec = SplitSpec { test_fraction: 0.2, ..SplitSpec::default() };
    let s = split(&ds, &spec).unwrap();
    let n_test = (0.2 * ds.ratings() as f64).floor() as usize;
    assert_eq!(s.test().len(), n_test);
    let pool = ds.ratings() - n_test;
    assert_eq!(s.train_at(0.5).unwrap().nnz(), (0.5 * pool as f64).floor() as usize);
    assert_eq!(s.train_at(1.0).unwrap().nnz(), pool);
    assert!(s.train_at(0.0).is_err());
}

#[test]
fn splits_are_deterministic_per_seed() {
    let ds = dataset(20, 30, 2);
    let spec = SplitSpec { seed: 7, ..SplitSpec::default() };
    let (a, b) = (split(&ds, &spec).unwrap(), split(&ds, &spec).unwrap());
    assert_eq!(a.test(), b.test());
    assert_eq!(a.train_at(0.3).unwrap(), b.train_at(0.3).unwrap());
    let c = split(&ds, &SplitSpec { seed: 8, ..spec }).unwrap();
    assert_ne!(a.test(), c.test());
}

#[test]
fn cold_users_are_flagged() {
    let t = SparseTensor::from_entries(
        Shape::new(vec![3, 3]).unwrap(),
        vec![(Coord::from([1, 1]), 1.0), (Coord::from([2, 2]), 2.0), (Coord::from([3, 3]), 3.0)],
    )
    .unwrap();
    let ds = RatingsDataset::from_matrix(t, Scale::ONE_TO_FIVE).unwrap();
    let s = split(&ds, &SplitSpec { test_fraction: 0.34, ..SplitSpec::default() }).unwrap();
    let flags = s.flags(&s.train_at(1.0).unwrap());
    assert!(flags.degenerate());
    assert_eq!(flags.cold_test_entries, 1);
}

#[test]
fn invalid_split_specs() {
    let ds = dataset(5, 5, 3);
    for f in [0.0, 1.0, -0.1] {
        assert!(split(&ds, &SplitSpec { test_fraction: f, ..SplitSpec::default() }).is_err());
    }
    assert!(split(&ds, &SplitSpec { fractions: vec![0.5, 1.2], ..SplitSpec::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coo_round_trip_is_exact(users in 1usize..=12, items in 1usize..=12, seed in any::<u64>()) {
        let spec = SyntheticSpec { noise_std: 0.3, ..SyntheticSpec::additive(vec![users, items], 0.6) };
        let t = generate(&spec, seed).unwrap().observed;
        let mut buf = Vec::new();
        write_coo(&t, &mut buf).unwrap();
        prop_assert_eq!(parse_coo(buf.as_slice(), "buf").unwrap(), t.clone());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.coo");
        save_coo(&t, &path).unwrap();
        prop_assert_eq!(read_coo(&path).unwrap(), t);
    }

    #[test]
    fn split_partitions_the_ratings(users in 2usize..=15, items in 2usize..=15, seed in any::<u64>(), test_fraction in 0.05..0.6f64) {
        let ds = dataset(users, items, seed);
        let s = split(&ds, &SplitSpec { test_fraction, seed, ..SplitSpec::default() }).unwrap();
        let train = s.train_at(1.0).unwrap();
        prop_assert_eq!(train.nnz() + s.test().len(), ds.ratings());
        for (c, v) in s.test() {
            prop_assert!(!train.contains(c));
            prop_assert_eq!(ds.matrix.get(c), Some(*v));
        }
        for (c, v) in train.iter() {
            prop_assert_eq!(ds.matrix.get(&c), Some(v));
        }
        // smaller sweep points are prefixes of larger ones
        let half = s.train_at(0.5).unwrap();
        prop_assert!(half.iter().all(|(c, _)| train.contains(&c)));
    }

    #[test]
    fn discretized_values_stay_on_the_lattice(seed in any::<u64>(), noise in 0.0..2.0f64) {
        let scale = Scale::new(0.5, 5.0, 0.5).unwrap();
        let spec = SyntheticSpec {
            factor_range: (-1.0, 4.0),
            noise_std: noise,
            discretize: Some(scale),
            ..SyntheticSpec::additive(vec![6, 7], 0.5)
        };
        let inst = generate(&spec, seed).unwrap();
        prop_assert!(inst.truth.values().iter().all(|&v| scale.contains(v)));
    }
}
