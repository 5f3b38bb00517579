use std::collections::BTreeSet;

use ordinal_embed_core::geometry::{apply_similarity, dot, sq_dist, Configuration, SphericalConfiguration};
use ordinal_embed_core::rankings::*;
use ordinal_embed_core::rng::stream_rng;
use ordinal_embed_core::sampling::{random_gauge_pair, random_similarity, sample_sphere, Design};
use proptest::prelude::*;

/// Ranks by sorting `keys` ascending; rank 1 for the smallest key.
fn sort_ranks(keys: &[f64]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap());
    let mut ranks = vec![0; keys.len()];
    for (r, &k) in idx.iter().enumerate() {
        ranks[k] = r as u32 + 1;
    }
    ranks
}

#[test]
fn point_ranks_match_brute_force_sort() {
    let mut rng = stream_rng(30, 0);
    let x = Design::UniformCube.sample(2, 5, &mut rng).unwrap();
    let y = Design::UniformCube.sample(2, 7, &mut rng).unwrap();
    let r = row_ranks_point(&x, &y).unwrap();
    for i in 0..5 {
        let d: Vec<f64> = y.points().map(|q| sq_dist(x.point(i), q)).collect();
        assert_eq!(r.row(i), sort_ranks(&d).as_slice());
    }
}

#[test]
fn vector_ranks_match_brute_force_sort() {
    let mut rng = stream_rng(31, 0);
    let x = sample_sphere(3, 6, &mut rng).unwrap();
    let y = Design::UniformBall.sample(3, 9, &mut rng).unwrap();
    let r = row_ranks_vector(&x, &y).unwrap();
    for i in 0..6 {
        let neg: Vec<f64> = y.points().map(|q| -dot(x.point(i), q)).collect();
        assert_eq!(r.row(i), sort_ranks(&neg).as_slice());
    }
}

#[test]
fn mds_ranks_use_symmetric_distances() {
    let mut rng = stream_rng(32, 0);
    let x = Design::UniformBall.sample(2, 10, &mut rng).unwrap();
    let r = mds_row_ranks(&x).unwrap();
    for i in 0..10 {
        assert_eq!(r.rank(i, i), 1);
        let d: Vec<f64> = (0..10).map(|j| sq_dist(x.point(j), x.point(i))).collect();
        assert_eq!(r.row(i), sort_ranks(&d).as_slice());
    }
}

#[test]
fn full_sample_equals_enumeration() {
    let mut rng = stream_rng(33, 0);
    let x = Design::UniformBall.sample(2, 6, &mut rng).unwrap();
    let r = mds_row_ranks(&x).unwrap();
    let full = triples_from_ranks(&r, ComparisonModel::SelfDistance, None, 0).unwrap();
    let total = comparison_count(ComparisonModel::SelfDistance, &r);
    assert_eq!(full.len(), total);
    let sampled = triples_from_ranks(&r, ComparisonModel::SelfDistance, Some(total), 9).unwrap();
    let a: BTreeSet<Triple> = full.triples().iter().copied().collect();
    let b: BTreeSet<Triple> = sampled.triples().iter().copied().collect();
    assert_eq!(a, b);
    assert!(triples_from_ranks(&r, ComparisonModel::SelfDistance, Some(0), 9)
        .unwrap()
        .is_empty());
    assert!(triples_from_ranks(&r, ComparisonModel::SelfDistance, Some(total + 1), 9).is_err());
    assert!(full
        .triples()
        .iter()
        .all(|t| t.first != t.viewer && t.second != t.viewer));
}

#[test]
fn independent_configuration_violates_about_half() {
    let mut rng = stream_rng(34, 0);
    let a = Design::UniformCube.sample(2, 20, &mut rng).unwrap();
    let b = Design::UniformCube.sample(2, 20, &mut rng).unwrap();
    let t = triples_from_ranks(&mds_row_ranks(&a).unwrap(), ComparisonModel::SelfDistance, None, 0).unwrap();
    let frac = violation_count(&t, &b, &b).unwrap() as f64 / t.len() as f64;
    assert!((0.3..=0.7).contains(&frac), "{frac}");
    assert_eq!(violation_count(&t, &a, &a).unwrap(), 0);
}

#[test]
fn swapping_two_objects_changes_data() {
    let mut rng = stream_rng(35, 0);
    let x = Design::UniformBall.sample(2, 4, &mut rng).unwrap();
    let y = Design::UniformBall.sample(2, 6, &mut rng).unwrap();
    let mut rows = y.to_rows();
    rows.swap(0, 1);
    let swapped = Configuration::new(2, rows).unwrap();
    assert!(!rank_data_equal(&x, &y, &x, &swapped, ComparisonModel::PointDistance).unwrap());
}

#[test]
fn scaled_objects_keep_vector_ranks() {
    let mut rng = stream_rng(36, 0);
    let x = sample_sphere(2, 4, &mut rng).unwrap();
    let y = Design::UniformBall.sample(2, 6, &mut rng).unwrap();
    let y2 = y.map_points(|p| p.iter().map(|v| 2.0 * v).collect()).unwrap();
    let xc = x.as_configuration();
    assert!(rank_data_equal(xc, &y, xc, &y2, ComparisonModel::VectorInnerProduct).unwrap());
}

#[test]
fn sphere_distance_and_inner_product_rankings_agree() {
    let mut rng = stream_rng(37, 0);
    for p in [2, 3, 5] {
        let s = sample_sphere(p, 25, &mut rng).unwrap();
        let by_distance = mds_row_ranks(s.as_configuration()).unwrap();
        let by_inner = row_ranks_vector(&s, s.as_configuration()).unwrap();
        assert_eq!(by_distance, by_inner);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn point_ranks_invariant_under_similarity(seed in any::<u64>(), p in 1usize..5) {
        let mut rng = stream_rng(seed, 1);
        let x = Design::UniformBall.sample(p, 5, &mut rng).unwrap();
        let y = Design::UniformBall.sample(p, 8, &mut rng).unwrap();
        let t = random_similarity(p, &mut rng);
        let before = row_ranks_point(&x, &y).unwrap();
        let after = row_ranks_point(&apply_similarity(&t, &x).unwrap(), &apply_similarity(&t, &y).unwrap()).unwrap();
        prop_assert_eq!(&before, &after);
        prop_assert_eq!(mds_row_ranks(&y).unwrap(), mds_row_ranks(&apply_similarity(&t, &y).unwrap()).unwrap());
    }

    #[test]
    fn vector_ranks_invariant_under_gauge_pair(seed in any::<u64>(), p in 2usize..5) {
        let mut rng = stream_rng(seed, 2);
        let x: SphericalConfiguration = sample_sphere(p, 5, &mut rng).unwrap();
        let y = Design::UniformBall.sample(p, 8, &mut rng).unwrap();
        let g = random_gauge_pair(p, 10.0, &mut rng);
        let before = row_ranks_vector(&x, &y).unwrap();
        let after = row_ranks_vector(&g.apply_individuals(&x).unwrap(), &g.apply_objects(&y).unwrap()).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn own_triples_have_no_violations(seed in any::<u64>(), model in 0usize..3) {
        let mut rng = stream_rng(seed, 3);
        let model = [ComparisonModel::PointDistance, ComparisonModel::VectorInnerProduct, ComparisonModel::SelfDistance][model];
        let y = Design::UniformBall.sample(3, 7, &mut rng).unwrap();
        let x = match model {
            ComparisonModel::VectorInnerProduct => sample_sphere(3, 4, &mut rng).unwrap().as_configuration().clone(),
            ComparisonModel::PointDistance => Design::UniformBall.sample(3, 4, &mut rng).unwrap(),
            ComparisonModel::SelfDistance => y.clone(),
        };
        let r = ranks_for_model(model, &x, &y).unwrap();
        let t = triples_from_ranks(&r, model, None, 0).unwrap();
        prop_assert_eq!(t.len(), comparison_count(model, &r));
        prop_assert_eq!(violation_count(&t, &x, &y).unwrap(), 0);
    }
}
