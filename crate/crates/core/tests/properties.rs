//! Property tests for the spec-level invariants.

use proptest::prelude::*;

use pointens::ensemble::{
    aggregate, predictions, standardize, weighted_mix, EnsembleMethod, ScoreMatrix, WeightVector,
};
use pointens::evaluate::{best_per_class_rank, metrics_report};
use pointens::numerics::{argmax, softmax, Mat};
use pointens::pointcloud::{farthest_point_sampling, make_split_indices, BagMode, BaggingSpec, PointCloud};

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

fn cloud_points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0], n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_sums_to_one_and_preserves_argmax(v in finite_vec(1..12)) {
        let p = softmax(&v).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        prop_assert_eq!(argmax(&p), argmax(&v));
    }

    #[test]
    fn normalize_is_idempotent_and_similarity_invariant(
        points in cloud_points(2..40),
        shift in [-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0],
        scale in 0.1f64..10.0,
    ) {
        let pc = PointCloud::new(points.clone()).unwrap();
        let normalized = pc.normalize();
        let twice = normalized.normalize();
        for (a, b) in normalized.points().iter().zip(twice.points()) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
        let transformed: Vec<[f64; 3]> = points
            .iter()
            .map(|p| [p[0] * scale + shift[0], p[1] * scale + shift[1], p[2] * scale + shift[2]])
            .collect();
        let other = PointCloud::new(transformed).unwrap().normalize();
        for (a, b) in normalized.points().iter().zip(other.points()) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }

    // With distinct points, the set of coordinates FPS picks depends only on
    // the starting point, not on storage order.
    #[test]
    fn fps_selection_is_storage_order_invariant(
        seed in 0u64..10_000,
        n in 4usize..32,
        m_frac in 0.2f64..1.0,
    ) {
        let mut rng = pointens::numerics::Rng::new(seed);
        let points: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
            .collect();
        let m = ((n as f64 * m_frac) as usize).max(1);
        let pc = PointCloud::new(points.clone()).unwrap();
        let picked = farthest_point_sampling(&pc, m, 0).unwrap();
        let mut selected: Vec<[f64; 3]> = picked.iter().map(|&i| points[i]).collect();

        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let permuted = pc.permuted(&perm).unwrap();
        let new_start = perm.iter().position(|&src| src == 0).unwrap();
        let picked_perm = farthest_point_sampling(&permuted, m, new_start).unwrap();
        let mut selected_perm: Vec<[f64; 3]> =
            picked_perm.iter().map(|&i| permuted.points()[i]).collect();

        let key = |p: &[f64; 3]| (p[0].to_bits(), p[1].to_bits(), p[2].to_bits());
        selected.sort_by_key(key);
        selected_perm.sort_by_key(key);
        prop_assert_eq!(selected, selected_perm);
    }

    #[test]
    fn splits_have_the_contracted_sizes(
        n in 1usize..200,
        fraction in 0.05f64..1.0,
        seed in 0u64..1000,
    ) {
        let spec = BaggingSpec { mode: BagMode::WithoutReplacement(fraction), seed };
        let expected = (fraction * n as f64).round() as usize;
        match make_split_indices(n, &spec) {
            Ok(split) => {
                prop_assert_eq!(split.len(), expected);
                let mut sorted = split;
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), expected, "duplicates in split");
            }
            Err(_) => prop_assert_eq!(expected, 0),
        }
        let boot = make_split_indices(n, &BaggingSpec { mode: BagMode::WithReplacement, seed }).unwrap();
        prop_assert_eq!(boot.len(), n);
    }

    #[test]
    fn metrics_report_invariant_triple(
        classes in 2usize..6,
        extra in 0usize..40,
        seed in 0u64..10_000,
    ) {
        let mut rng = pointens::numerics::Rng::new(seed);
        let n = classes + extra;
        let labels: Vec<usize> = (0..n)
            .map(|i| if i < classes { i } else { rng.index(classes) })
            .collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.index(classes)).collect();
        let r = metrics_report(&preds, &labels, classes).unwrap();
        prop_assert!(r.per_class_accuracy.iter().all(|&a| (0.0..=1.0).contains(&a)));
        let mean: f64 = r.per_class_accuracy.iter().sum::<f64>() / classes as f64;
        prop_assert!((r.mean_class_accuracy - mean).abs() < 1e-12);
        let weighted: f64 = r
            .per_class_accuracy
            .iter()
            .zip(&r.class_counts)
            .map(|(a, &c)| a * c as f64)
            .sum::<f64>() / n as f64;
        prop_assert!((r.instance_accuracy - weighted).abs() < 1e-12);
    }

    #[test]
    fn rank_scores_partition_the_classes(
        classes in 2usize..6,
        n_reports in 1usize..5,
        seed in 0u64..10_000,
    ) {
        let mut rng = pointens::numerics::Rng::new(seed);
        let n = classes * 3;
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let reports: Vec<_> = (0..n_reports)
            .map(|_| {
                let preds: Vec<usize> = (0..n).map(|_| rng.index(classes)).collect();
                metrics_report(&preds, &labels, classes).unwrap()
            })
            .collect();
        let scores = best_per_class_rank(&reports).unwrap();
        let total: f64 = scores.iter().sum();
        prop_assert!((total - classes as f64).abs() < 1e-9);
    }

    #[test]
    fn voting_invariants_hold_on_random_matrices(
        classes in 2usize..5,
        extra in 0usize..12,
        k in 1usize..5,
        seed in 0u64..10_000,
    ) {
        let mut rng = pointens::numerics::Rng::new(seed);
        let samples = classes + extra;
        let labels: Vec<usize> = (0..samples)
            .map(|i| if i < classes { i } else { rng.index(classes) })
            .collect();
        let mats: Vec<ScoreMatrix> = (0..k)
            .map(|i| {
                let data: Vec<f64> = (0..samples * classes)
                    .map(|_| rng.uniform() * 6.0 - 3.0)
                    .collect();
                ScoreMatrix::new(
                    Mat::new(samples, classes, data).unwrap(),
                    labels.clone(),
                    (0..samples as u64).collect(),
                    format!("m{i}"),
                )
                .unwrap()
            })
            .collect();
        let refs: Vec<&ScoreMatrix> = mats.iter().collect();

        let soft = aggregate(&refs, EnsembleMethod::SoftVote).unwrap();
        let hard = aggregate(&refs, EnsembleMethod::HardVote).unwrap();
        for i in 0..samples {
            prop_assert!((soft.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((hard.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for &x in hard.row(i) {
                let scaled = x * k as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            }
        }

        // Uniform weighted mix equals raw-mean aggregation.
        let uniform = WeightVector::new(vec![1.0 / k as f64; k]).unwrap();
        let mix = weighted_mix(&refs, &uniform).unwrap();
        let mean = aggregate(&refs, EnsembleMethod::RawMean).unwrap();
        for i in 0..samples {
            for (x, y) in mix.row(i).iter().zip(mean.row(i)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        // Standardizing any matrix against another preserves its argmax.
        let standardized = standardize(&mats[0], mats.last().unwrap());
        if let Ok(s) = standardized {
            prop_assert_eq!(predictions(&s), predictions(&mats[0]));
        }
    }
}
