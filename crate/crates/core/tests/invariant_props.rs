//! Property tests for the structural invariants of bagging and the losses.

use agglearn_core::bagging::{
    aggregate_responses, assign_bags, bag_deviation, bag_mean_blend, bag_mean_projection,
    AggregateDataset, BagAssignment,
};
use agglearn_core::linalg::Matrix;
use agglearn_core::losses::{bag_loss, instance_loss, interpolating_loss, regularizer, ScalarLoss};
use proptest::prelude::*;

/// Bag count, bag size, and a seed; `n = bags * k` keeps divisibility by
/// construction.
fn shape() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=12, 1usize..=5, any::<u64>())
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_covers_every_index_once((bags, k, seed) in shape()) {
        let n = bags * k;
        let a = assign_bags(n, k, seed).unwrap();
        let mut seen = vec![false; n];
        for bag in a.bags() {
            prop_assert_eq!(bag.len(), k);
            for &i in bag {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        for i in 0..n {
            prop_assert!(a.bags()[a.bag_of(i)].contains(&i));
        }
    }

    #[test]
    fn projection_is_idempotent_sum_preserving_orthogonal(
        (bags, k, seed) in shape(),
        raw in values(12 * 5),
    ) {
        let n = bags * k;
        let v = &raw[..n];
        let a = assign_bags(n, k, seed).unwrap();
        let p = bag_mean_projection(v, &a).unwrap();
        let pp = bag_mean_projection(&p, &a).unwrap();
        for (x, y) in p.iter().zip(&pp) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        let sum_v: f64 = v.iter().sum();
        let sum_p: f64 = p.iter().sum();
        prop_assert!((sum_v - sum_p).abs() <= 1e-9 * sum_v.abs().max(1.0));

        let resid: Vec<f64> = v.iter().zip(&p).map(|(x, y)| x - y).collect();
        let inner: f64 = resid.iter().zip(&p).map(|(r, q)| r * q).sum();
        let scale: f64 = v.iter().map(|x| x * x).sum::<f64>().max(1.0);
        prop_assert!(inner.abs() <= 1e-10 * scale);
    }

    #[test]
    fn deviation_annihilates_bag_constants((bags, k, seed) in shape(), raw in values(12)) {
        let n = bags * k;
        let a = assign_bags(n, k, seed).unwrap();
        // expand a per-bag vector into a bag-constant sample vector
        let v: Vec<f64> = (0..n).map(|i| raw[a.bag_of(i)]).collect();
        for x in bag_deviation(&v, &a, 0.8).unwrap() {
            prop_assert!(x.abs() <= 1e-12);
        }
    }

    #[test]
    fn blend_interpolates_between_identity_and_projection(
        (bags, k, seed) in shape(),
        raw in values(12 * 5),
        rho in 0.0f64..=1.0,
    ) {
        let n = bags * k;
        let v = &raw[..n];
        let a = assign_bags(n, k, seed).unwrap();
        let p = bag_mean_projection(v, &a).unwrap();
        let e = bag_mean_blend(v, &a, rho).unwrap();
        for ((&vi, &pi), &ei) in v.iter().zip(&p).zip(&e) {
            let expect = rho * vi + (1.0 - rho) * pi;
            prop_assert!((ei - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn quadratic_decomposition_and_convex_ordering(
        (bags, k, seed) in shape(),
        raw_y in values(12 * 5),
        raw_p in values(12 * 5),
    ) {
        let n = bags * k;
        let a = assign_bags(n, k, seed).unwrap();
        let y = &raw_y[..n];
        let preds = &raw_p[..n];
        let agg = AggregateDataset::from_responses(Matrix::zeros(n, 1), y, a.clone()).unwrap();

        let quad = ScalarLoss::quadratic();
        let ins = instance_loss(preds, &agg, &quad).unwrap();
        let bag = bag_loss(preds, &agg, &quad).unwrap();
        let reg = regularizer(preds, &a).unwrap();
        prop_assert!(reg >= 0.0);
        prop_assert!((ins - bag - reg).abs() <= 1e-12 * ins.abs().max(1.0));

        for loss in [quad, ScalarLoss::log_cosh(), ScalarLoss::absolute()] {
            let b = bag_loss(preds, &agg, &loss).unwrap();
            let i = instance_loss(preds, &agg, &loss).unwrap();
            prop_assert!(b <= i + 1e-12 * i.abs().max(1.0), "{}", loss.name);
        }
    }

    #[test]
    fn interpolating_loss_is_affine_in_rho(
        (bags, k, seed) in shape(),
        raw_y in values(12 * 5),
        raw_p in values(12 * 5),
        rho in 0.0f64..=0.5,
    ) {
        let n = bags * k;
        let a = assign_bags(n, k, seed).unwrap();
        let agg =
            AggregateDataset::from_responses(Matrix::zeros(n, 1), &raw_y[..n], a).unwrap();
        let quad = ScalarLoss::quadratic();
        let preds = &raw_p[..n];
        // three collinear points: rho, rho + 0.25, rho + 0.5
        let l0 = interpolating_loss(preds, &agg, rho, &quad).unwrap();
        let l1 = interpolating_loss(preds, &agg, rho + 0.25, &quad).unwrap();
        let l2 = interpolating_loss(preds, &agg, rho + 0.5, &quad).unwrap();
        prop_assert!((l1 - 0.5 * (l0 + l2)).abs() <= 1e-10 * l1.abs().max(1.0));
    }

    #[test]
    fn aggregation_of_constant_vectors_is_constant((bags, k, seed) in shape(), c in -50.0f64..50.0) {
        let n = bags * k;
        let a = assign_bags(n, k, seed).unwrap();
        let agg = aggregate_responses(&vec![c; n], &a).unwrap();
        for v in agg {
            prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn assignment_serde_round_trip((bags, k, seed) in shape()) {
        let n = bags * k;
        let a = assign_bags(n, k, seed).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        let back: BagAssignment = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(a, back);
    }
}
