//! Bag-level, instance-level, and interpolating losses over per-instance
//! predictions, plus the bound checks relating them.
//!
//! For the quadratic loss the three losses satisfy an exact decomposition:
//! the instance-level loss equals the bag-level loss plus a regularizer, where
//! the regularizer is the within-bag variance of the predictions normalized by
//! the sample count. That identity fixes the regularizer normalization used
//! throughout this module: `R = (1/n) Σ_a Σ_{i∈a} (p̄_a - p_i)²`.

use crate::bagging::{check_rho, AggregateDataset, BagAssignment};
use crate::error::{Error, Result};

/// A scalar loss `ℓ(target, prediction) -> R≥0` with the metadata the bound
/// checks need.
#[derive(Debug, Clone, Copy)]
pub struct ScalarLoss {
    pub name: &'static str,
    eval: fn(f64, f64) -> f64,
    /// Convex in the prediction argument.
    pub convex_in_prediction: bool,
    /// Uniform bound on the second derivative in the prediction argument.
    pub second_derivative_bound: Option<f64>,
    /// Exactly the squared-error loss; enables the exact decomposition path.
    pub is_quadratic: bool,
}

impl ScalarLoss {
    #[inline]
    pub fn eval(&self, target: f64, prediction: f64) -> f64 {
        (self.eval)(target, prediction)
    }

    /// `(t - p)²`; convex, second derivative 2.
    pub fn quadratic() -> Self {
        Self {
            name: "quadratic",
            eval: |t, p| (t - p) * (t - p),
            convex_in_prediction: true,
            second_derivative_bound: Some(2.0),
            is_quadratic: true,
        }
    }

    /// `ln cosh(p - t)`; convex, second derivative sech² ≤ 1.
    pub fn log_cosh() -> Self {
        Self {
            name: "log_cosh",
            eval: |t, p| stable_ln_cosh(p - t),
            convex_in_prediction: true,
            second_derivative_bound: Some(1.0),
            is_quadratic: false,
        }
    }

    /// `|t - p|`; convex, no uniform second-derivative bound.
    pub fn absolute() -> Self {
        Self {
            name: "absolute",
            eval: |t, p| (t - p).abs(),
            convex_in_prediction: true,
            second_derivative_bound: None,
            is_quadratic: false,
        }
    }

    pub fn custom(
        name: &'static str,
        eval: fn(f64, f64) -> f64,
        convex_in_prediction: bool,
        second_derivative_bound: Option<f64>,
    ) -> Self {
        Self {
            name,
            eval,
            convex_in_prediction,
            second_derivative_bound,
            is_quadratic: false,
        }
    }
}

fn stable_ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    // ln cosh(x) = |x| - ln 2 + ln(1 + e^{-2|x|})
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

fn check_predictions(predictions: &[f64], assignment: &BagAssignment) -> Result<()> {
    if predictions.len() != assignment.n() {
        return Err(Error::LengthMismatch {
            what: "predictions",
            expected: assignment.n(),
            got: predictions.len(),
        });
    }
    Ok(())
}

/// Mean over bags of `ℓ(bag mean response, bag mean prediction)`.
pub fn bag_loss(predictions: &[f64], agg: &AggregateDataset, loss: &ScalarLoss) -> Result<f64> {
    let assignment = agg.assignment();
    check_predictions(predictions, assignment)?;
    let pred_means = assignment.bag_means(predictions)?;
    let m = assignment.num_bags() as f64;
    Ok(agg
        .bag_means()
        .iter()
        .zip(&pred_means)
        .map(|(&ybar, &pbar)| loss.eval(ybar, pbar))
        .sum::<f64>()
        / m)
}

/// Mean over samples of `ℓ(bag mean response, per-instance prediction)`.
pub fn instance_loss(
    predictions: &[f64],
    agg: &AggregateDataset,
    loss: &ScalarLoss,
) -> Result<f64> {
    let assignment = agg.assignment();
    check_predictions(predictions, assignment)?;
    let n = assignment.n() as f64;
    let mut total = 0.0;
    for (a, bag) in assignment.bags().iter().enumerate() {
        let ybar = agg.bag_means()[a];
        for &i in bag {
            total += loss.eval(ybar, predictions[i]);
        }
    }
    Ok(total / n)
}

/// Within-bag variance of the predictions, normalized by the sample count:
/// `(1/n) Σ_a Σ_{i∈a} (p̄_a - p_i)²`. Nonnegative; zero exactly when the
/// predictions are constant within every bag. For the quadratic loss this is
/// the exact gap `instance_loss - bag_loss`.
pub fn regularizer(predictions: &[f64], assignment: &BagAssignment) -> Result<f64> {
    check_predictions(predictions, assignment)?;
    let means = assignment.bag_means(predictions)?;
    let n = assignment.n() as f64;
    let mut total = 0.0;
    for (a, bag) in assignment.bags().iter().enumerate() {
        let pbar = means[a];
        for &i in bag {
            let d = pbar - predictions[i];
            total += d * d;
        }
    }
    Ok(total / n)
}

/// `bag_loss + rho * regularizer` for the quadratic loss (the exact
/// decomposition makes this equal to `(1-rho)·bag + rho·instance`); for any
/// other loss, the convex combination `(1-rho)·bag_loss + rho·instance_loss`,
/// which coincides with the quadratic form when the decomposition is exact.
pub fn interpolating_loss(
    predictions: &[f64],
    agg: &AggregateDataset,
    rho: f64,
    loss: &ScalarLoss,
) -> Result<f64> {
    check_rho(rho)?;
    if loss.is_quadratic {
        let bag = bag_loss(predictions, agg, loss)?;
        let reg = regularizer(predictions, agg.assignment())?;
        Ok(bag + rho * reg)
    } else {
        let bag = bag_loss(predictions, agg, loss)?;
        let ins = instance_loss(predictions, agg, loss)?;
        Ok((1.0 - rho) * bag + rho * ins)
    }
}

/// One side of a loss bound: `lhs ≤ rhs` up to floating-point slack.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn bound_check(lhs: f64, rhs: f64) -> BoundCheck {
    let slack = 1e-12 * lhs.abs().max(1.0);
    BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    }
}

/// Result of [`check_loss_bounds`]: the Taylor upper bound (when the loss has
/// a second-derivative bound) and the Jensen lower bound (when it is flagged
/// convex).
#[derive(Debug, Clone, Copy)]
pub struct LossBoundsReport {
    /// `instance ≤ bag + C · regularizer`.
    pub upper: Option<BoundCheck>,
    /// `bag ≤ instance`.
    pub lower: Option<BoundCheck>,
}

/// Evaluates the two inequalities tying the instance-level and bag-level
/// losses together.
///
/// With `C` bounding the second derivative of the loss in its prediction
/// argument, a second-order expansion around each bag's mean prediction gives
/// `instance ≤ bag + C · R` in this module's variance normalization of `R`.
/// (In the pairwise, per-bag normalization `Σ_a Σ_{i,j∈a}(p_i-p_j)²/k` the
/// same regularizer appears scaled by `2n`, so the constant here absorbs that
/// factor; the sharp constant in variance form is `C/2`, which makes the bound
/// an equality for the quadratic loss.) Convexity in the prediction argument
/// gives the reverse ordering `bag ≤ instance` by Jensen's inequality.
pub fn check_loss_bounds(
    predictions: &[f64],
    agg: &AggregateDataset,
    loss: &ScalarLoss,
) -> Result<LossBoundsReport> {
    if loss.second_derivative_bound.is_none() && !loss.convex_in_prediction {
        return Err(Error::MissingBound);
    }
    let bag = bag_loss(predictions, agg, loss)?;
    let ins = instance_loss(predictions, agg, loss)?;
    let upper = match loss.second_derivative_bound {
        Some(c) => {
            let reg = regularizer(predictions, agg.assignment())?;
            Some(bound_check(ins, bag + c * reg))
        }
        None => None,
    };
    let lower = loss
        .convex_in_prediction
        .then(|| bound_check(bag, ins));
    Ok(LossBoundsReport { upper, lower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bagging::{assign_bags, BagAssignment};
    use crate::linalg::Matrix;
    use rand::Rng;

    fn dataset(bag_means: Vec<f64>, assignment: BagAssignment) -> AggregateDataset {
        let x = Matrix::zeros(assignment.n(), 1);
        AggregateDataset::new(x, bag_means, assignment).unwrap()
    }

    fn one_bag_two() -> AggregateDataset {
        dataset(
            vec![2.0],
            BagAssignment::from_bags(2, 2, vec![vec![0, 1]]).unwrap(),
        )
    }

    #[test]
    fn bag_loss_examples() {
        let q = ScalarLoss::quadratic();

        // predictions whose bag means equal the aggregate responses
        let a = BagAssignment::from_bags(4, 2, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let agg = dataset(vec![1.0, -2.0], a);
        let preds = [0.0, 2.0, -1.0, -3.0];
        assert!(bag_loss(&preds, &agg, &q).unwrap().abs() <= 1e-15);

        // singleton bags reduce to the mean squared error
        let singles = BagAssignment::from_bags(3, 1, vec![vec![0], vec![1], vec![2]]).unwrap();
        let agg1 = dataset(vec![1.0, 2.0, 3.0], singles);
        let preds1 = [2.0, 2.0, 5.0];
        let mse = (1.0 + 0.0 + 4.0) / 3.0;
        assert!((bag_loss(&preds1, &agg1, &q).unwrap() - mse).abs() <= 1e-15);

        // one bag: (2 - 3)² = 1
        assert!((bag_loss(&[1.0, 5.0], &one_bag_two(), &q).unwrap() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn instance_loss_examples() {
        let q = ScalarLoss::quadratic();

        let a = BagAssignment::from_bags(4, 2, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let agg = dataset(vec![1.5, 0.0], a);
        let preds = [1.5, 1.5, 0.0, 0.0];
        assert_eq!(instance_loss(&preds, &agg, &q).unwrap(), 0.0);

        // one bag: ((2-1)² + (2-5)²)/2 = 5
        assert!((instance_loss(&[1.0, 5.0], &one_bag_two(), &q).unwrap() - 5.0).abs() <= 1e-15);

        // k = 1: equals bag loss
        let singles = BagAssignment::from_bags(3, 1, vec![vec![0], vec![1], vec![2]]).unwrap();
        let agg1 = dataset(vec![1.0, 2.0, 3.0], singles);
        let preds1 = [0.5, 2.5, 3.0];
        assert_eq!(
            instance_loss(&preds1, &agg1, &q).unwrap(),
            bag_loss(&preds1, &agg1, &q).unwrap()
        );
    }

    #[test]
    fn regularizer_examples() {
        let a = BagAssignment::from_bags(4, 2, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(regularizer(&[3.0, 3.0, -1.0, -1.0], &a).unwrap(), 0.0);

        let one = BagAssignment::from_bags(2, 2, vec![vec![0, 1]]).unwrap();
        assert!((regularizer(&[1.0, 5.0], &one).unwrap() - 4.0).abs() <= 1e-15);

        let singles = BagAssignment::from_bags(3, 1, vec![vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(regularizer(&[7.0, -3.0, 0.1], &singles).unwrap(), 0.0);
    }

    #[test]
    fn zero_regularizer_implies_bag_constant_predictions() {
        let mut rng = crate::rng::master_rng(61);
        for _ in 0..50 {
            let a = assign_bags(12, 3, rng.gen()).unwrap();
            let preds: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let reg = regularizer(&preds, &a).unwrap();
            assert!(reg >= 0.0);
            let bag_constant = a.bags().iter().all(|bag| {
                bag.iter().all(|&i| preds[i] == preds[bag[0]])
            });
            assert_eq!(reg == 0.0, bag_constant);
        }
    }

    #[test]
    fn interpolating_examples() {
        let q = ScalarLoss::quadratic();
        let agg = one_bag_two();
        let preds = [1.0, 5.0];
        let bag = bag_loss(&preds, &agg, &q).unwrap();
        let ins = instance_loss(&preds, &agg, &q).unwrap();
        assert_eq!(interpolating_loss(&preds, &agg, 0.0, &q).unwrap(), bag);
        assert!((interpolating_loss(&preds, &agg, 1.0, &q).unwrap() - ins).abs() <= 1e-15);
        assert!((interpolating_loss(&preds, &agg, 0.5, &q).unwrap() - 3.0).abs() <= 1e-15);
        assert!(matches!(
            interpolating_loss(&preds, &agg, -0.1, &q),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn decomposition_identity_randomized() {
        let q = ScalarLoss::quadratic();
        let mut rng = crate::rng::master_rng(31);
        for n in [4usize, 8, 12, 24, 60, 64] {
            for k in [1usize, 2, 4] {
                if n % k != 0 {
                    continue;
                }
                let a = assign_bags(n, k, rng.gen()).unwrap();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let agg =
                    AggregateDataset::from_responses(Matrix::zeros(n, 1), &y, a.clone()).unwrap();
                let ins = instance_loss(&preds, &agg, &q).unwrap();
                let bag = bag_loss(&preds, &agg, &q).unwrap();
                let reg = regularizer(&preds, &a).unwrap();
                assert!(
                    (ins - bag - reg).abs() <= 1e-12 * ins.abs().max(1.0),
                    "n={n} k={k}: ins={ins} bag={bag} reg={reg}"
                );
            }
        }
    }

    #[test]
    fn pairwise_identity_ordered_pairs() {
        // Σ_i (a_i - ā)² = (1/(2k)) Σ_{i,j} (a_i - a_j)² over ordered pairs.
        let mut rng = crate::rng::master_rng(8);
        for k in [2usize, 3, 5, 8] {
            let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let abar = a.iter().sum::<f64>() / k as f64;
            let lhs: f64 = a.iter().map(|x| (x - abar) * (x - abar)).sum();
            let mut pairs = 0.0;
            for &x in &a {
                for &y in &a {
                    pairs += (x - y) * (x - y);
                }
            }
            let rhs = pairs / (2.0 * k as f64);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn bound_checks_quadratic_and_log_cosh() {
        let mut rng = crate::rng::master_rng(12);
        let a = assign_bags(12, 3, 7).unwrap();
        let y: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let preds: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let agg = AggregateDataset::from_responses(Matrix::zeros(12, 1), &y, a).unwrap();

        for loss in [ScalarLoss::quadratic(), ScalarLoss::log_cosh()] {
            let report = check_loss_bounds(&preds, &agg, &loss).unwrap();
            assert!(report.upper.unwrap().holds, "{} upper", loss.name);
            assert!(report.lower.unwrap().holds, "{} lower", loss.name);
        }

        // absolute loss: convex flag only, no upper bound available
        let report = check_loss_bounds(&preds, &agg, &ScalarLoss::absolute()).unwrap();
        assert!(report.upper.is_none());
        assert!(report.lower.unwrap().holds);

        let unusable = ScalarLoss::custom("opaque", |t, p| (t - p).abs(), false, None);
        assert!(matches!(
            check_loss_bounds(&preds, &agg, &unusable),
            Err(Error::MissingBound)
        ));
    }

    #[test]
    fn bounds_tie_for_singleton_bags() {
        let q = ScalarLoss::quadratic();
        let singles = BagAssignment::from_bags(4, 1, (0..4).map(|i| vec![i]).collect()).unwrap();
        let agg = dataset(vec![1.0, 0.0, -1.0, 2.0], singles);
        let preds = [0.5, 0.5, 0.5, 0.5];
        let bag = bag_loss(&preds, &agg, &q).unwrap();
        let ins = instance_loss(&preds, &agg, &q).unwrap();
        assert_eq!(bag, ins);
        let report = check_loss_bounds(&preds, &agg, &q).unwrap();
        assert!(report.upper.unwrap().holds && report.lower.unwrap().holds);
    }

    #[test]
    fn interpolating_is_affine_in_rho() {
        let q = ScalarLoss::quadratic();
        let mut rng = crate::rng::master_rng(44);
        let a = assign_bags(10, 2, 5).unwrap();
        let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let preds: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let agg = AggregateDataset::from_responses(Matrix::zeros(10, 1), &y, a).unwrap();
        let at = |rho| interpolating_loss(&preds, &agg, rho, &q).unwrap();
        let (l0, l5, l1) = (at(0.2), (at(0.2) + at(0.8)) / 2.0, at(0.8));
        let mid = at(0.5);
        assert!((mid - l5).abs() <= 1e-12 * mid.abs().max(1.0), "{l0} {l1}");
    }

    #[test]
    fn log_cosh_is_stable_for_large_arguments() {
        let l = ScalarLoss::log_cosh();
        let v = l.eval(0.0, 800.0);
        assert!(v.is_finite() && (v - (800.0 - std::f64::consts::LN_2)).abs() < 1e-9);
    }
}
