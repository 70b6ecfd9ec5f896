//! Closed-form linear estimators from aggregate responses, and their exact
//! conditional bias and variance given the design.
//!
//! The interpolating fit solves the normal equations
//!
//! ```text
//! (rho XᵀX + (1-rho) k Σ_a x̄_a x̄_aᵀ) θ = k Σ_a x̄_a ȳ_a
//! ```
//!
//! assembled from per-bag mean features, so memory stays O(d²) and no n×n
//! operator is ever formed. The bag-level and instance-level fits are the
//! rho = 0 and rho = 1 endpoints.

use serde::{Deserialize, Serialize};

use crate::bagging::{check_rho, AggregateDataset, BagAssignment};
use crate::error::{Error, Result};
use crate::linalg::{norm_sq, Cholesky, Matrix};

/// A fitted linear model. Serializes as `{"rho": .., "theta": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub rho: f64,
    #[serde(rename = "theta")]
    pub theta_hat: Vec<f64>,
    /// Squared ratio of extreme Cholesky pivots of the solved Gram system.
    #[serde(skip, default)]
    pub gram_condition_estimate: f64,
}

/// Exact conditional (on the design and bags) risk decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalRisk {
    pub bias_sq: f64,
    pub variance: f64,
    /// Always exactly `bias_sq + variance`.
    pub risk: f64,
}

impl ConditionalRisk {
    fn new(bias_sq: f64, variance: f64) -> Self {
        Self {
            bias_sq,
            variance,
            risk: bias_sq + variance,
        }
    }
}

/// Design-side quantities shared by every `rho`: the feature Gram matrix, the
/// per-bag mean features, and their weighted Gram. Building this once lets a
/// sweep over `rho` reuse all O(n d²) work.
pub struct BagGram {
    k: usize,
    num_bags: usize,
    d: usize,
    xtx: Matrix,
    bag_mean_x: Matrix,
    /// `k Σ_a x̄_a x̄_aᵀ`, the Gram of the bag-mean projection of the design.
    weighted_bag_gram: Matrix,
}

impl BagGram {
    pub fn new(x: &Matrix, assignment: &BagAssignment) -> Result<Self> {
        if x.nrows() != assignment.n() {
            return Err(Error::LengthMismatch {
                what: "feature rows",
                expected: assignment.n(),
                got: x.nrows(),
            });
        }
        let bag_mean_x = assignment.bag_mean_rows(x)?;
        let weighted_bag_gram = bag_mean_x.gram().scale(assignment.k() as f64);
        Ok(Self {
            k: assignment.k(),
            num_bags: assignment.num_bags(),
            d: x.ncols(),
            xtx: x.gram(),
            bag_mean_x,
            weighted_bag_gram,
        })
    }

    /// `rho XᵀX + (1-rho) k Σ_a x̄_a x̄_aᵀ`.
    fn gram_at(&self, rho: f64) -> Matrix {
        self.weighted_bag_gram
            .scale(1.0 - rho)
            .add_scaled(rho, &self.xtx)
    }

    pub fn factor(&self, rho: f64) -> Result<Cholesky> {
        check_rho(rho)?;
        if rho == 0.0 && self.num_bags < self.d {
            // fewer bag equations than parameters: the bag-level system is
            // structurally underdetermined
            return Err(Error::SingularSystem {
                pivot: 0.0,
                threshold: 0.0,
            });
        }
        Cholesky::factor(&self.gram_at(rho))
    }

    /// Right-hand side `k Σ_a x̄_a ȳ_a`.
    pub fn rhs(&self, bag_means: &[f64]) -> Result<Vec<f64>> {
        if bag_means.len() != self.num_bags {
            return Err(Error::LengthMismatch {
                what: "bag means",
                expected: self.num_bags,
                got: bag_means.len(),
            });
        }
        let mut rhs = self.bag_mean_x.t_matvec(bag_means);
        for r in &mut rhs {
            *r *= self.k as f64;
        }
        Ok(rhs)
    }

    pub fn fit(&self, bag_means: &[f64], rho: f64) -> Result<LinearFit> {
        let chol = self.factor(rho)?;
        let rhs = self.rhs(bag_means)?;
        let theta_hat = chol.solve(&rhs);
        Ok(LinearFit {
            rho,
            theta_hat,
            gram_condition_estimate: chol.condition_estimate(),
        })
    }

    /// Conditional bias and variance of the fit at `rho` for true parameter
    /// `theta0` and noise level `sigma`.
    ///
    /// The bias is the squared norm of the solve of `rho (XᵀX - kΣx̄x̄ᵀ) θ0`
    /// against the Gram system; it vanishes identically for `rho = 0` and for
    /// singleton bags, where the deviation operator is zero. The variance is
    /// `σ² k Σ_a ‖G⁻¹ x̄_a‖²`, one Gram solve per bag.
    pub fn conditional_risk(&self, rho: f64, theta0: &[f64], sigma: f64) -> Result<ConditionalRisk> {
        if theta0.len() != self.d {
            return Err(Error::LengthMismatch {
                what: "theta0",
                expected: self.d,
                got: theta0.len(),
            });
        }
        if !(sigma >= 0.0) {
            return Err(Error::Domain {
                what: "sigma",
                value: sigma,
                domain: "sigma >= 0",
            });
        }
        let chol = self.factor(rho)?;

        let bias_sq = if rho == 0.0 || self.k == 1 {
            0.0
        } else {
            let a_theta = self.xtx.matvec(theta0);
            let w_theta = self.weighted_bag_gram.matvec(theta0);
            let mut t: Vec<f64> = a_theta
                .iter()
                .zip(&w_theta)
                .map(|(a, w)| rho * (a - w))
                .collect();
            chol.solve_in_place(&mut t);
            norm_sq(&t)
        };

        let mut variance = 0.0;
        let mut buf = vec![0.0; self.d];
        for a in 0..self.num_bags {
            buf.copy_from_slice(self.bag_mean_x.row(a));
            chol.solve_in_place(&mut buf);
            variance += norm_sq(&buf);
        }
        variance *= sigma * sigma * self.k as f64;

        Ok(ConditionalRisk::new(bias_sq, variance))
    }
}

/// Minimizer of the interpolating loss at `rho` over linear models.
pub fn fit_interpolating(agg: &AggregateDataset, rho: f64) -> Result<LinearFit> {
    let gram = BagGram::new(agg.features(), agg.assignment())?;
    gram.fit(agg.bag_means(), rho)
}

/// Bag-level fit: least squares of the aggregate responses on the bag-mean
/// features. Requires at least as many bags as parameters.
pub fn fit_bag_level(agg: &AggregateDataset) -> Result<LinearFit> {
    fit_interpolating(agg, 0.0)
}

/// Instance-level fit: least squares of the bag-expanded responses on the
/// per-instance features.
pub fn fit_instance_level(agg: &AggregateDataset) -> Result<LinearFit> {
    fit_interpolating(agg, 1.0)
}

/// Exact conditional bias and variance of the interpolating fit.
pub fn conditional_bias_variance(
    x: &Matrix,
    assignment: &BagAssignment,
    rho: f64,
    theta0: &[f64],
    sigma: f64,
) -> Result<ConditionalRisk> {
    BagGram::new(x, assignment)?.conditional_risk(rho, theta0, sigma)
}
