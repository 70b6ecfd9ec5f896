//! Built-in consistency checks: exact loss decomposition, the pairwise
//! variance identity, closed-form endpoints of the fixed-point solvers, and
//! fixed-point residuals.
//!
//! The optional fault injection exists so the reporting path itself can be
//! tested end to end: a flipped regularizer sign must surface as a failed
//! decomposition check and a nonzero exit from the command line.

use rand::Rng;
use serde::Serialize;

use crate::bagging::{assign_bags, AggregateDataset};
use crate::linalg::Matrix;
use crate::losses::{bag_loss, instance_loss, regularizer, ScalarLoss};
use crate::rng;
use crate::theory;

/// Deliberate faults for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    FlipRegularizerSign,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub tolerance: f64,
    /// Largest deviation observed across the check's instances.
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcheckReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

const SELFCHECK_SEED: u64 = 0x5e1f;

pub fn run(fault: Option<Fault>) -> SelfcheckReport {
    let checks = vec![
        loss_decomposition_identity(fault),
        pairwise_variance_identity(),
        closed_form_endpoints(),
        fixed_point_residuals(),
    ];
    let passed = checks.iter().all(|c| c.passed);
    SelfcheckReport { checks, passed }
}

/// `instance = bag + regularizer` for the quadratic loss, on random
/// instances.
fn loss_decomposition_identity(fault: Option<Fault>) -> CheckResult {
    let tolerance = 1e-12;
    let quad = ScalarLoss::quadratic();
    let mut rng = rng::substream(SELFCHECK_SEED, 0);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let k = [1usize, 2, 3, 4][rng.gen_range(0..4)];
        let bags = rng.gen_range(1..=12usize);
        let n = bags * k;
        let a = assign_bags(n, k, rng.gen()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let agg = AggregateDataset::from_responses(Matrix::zeros(n, 1), &y, a.clone()).unwrap();
        let ins = instance_loss(&preds, &agg, &quad).unwrap();
        let bag = bag_loss(&preds, &agg, &quad).unwrap();
        let mut reg = regularizer(&preds, &a).unwrap();
        if fault == Some(Fault::FlipRegularizerSign) {
            reg = -reg;
        }
        let relative = (ins - bag - reg).abs() / ins.abs().max(1.0);
        worst = worst.max(relative);
    }
    CheckResult {
        name: "loss_decomposition_identity",
        tolerance,
        observed: worst,
        passed: worst <= tolerance,
    }
}

/// `Σ_i (a_i - ā)² = (1/(2k)) Σ_{i,j} (a_i - a_j)²` over ordered pairs.
fn pairwise_variance_identity() -> CheckResult {
    let tolerance = 1e-12;
    let mut rng = rng::substream(SELFCHECK_SEED, 1);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let k = rng.gen_range(2..=16usize);
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
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    CheckResult {
        name: "pairwise_variance_identity",
        tolerance,
        observed: worst,
        passed: worst <= tolerance,
    }
}

/// Fixed-point solvers against the closed-form endpoint expressions.
fn closed_form_endpoints() -> CheckResult {
    let tolerance = 1e-9;
    let mut worst = 0.0_f64;
    for psi in [2.0, 3.0, 4.0, 8.0] {
        for k in [1usize, 2, 3, 5] {
            let (ib, iv) = theory::instance_level_closed_form(psi, k, 1.0).unwrap();
            let b = theory::solve_bias(psi, k, 1.0).unwrap();
            let v = theory::solve_variance(psi, k, 1.0, 1.0).unwrap();
            worst = worst.max((b.bias - ib).abs()).max((v.variance - iv).abs());

            if psi > k as f64 {
                let (_, bv) = theory::bag_level_closed_form(psi, k, 1.0).unwrap();
                let b0 = theory::solve_bias(psi, k, 0.0).unwrap();
                let v0 = theory::solve_variance(psi, k, 0.0, 1.0).unwrap();
                worst = worst.max(b0.bias.abs()).max((v0.variance - bv).abs());
            }
        }
    }
    CheckResult {
        name: "closed_form_endpoints",
        tolerance,
        observed: worst,
        passed: worst <= tolerance,
    }
}

/// Residuals of both fixed-point equations at the stored roots.
fn fixed_point_residuals() -> CheckResult {
    let tolerance = 1e-10;
    let mut worst = 0.0_f64;
    for psi in [1.5, 2.0, 4.0, 8.0] {
        for k in [1usize, 2, 5] {
            for rho in [1e-3, 0.1, 0.5, 1.0] {
                let p = theory::solve_point(psi, k, rho, 1.0).unwrap();
                let (r1, r2) = p.variance_residuals();
                worst = worst
                    .max(p.bias_residual().abs())
                    .max(r1.abs())
                    .max(r2.abs());
            }
        }
    }
    CheckResult {
        name: "fixed_point_residuals",
        tolerance,
        observed: worst,
        passed: worst <= tolerance,
    }
}
