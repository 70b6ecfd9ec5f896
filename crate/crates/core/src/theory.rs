//! Asymptotic bias, variance, and risk of the interpolating estimator in the
//! proportional regime, via the scalar fixed-point characterizations.
//!
//! Inputs are the sample-to-dimension ratio `psi > 1`, the bag size `k`, the
//! interpolation weight `rho`, and the signal-to-noise ratio. The true
//! parameter is normalized to unit norm, so the noise level is
//! `sigma² = 1 / snr`.
//!
//! Both fixed points are located by bisection on brackets guaranteed by
//! monotonicity; no Newton steps, no unguarded iterations.

use crate::bagging::check_rho;
use crate::error::{Error, Result};
use crate::roots::bisect;

const BISECT_ABS_TOL: f64 = 1e-14;
const BISECT_REL_TOL: f64 = 1e-15;

fn check_psi(psi: f64) -> Result<()> {
    if !(psi > 1.0) || !psi.is_finite() {
        return Err(Error::Domain {
            what: "psi",
            value: psi,
            domain: "psi > 1",
        });
    }
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain {
            what: "k",
            value: 0.0,
            domain: "k >= 1",
        });
    }
    Ok(())
}

/// Solution of the bias fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSolution {
    /// Root of the bias equation in (0, 1); zero when the estimator is
    /// exactly unbiased (`k = 1` or `rho = 0`).
    pub alpha_star: f64,
    /// Second term of the bias expression.
    pub eta_sq: f64,
    /// `alpha_star² + eta_sq`.
    pub bias: f64,
}

/// Left-minus-right side of the bias fixed-point equation; strictly
/// increasing in `alpha` on (0, 1), from -inf to +inf.
fn bias_equation(psi: f64, k: f64, rho: f64, alpha: f64) -> f64 {
    (rho + psi / (k * (1.0 - alpha)) - 1.0) - psi * rho * (k - 1.0) / (k * alpha)
}

fn eta_sq_denominator(psi: f64, k: f64, alpha: f64) -> f64 {
    let ratio = alpha / (1.0 - alpha);
    (k - 1.0) * psi / (k * k * (1.0 - alpha) * (1.0 - alpha)) - ratio * ratio / k - (k - 1.0) / k
}

/// Asymptotic bias of the interpolating estimator.
///
/// For `k = 1` or `rho = 0` the estimator is exactly unbiased and no equation
/// is solved. Otherwise the unique root of the monotone fixed-point equation
/// is bracketed on (0, 1) and bisected to full precision.
pub fn solve_bias(psi: f64, k: usize, rho: f64) -> Result<BiasSolution> {
    check_psi(psi)?;
    check_k(k)?;
    check_rho(rho)?;
    if k == 1 || rho == 0.0 {
        return Ok(BiasSolution {
            alpha_star: 0.0,
            eta_sq: 0.0,
            bias: 0.0,
        });
    }
    let kf = k as f64;
    let alpha_star = bisect(
        |a| bias_equation(psi, kf, rho, a),
        1e-300,
        1.0 - 1e-16,
        BISECT_ABS_TOL,
        BISECT_REL_TOL,
    )?;
    let denom = eta_sq_denominator(psi, kf, alpha_star);
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator { value: denom });
    }
    let eta_sq = alpha_star * alpha_star / denom;
    Ok(BiasSolution {
        alpha_star,
        eta_sq,
        bias: alpha_star * alpha_star + eta_sq,
    })
}

/// Solution of the variance fixed-point system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceSolution {
    pub u_star: f64,
    pub v_star: f64,
    /// `sigma_sq / v_star`.
    pub variance: f64,
}

/// First equation of the variance system, minus its right-hand side `k`;
/// strictly decreasing in `u` on (0, inf).
fn variance_equation_u(psi: f64, k: f64, rho: f64, u: f64) -> f64 {
    let coupling = if k > 1.0 && rho > 0.0 {
        rho * psi * (k - 1.0) / (rho + u)
    } else {
        0.0
    };
    psi / (1.0 + u) + coupling - k
}

/// Solves the two-equation variance system: `u*` by bisection on the first
/// equation, then `v*` read off the second in closed form.
pub fn solve_variance_system(psi: f64, k: usize, rho: f64) -> Result<(f64, f64)> {
    check_psi(psi)?;
    check_k(k)?;
    check_rho(rho)?;
    let kf = k as f64;
    if rho == 0.0 && psi <= kf {
        // the bag-level system has no positive solution: too few bags
        return Err(Error::DivergentVariance {
            v_star: psi / kf - 1.0,
        });
    }
    let f = |u: f64| variance_equation_u(psi, kf, rho, u);
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let u_star = bisect(f, 0.0, hi, BISECT_ABS_TOL, BISECT_REL_TOL)?;
    let coupling_sq = if k > 1 && rho > 0.0 {
        let r = rho / (rho + u_star);
        r * r * psi * (kf - 1.0)
    } else {
        0.0
    };
    let one_plus_u = 1.0 + u_star;
    let v_star = one_plus_u * one_plus_u * (kf - coupling_sq) / psi - 1.0;
    if !(v_star > 0.0) {
        return Err(Error::DivergentVariance { v_star });
    }
    Ok((u_star, v_star))
}

/// Asymptotic variance `sigma_sq / v*`.
pub fn solve_variance(psi: f64, k: usize, rho: f64, sigma_sq: f64) -> Result<VarianceSolution> {
    if !(sigma_sq >= 0.0) {
        return Err(Error::Domain {
            what: "sigma_sq",
            value: sigma_sq,
            domain: "sigma_sq >= 0",
        });
    }
    let (u_star, v_star) = solve_variance_system(psi, k, rho)?;
    Ok(VarianceSolution {
        u_star,
        v_star,
        variance: sigma_sq / v_star,
    })
}

/// A fully solved point of the asymptotic theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    pub psi: f64,
    pub k: usize,
    pub rho: f64,
    pub snr: f64,
    pub alpha_star: f64,
    pub eta_sq: f64,
    pub u_star: f64,
    pub v_star: f64,
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
}

impl TheoryPoint {
    pub fn sigma_sq(&self) -> f64 {
        1.0 / self.snr
    }

    /// Residual of the bias fixed-point equation at the stored root.
    pub fn bias_residual(&self) -> f64 {
        if self.k == 1 || self.rho == 0.0 {
            0.0
        } else {
            bias_equation(self.psi, self.k as f64, self.rho, self.alpha_star)
        }
    }

    /// Residuals of both variance equations at the stored roots.
    pub fn variance_residuals(&self) -> (f64, f64) {
        let kf = self.k as f64;
        let r1 = variance_equation_u(self.psi, kf, self.rho, self.u_star);
        let coupling_sq = if self.k > 1 && self.rho > 0.0 {
            let r = self.rho / (self.rho + self.u_star);
            r * r * self.psi * (kf - 1.0)
        } else {
            0.0
        };
        let one_plus_u = 1.0 + self.u_star;
        let r2 = self.psi * (1.0 + self.v_star) / (one_plus_u * one_plus_u) + coupling_sq - kf;
        (r1, r2)
    }
}

/// Solves bias and variance at one `(psi, k, rho, snr)` point.
pub fn solve_point(psi: f64, k: usize, rho: f64, snr: f64) -> Result<TheoryPoint> {
    if !(snr > 0.0) {
        return Err(Error::Domain {
            what: "snr",
            value: snr,
            domain: "snr > 0",
        });
    }
    let sigma_sq = 1.0 / snr;
    let b = solve_bias(psi, k, rho)?;
    let v = solve_variance(psi, k, rho, sigma_sq)?;
    Ok(TheoryPoint {
        psi,
        k,
        rho,
        snr,
        alpha_star: b.alpha_star,
        eta_sq: b.eta_sq,
        u_star: v.u_star,
        v_star: v.v_star,
        bias: b.bias,
        variance: v.variance,
        risk: b.bias + v.variance,
    })
}

/// Solves one point per grid value. Failed points are returned in place with
/// their error; they are never dropped.
pub fn risk_curve(
    psi: f64,
    k: usize,
    snr: f64,
    rho_grid: &[f64],
) -> Vec<(f64, Result<TheoryPoint>)> {
    rho_grid
        .iter()
        .map(|&rho| (rho, solve_point(psi, k, rho, snr)))
        .collect()
}

/// Closed-form bag-level limit `(bias, variance)`; requires `psi > k`.
pub fn bag_level_closed_form(psi: f64, k: usize, sigma_sq: f64) -> Result<(f64, f64)> {
    check_psi(psi)?;
    check_k(k)?;
    let kf = k as f64;
    if psi <= kf {
        return Err(Error::DivergentVariance {
            v_star: psi / kf - 1.0,
        });
    }
    Ok((0.0, sigma_sq / (psi / kf - 1.0)))
}

/// Closed-form instance-level limit `(bias, variance)`.
pub fn instance_level_closed_form(psi: f64, k: usize, sigma_sq: f64) -> Result<(f64, f64)> {
    check_psi(psi)?;
    check_k(k)?;
    let kf = k as f64;
    let bias = (1.0 - 1.0 / kf) * (1.0 + (2.0 - psi) / (kf * (psi - 1.0)));
    let variance = sigma_sq / (kf * (psi - 1.0));
    Ok((bias, variance))
}

/// SNR threshold below which the instance-level estimator has the smaller
/// risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrThreshold {
    /// Instance-level wins iff `snr <= value`.
    Finite(f64),
    /// `psi = k`: instance-level dominates at every finite SNR.
    Infinite,
    /// `k = 1`: the two estimators coincide at every SNR.
    AlwaysEqual,
}

/// Crossover SNR between the bag-level and instance-level risks. Defined for
/// `psi >= k >= 1`.
pub fn snr_threshold(psi: f64, k: usize) -> Result<SnrThreshold> {
    check_psi(psi)?;
    check_k(k)?;
    if k == 1 {
        return Ok(SnrThreshold::AlwaysEqual);
    }
    let kf = k as f64;
    if psi < kf {
        return Err(Error::Domain {
            what: "psi",
            value: psi,
            domain: "psi >= k",
        });
    }
    if psi == kf {
        return Ok(SnrThreshold::Infinite);
    }
    let numerator = (kf + 1.0) * psi - kf;
    let denominator = (psi - kf) * (psi * (1.0 - 1.0 / kf) - 1.0 + 2.0 / kf);
    Ok(SnrThreshold::Finite(numerator / denominator))
}

/// Result of the risk minimization over `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRho {
    pub rho_star: f64,
    pub risk_star: f64,
}

const OPTIMAL_RHO_TOL: f64 = 1e-6;

/// Minimizes the asymptotic risk over `rho` in [0, 1]: a 101-point grid scan
/// to bracket the minimum, then golden-section refinement to absolute
/// tolerance 1e-6. For `k = 1` the risk does not depend on `rho` and the tie
/// breaks to `rho = 0`.
pub fn optimal_rho(psi: f64, k: usize, snr: f64) -> Result<OptimalRho> {
    if k == 1 {
        let point = solve_point(psi, 1, 0.0, snr)?;
        return Ok(OptimalRho {
            rho_star: 0.0,
            risk_star: point.risk,
        });
    }
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut best: Option<(usize, f64)> = None;
    let mut first_err: Option<Error> = None;
    for (i, &rho) in grid.iter().enumerate() {
        match solve_point(psi, k, rho, snr) {
            Ok(p) => {
                if best.is_none_or(|(_, r)| p.risk < r) {
                    best = Some((i, p.risk));
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    let (i_best, grid_risk) = best.ok_or_else(|| first_err.unwrap())?;

    let eval = |rho: f64| -> f64 {
        solve_point(psi, k, rho, snr).map_or(f64::INFINITY, |p| p.risk)
    };
    let mut a = grid[i_best.saturating_sub(1)];
    let mut b = grid[(i_best + 1).min(grid.len() - 1)];
    if eval(a).is_infinite() {
        a = grid[i_best];
    }

    // golden-section on [a, b]
    let invphi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while b - a > OPTIMAL_RHO_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = eval(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let f_mid = eval(mid);
    let mut result = OptimalRho {
        rho_star: mid,
        risk_star: f_mid,
    };
    if grid_risk < result.risk_star {
        result = OptimalRho {
            rho_star: grid[i_best],
            risk_star: grid_risk,
        };
    }
    Ok(result)
}
