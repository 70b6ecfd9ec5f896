//! Synthetic data generation and the experiment harness that compares the
//! asymptotic theory against finite-size runs.
//!
//! Replicates are independent units of work: replicate `r` of a run with seed
//! `s` draws everything from stream `r` of `s`, so results are bit-identical
//! for any worker count and any execution order.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bagging::{assign_bags, BagAssignment};
use crate::error::{Error, Result};
use crate::estimator::BagGram;
use crate::linalg::Matrix;
use crate::privacy::{privatize, DpConfig};
use crate::rng;
use crate::theory;

/// A drawn dataset: features, responses, and (for synthetic data) the true
/// parameter.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub responses: Vec<f64>,
    pub theta0: Option<Vec<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }
}

/// Rounds `psi * d` to the nearest multiple of `k` (at least one bag).
pub fn realized_sample_count(d: usize, psi: f64, k: usize) -> usize {
    let target = psi * d as f64;
    let bags = (target / k as f64).round().max(1.0) as usize;
    bags * k
}

/// Draws standard normal features, a unit-norm true parameter, and responses
/// `y = X theta0 + w` with `w ~ N(0, sigma²)`, `sigma = 1/sqrt(snr)`.
/// Deterministic given `seed`.
pub fn generate_synthetic(d: usize, psi: f64, snr: f64, k: usize, seed: u64) -> Result<Dataset> {
    if d < 2 {
        return Err(Error::Domain {
            what: "d",
            value: d as f64,
            domain: "d >= 2",
        });
    }
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::Domain {
            what: "psi",
            value: psi,
            domain: "psi > 0",
        });
    }
    if !(snr > 0.0) {
        return Err(Error::Domain {
            what: "snr",
            value: snr,
            domain: "snr > 0",
        });
    }
    if k == 0 {
        return Err(Error::Domain {
            what: "k",
            value: 0.0,
            domain: "k >= 1",
        });
    }
    let n = realized_sample_count(d, psi, k);
    let sigma = (1.0 / snr).sqrt();
    let mut rng = rng::master_rng(seed);

    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let features = Matrix::from_vec(n, d, data);

    let mut theta0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = theta0.iter().map(|t| t * t).sum::<f64>().sqrt();
    for t in &mut theta0 {
        *t /= norm;
    }

    let mut responses = features.matvec(&theta0);
    for r in &mut responses {
        let w: f64 = rng.sample(StandardNormal);
        *r += sigma * w;
    }

    Ok(Dataset {
        features,
        responses,
        theta0: Some(theta0),
    })
}

/// Parameters of one experiment. The sample count is `psi * d` rounded to the
/// nearest multiple of `k`; the realized ratio `n/d` (not the requested one)
/// is what theory is evaluated at.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub psi: f64,
    pub k: usize,
    pub snr: f64,
    pub rho_grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub dp: Option<DpConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Domain {
                what: "d",
                value: self.d as f64,
                domain: "d >= 2",
            });
        }
        if !(self.psi > 0.0) || !self.psi.is_finite() {
            return Err(Error::Domain {
                what: "psi",
                value: self.psi,
                domain: "psi > 0",
            });
        }
        if self.k == 0 {
            return Err(Error::Domain {
                what: "k",
                value: 0.0,
                domain: "k >= 1",
            });
        }
        if !(self.snr > 0.0) {
            return Err(Error::Domain {
                what: "snr",
                value: self.snr,
                domain: "snr > 0",
            });
        }
        if self.rho_grid.is_empty() {
            return Err(Error::Domain {
                what: "rho_grid",
                value: 0.0,
                domain: "at least one rho value",
            });
        }
        for &rho in &self.rho_grid {
            crate::bagging::check_rho(rho)?;
        }
        if self.replicates == 0 {
            return Err(Error::Domain {
                what: "replicates",
                value: 0.0,
                domain: "replicates >= 1",
            });
        }
        if let Some(dp) = &self.dp {
            dp.validate()?;
            if dp.k != self.k {
                return Err(Error::ConfigMismatch(format!(
                    "dp.k = {} but the experiment bag size is {}",
                    dp.k, self.k
                )));
            }
            let n = self.realized_n();
            if dp.n != n {
                return Err(Error::ConfigMismatch(format!(
                    "dp.n = {} but the realized sample count is {n}",
                    dp.n
                )));
            }
            dp.check_clip_constant(1.0 / self.snr)?;
        }
        Ok(())
    }

    pub fn realized_n(&self) -> usize {
        realized_sample_count(self.d, self.psi, self.k)
    }

    pub fn realized_psi(&self) -> f64 {
        self.realized_n() as f64 / self.d as f64
    }
}

/// One grid row of an experiment. Quantities that are undefined for the run
/// (for example the empirical bias/variance split of a private run, or any
/// column whose computation failed) are `NaN`, with validity recorded in the
/// flags.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentRow {
    pub rho: f64,
    pub emp_bias: f64,
    pub emp_var: f64,
    pub emp_risk: f64,
    pub se_bias: f64,
    pub se_var: f64,
    pub se_risk: f64,
    pub th_bias: f64,
    pub th_var: f64,
    pub th_risk: f64,
    pub emp_ok: bool,
    pub th_ok: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub d: usize,
    pub k: usize,
    pub snr: f64,
    pub requested_psi: f64,
    pub realized_psi: f64,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub rows: Vec<ExperimentRow>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ConfigMismatch(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

struct ReplicateDraw {
    dataset: Dataset,
    assignment: BagAssignment,
    noise_seed: u64,
}

/// One replicate's data, drawn entirely from stream `rep` of the run seed.
fn draw_replicate(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicateDraw> {
    let mut rep_rng = rng::substream(cfg.seed, rep as u64);
    let data_seed: u64 = rep_rng.gen();
    let bag_seed: u64 = rep_rng.gen();
    let noise_seed: u64 = rep_rng.gen();
    let dataset = generate_synthetic(cfg.d, cfg.psi, cfg.snr, cfg.k, data_seed)?;
    let assignment = assign_bags(dataset.n(), cfg.k, bag_seed)?;
    Ok(ReplicateDraw {
        dataset,
        assignment,
        noise_seed,
    })
}

/// Draws a fresh design per replicate and evaluates the exact conditional
/// bias/variance of the fit at every grid `rho` — no response sampling, the
/// conditional formulas are exact in the noise. Theory columns are evaluated
/// at the realized `n/d`.
pub fn run_theory_verification(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sigma = (1.0 / cfg.snr).sqrt();
    let grid = cfg.rho_grid.clone();

    let per_replicate: Vec<Vec<Option<(f64, f64, f64)>>> = run_pool(workers, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| -> Result<Vec<Option<(f64, f64, f64)>>> {
                let draw = draw_replicate(cfg, rep)?;
                let theta0 = draw.dataset.theta0.as_ref().expect("synthetic data");
                let gram = BagGram::new(&draw.dataset.features, &draw.assignment)?;
                Ok(grid
                    .iter()
                    .map(|&rho| {
                        gram.conditional_risk(rho, theta0, sigma)
                            .ok()
                            .map(|r| (r.bias_sq, r.variance, r.risk))
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let rows = grid
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let cells: Vec<Option<(f64, f64, f64)>> =
                per_replicate.iter().map(|r| r[j]).collect();
            build_row(cfg, rho, &cells)
        })
        .collect();

    Ok(result_shell(cfg, rows))
}

fn build_row(cfg: &ExperimentConfig, rho: f64, cells: &[Option<(f64, f64, f64)>]) -> ExperimentRow {
    let emp_ok = cells.iter().all(Option::is_some);
    let (emp_bias, se_bias, emp_var, se_var, emp_risk, se_risk) = if emp_ok {
        let biases: Vec<f64> = cells.iter().map(|c| c.unwrap().0).collect();
        let vars: Vec<f64> = cells.iter().map(|c| c.unwrap().1).collect();
        let risks: Vec<f64> = cells.iter().map(|c| c.unwrap().2).collect();
        let (mb, sb) = mean_and_se(&biases);
        let (mv, sv) = mean_and_se(&vars);
        let (mr, sr) = mean_and_se(&risks);
        (mb, sb, mv, sv, mr, sr)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };

    let theory = theory::solve_point(cfg.realized_psi(), cfg.k, rho, cfg.snr);
    let (th_bias, th_var, th_risk, th_ok) = match theory {
        Ok(p) => (p.bias, p.variance, p.risk, true),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN, false),
    };

    ExperimentRow {
        rho,
        emp_bias,
        emp_var,
        emp_risk,
        se_bias,
        se_var,
        se_risk,
        th_bias,
        th_var,
        th_risk,
        emp_ok,
        th_ok,
    }
}

fn result_shell(cfg: &ExperimentConfig, rows: Vec<ExperimentRow>) -> ExperimentResult {
    ExperimentResult {
        d: cfg.d,
        k: cfg.k,
        snr: cfg.snr,
        requested_psi: cfg.psi,
        realized_psi: cfg.realized_psi(),
        n: cfg.realized_n(),
        replicates: cfg.replicates,
        seed: cfg.seed,
        rows,
    }
}

/// Full private pipeline per replicate: draw data, clip, aggregate, add
/// Laplace noise, fit at every grid `rho`, and report the mean of
/// `‖θ̂ - θ0‖² / ln n` against the limiting private risk. The empirical
/// bias/variance split is not observable on this path and is reported as
/// `NaN`.
pub fn run_dp_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let dp = cfg
        .dp
        .ok_or_else(|| Error::ConfigMismatch("dp experiment requires a dp config".into()))?;
    let n = cfg.realized_n();
    let log_n = (n as f64).ln();
    let grid = cfg.rho_grid.clone();

    let per_replicate: Vec<Vec<Option<f64>>> = run_pool(workers, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| -> Result<Vec<Option<f64>>> {
                let draw = draw_replicate(cfg, rep)?;
                let theta0 = draw.dataset.theta0.as_ref().expect("synthetic data");
                let released = privatize(
                    &draw.dataset.responses,
                    &draw.assignment,
                    &dp,
                    draw.noise_seed,
                )?;
                let gram = BagGram::new(&draw.dataset.features, &draw.assignment)?;
                Ok(grid
                    .iter()
                    .map(|&rho| {
                        gram.fit(&released, rho).ok().map(|fit| {
                            let err_sq: f64 = fit
                                .theta_hat
                                .iter()
                                .zip(theta0)
                                .map(|(t, t0)| (t - t0) * (t - t0))
                                .sum();
                            err_sq / log_n
                        })
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let psi_hat = cfg.realized_psi();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let values: Vec<Option<f64>> = per_replicate.iter().map(|r| r[j]).collect();
            let emp_ok = values.iter().all(Option::is_some);
            let (emp_risk, se_risk) = if emp_ok {
                let vals: Vec<f64> = values.iter().map(|v| v.unwrap()).collect();
                mean_and_se(&vals)
            } else {
                (f64::NAN, f64::NAN)
            };
            let (th_risk, th_ok) = match crate::privacy::dp_risk_theory(psi_hat, cfg.k, rho, &dp) {
                Ok(r) => (r, true),
                Err(_) => (f64::NAN, false),
            };
            ExperimentRow {
                rho,
                emp_bias: f64::NAN,
                emp_var: f64::NAN,
                emp_risk,
                se_bias: f64::NAN,
                se_var: f64::NAN,
                se_risk,
                th_bias: f64::NAN,
                th_var: f64::NAN,
                th_risk,
                emp_ok,
                th_ok,
            }
        })
        .collect();

    Ok(result_shell(cfg, rows))
}
