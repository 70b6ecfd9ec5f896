//! Command-line frontend: asymptotic risk curves, theory-vs-simulation
//! experiments, private-aggregation bag-size sweeps, and self-checks, all
//! emitting plot-ready CSV plus a JSON manifest per output file.

mod csvio;
mod grid;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use agglearn_core::privacy::{optimal_bag_size, DpConfig, SensitivityConvention};
use agglearn_core::selfcheck::{self, Fault};
use agglearn_core::simulation::{
    run_dp_experiment, run_theory_verification, ExperimentConfig, ExperimentResult,
};
use agglearn_core::theory::{self};
use agglearn_core::Error;

use csvio::{format_float, line};
use grid::{parse_grid, parse_list_f64, parse_list_usize};
use manifest::write_manifest;

#[derive(Parser)]
#[command(
    name = "agglearn",
    version,
    about = "Regression from aggregate (bagged) responses: exact asymptotic risk, \
             simulations, and a label-private aggregation mechanism"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the asymptotic bias/variance/risk over a parameter grid.
    ///
    /// Writes one CSV row per (psi, k, snr, rho) cell with header
    /// `psi,k,snr,rho,alpha_star,u_star,v_star,bias,variance,risk,status`.
    TheoryCurves {
        /// Sample-to-dimension ratios (grid syntax, all > 1)
        #[arg(long)]
        psi: String,
        /// Bag sizes, comma separated
        #[arg(long)]
        k: String,
        /// Signal-to-noise ratios (grid syntax, all > 0)
        #[arg(long)]
        snr: String,
        /// Interpolation weights in [0, 1] (grid syntax)
        #[arg(long)]
        rho_grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a theory-vs-simulation experiment described by a JSON config.
    ///
    /// Writes one CSV row per grid rho with header
    /// `rho,emp_bias,emp_var,emp_risk,se_bias,se_var,se_risk,th_bias,th_var,th_risk`.
    /// With a `dp` block in the config the full private pipeline runs instead
    /// and the empirical columns hold the normalized private risk.
    Simulate {
        /// JSON experiment config (unknown fields are rejected)
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Parallel replicate cap; 0 uses all cores
        #[arg(long, env = "AGGLEARN_WORKERS", default_value_t = 0)]
        workers: usize,
    },
    /// Sweep the risk-optimal bag size of the private mechanism over rho.
    ///
    /// Writes one CSV row per (psi, rho) with header
    /// `log10_rho,psi,k_star,risk_star,k1_risk,...,k<max>_risk`.
    DpSweep {
        /// Sample-to-dimension ratios (grid syntax, all > 1)
        #[arg(long)]
        psi: String,
        /// Interpolation weights, typically log spaced
        #[arg(long, default_value = "logspace:1e-4:1:41")]
        rho_grid: String,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Clip constant of the mechanism (scales all risks, never the argmin)
        #[arg(long, default_value_t = 2.1)]
        clip_constant: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in consistency checks; nonzero exit on any failure.
    Selfcheck {
        /// Also write the report as JSON
        #[arg(long)]
        out: Option<PathBuf>,
        /// Deliberately break a check to exercise the failure path
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipRegularizerSign,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::TheoryCurves {
            psi,
            k,
            snr,
            rho_grid,
            out,
        } => cmd_theory_curves(&psi, &k, &snr, &rho_grid, &out),
        Command::Simulate {
            config,
            out,
            seed,
            workers,
        } => cmd_simulate(&config, &out, seed, workers),
        Command::DpSweep {
            psi,
            rho_grid,
            k_max,
            epsilon,
            clip_constant,
            out,
        } => cmd_dp_sweep(&psi, &rho_grid, k_max, epsilon, clip_constant, &out),
        Command::Selfcheck { out, inject_fault } => cmd_selfcheck(out.as_deref(), inject_fault),
    }
}

fn cmd_theory_curves(
    psi_spec: &str,
    k_spec: &str,
    snr_spec: &str,
    rho_spec: &str,
    out: &Path,
) -> Result<ExitCode, String> {
    let started = Instant::now();
    let psis = parse_list_f64(psi_spec)?;
    let ks = parse_list_usize(k_spec)?;
    let snrs = parse_list_f64(snr_spec)?;
    let rhos = parse_grid(rho_spec)?;
    validate_all(&psis, |&p| p > 1.0, "psi must be > 1")?;
    validate_all(&ks, |&k| k >= 1, "k must be >= 1")?;
    validate_all(&snrs, |&s| s > 0.0, "snr must be > 0")?;
    validate_all(&rhos, |&r| (0.0..=1.0).contains(&r), "rho must be in [0, 1]")?;

    let mut csv = String::from("psi,k,snr,rho,alpha_star,u_star,v_star,bias,variance,risk,status\n");
    let mut rows = 0usize;
    for &psi in &psis {
        for &k in &ks {
            for &snr in &snrs {
                for &rho in &rhos {
                    let (point, status) = match theory::solve_point(psi, k, rho, snr) {
                        Ok(p) => (Some(p), "ok"),
                        Err(Error::DegenerateDenominator { .. }) => {
                            (None, "degenerate_denominator")
                        }
                        Err(Error::DivergentVariance { .. }) => (None, "divergent_variance"),
                        Err(e) => return Err(e.to_string()),
                    };
                    let f = |v: Option<f64>| format_float(v.unwrap_or(f64::NAN));
                    csv.push_str(&line(&[
                        format_float(psi),
                        k.to_string(),
                        format_float(snr),
                        format_float(rho),
                        f(point.map(|p| p.alpha_star)),
                        f(point.map(|p| p.u_star)),
                        f(point.map(|p| p.v_star)),
                        f(point.map(|p| p.bias)),
                        f(point.map(|p| p.variance)),
                        f(point.map(|p| p.risk)),
                        status.to_string(),
                    ]));
                    rows += 1;
                }
            }
        }
    }
    std::fs::write(out, csv).map_err(|e| format!("writing {}: {e}", out.display()))?;
    let params = json!({
        "psi": psi_spec, "k": k_spec, "snr": snr_spec, "rho_grid": rho_spec,
        "out": out.display().to_string(),
    });
    write_manifest("theory-curves", params, None, &[out], started)
        .map_err(|e| format!("writing manifest: {e}"))?;
    eprintln!("wrote {} ({rows} rows)", out.display());
    Ok(ExitCode::SUCCESS)
}

fn validate_all<T>(values: &[T], pred: impl Fn(&T) -> bool, msg: &str) -> Result<(), String> {
    if values.iter().all(pred) {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    workers: usize,
) -> Result<ExitCode, String> {
    let started = Instant::now();
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("reading {}: {e}", config_path.display()))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        format!(
            "config {}: line {}, column {}: {e}",
            config_path.display(),
            e.line(),
            e.column()
        )
    })?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config
        .validate()
        .map_err(|e| format!("config {}: {e}", config_path.display()))?;

    let result = if config.dp.is_some() {
        run_dp_experiment(&config, workers)
    } else {
        run_theory_verification(&config, workers)
    }
    .map_err(|e| e.to_string())?;

    std::fs::write(out, result_csv(&result)).map_err(|e| format!("writing {}: {e}", out.display()))?;
    let params = json!({
        "config": serde_json::from_str::<serde_json::Value>(&text).unwrap(),
        "seed_override": seed_override,
        "workers": workers,
        "realized_n": result.n,
        "realized_psi": result.realized_psi,
        "out": out.display().to_string(),
    });
    write_manifest("simulate", params, Some(config.seed), &[out], started)
        .map_err(|e| format!("writing manifest: {e}"))?;
    eprintln!(
        "wrote {} ({} rows, n = {}, realized psi = {})",
        out.display(),
        result.rows.len(),
        result.n,
        result.realized_psi
    );
    Ok(ExitCode::SUCCESS)
}

fn result_csv(result: &ExperimentResult) -> String {
    let mut csv = String::from(
        "rho,emp_bias,emp_var,emp_risk,se_bias,se_var,se_risk,th_bias,th_var,th_risk\n",
    );
    for row in &result.rows {
        csv.push_str(&line(&[
            format_float(row.rho),
            format_float(row.emp_bias),
            format_float(row.emp_var),
            format_float(row.emp_risk),
            format_float(row.se_bias),
            format_float(row.se_var),
            format_float(row.se_risk),
            format_float(row.th_bias),
            format_float(row.th_var),
            format_float(row.th_risk),
        ]));
    }
    csv
}

fn cmd_dp_sweep(
    psi_spec: &str,
    rho_spec: &str,
    k_max: usize,
    epsilon: f64,
    clip_constant: f64,
    out: &Path,
) -> Result<ExitCode, String> {
    let started = Instant::now();
    let psis = parse_list_f64(psi_spec)?;
    let rhos = parse_grid(rho_spec)?;
    validate_all(&psis, |&p| p > 1.0, "psi must be > 1")?;
    validate_all(&rhos, |&r| (0.0..=1.0).contains(&r), "rho must be in [0, 1]")?;
    if k_max == 0 {
        return Err("k-max must be >= 1".into());
    }
    // the sweep only reads epsilon and the clip constant from the config;
    // bag size and sample count are swept/irrelevant here
    let cfg = DpConfig::new(epsilon, clip_constant, 1, 2, SensitivityConvention::PaperBOverK)
        .map_err(|e| e.to_string())?;

    let mut header = String::from("log10_rho,psi,k_star,risk_star");
    for k in 1..=k_max {
        header.push_str(&format!(",k{k}_risk"));
    }
    header.push('\n');
    let mut csv = header;
    let mut rows = 0usize;
    for &psi in &psis {
        for &rho in &rhos {
            let profile = optimal_bag_size(psi, rho, &cfg, k_max).map_err(|e| e.to_string())?;
            let mut cells = vec![
                format_float(rho.log10()),
                format_float(psi),
                profile.k_star.to_string(),
                format_float(profile.risk_star),
            ];
            for (_, risk) in &profile.profile {
                cells.push(format_float(risk.unwrap_or(f64::NAN)));
            }
            csv.push_str(&line(&cells));
            rows += 1;
        }
    }
    std::fs::write(out, csv).map_err(|e| format!("writing {}: {e}", out.display()))?;
    let params = json!({
        "psi": psi_spec, "rho_grid": rho_spec, "k_max": k_max,
        "epsilon": epsilon, "clip_constant": clip_constant,
        "out": out.display().to_string(),
    });
    write_manifest("dp-sweep", params, None, &[out], started)
        .map_err(|e| format!("writing manifest: {e}"))?;
    eprintln!("wrote {} ({rows} rows)", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_selfcheck(out: Option<&Path>, fault: Option<FaultArg>) -> Result<ExitCode, String> {
    let started = Instant::now();
    let fault = fault.map(|f| match f {
        FaultArg::FlipRegularizerSign => Fault::FlipRegularizerSign,
    });
    let report = selfcheck::run(fault);
    for check in &report.checks {
        println!(
            "check {:<32} {}  (observed {:.3e}, tolerance {:.3e})",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.observed,
            check.tolerance
        );
    }
    println!(
        "selfcheck: {}",
        if report.passed { "all checks passed" } else { "FAILURES present" }
    );
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&report).unwrap())
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
        let params = json!({
            "inject_fault": fault.is_some(),
            "out": path.display().to_string(),
        });
        write_manifest("selfcheck", params, None, &[path], started)
            .map_err(|e| format!("writing manifest: {e}"))?;
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
