//! Command-line surface: `simulate`, `fit`, `evaluate`, `bootstrap`.
//!
//! Machine-readable results go to files or standard output as CSV/JSON; a
//! short human summary goes to standard error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use panelsurv_core::estimation::{fit_detailed, overparam_check, FitConfig};
use panelsurv_core::metrics::{concordance, integrated_brier};
use panelsurv_core::simulation::{CovariateLaw, Setup, SimConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::csv_io::{data_hash, read_panel_csv, write_panel_csv};
use crate::error::CliError;
use crate::harness::{bootstrap, simulate, BootstrapOptions};
use crate::model_file::{read_model, write_model, ModelFile, Provenance};

#[derive(Debug, Parser)]
#[command(name = "panelsurv", version, about = "Recurrent-event survival with Gamma frailty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_setup(s: &str) -> Result<Setup, String> {
    Setup::from_label(s).ok_or_else(|| format!("unknown setup `{s}` (expected 1, 2, 3, 4 or nonlinear)"))
}

fn parse_covariates(s: &str) -> Result<CovariateLaw, String> {
    match s {
        "uniform" => Ok(CovariateLaw::Uniform { low: 0.0, high: 1.0 }),
        "normal" => Ok(CovariateLaw::StandardNormal),
        _ => Err(format!("unknown covariate law `{s}` (expected uniform or normal)")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel and write it as CSV, with a `.config.json` sidecar.
    Simulate {
        #[arg(long, value_parser = parse_setup)]
        setup: Setup,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        spells: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        psi: Option<f64>,
        #[arg(long)]
        ymax: Option<f64>,
        /// Feature law: uniform (entries in [0,1]) or normal.
        #[arg(long, value_parser = parse_covariates)]
        covariates: Option<CovariateLaw>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a panel CSV and write the model as JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        psi: f64,
        /// JSON file with any of max_iters, grad_tol, rel_f_tol, unit_mean_frailty.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Concordance and integrated Brier score of a model on a panel CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the end of the model grid.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Resimulate, refit and tabulate coefficient means and sds.
    Bootstrap {
        #[arg(long, value_parser = parse_setup)]
        setup: Setup,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Simulation record written next to a simulated CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub setup: String,
    pub config: SimConfig,
}

/// `data.csv` -> `data.config.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("config.json")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

/// Writes `value` to standard output. A closed pipe is not an error.
fn print_json(value: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { setup, n, spells, seed, psi, ymax, covariates, out } => {
            let mut cfg = setup.config(seed);
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = spells {
                cfg.spells = v;
            }
            if let Some(v) = psi {
                cfg.psi = v;
            }
            if let Some(v) = ymax {
                cfg.y_max = v;
            }
            if let Some(v) = covariates {
                cfg.covariates = v;
            }
            let ds = simulate(&cfg)?;
            write_panel_csv(&ds, &out)?;
            write_json(&sidecar_path(&out), &Sidecar { setup: setup.label().into(), config: cfg })?;
            eprintln!(
                "simulated setup {}: {} subjects, {} spells, {} events -> {}",
                setup.label(),
                ds.n_subjects(),
                ds.n_spells(),
                ds.n_events(),
                out.display()
            );
            Ok(())
        }
        Command::Fit { data, psi, config, out } => {
            let ds = read_panel_csv(&data, psi)?;
            let cfg: FitConfig = match &config {
                Some(path) => read_json(path)?,
                None => FitConfig::default(),
            };
            let outcome = fit_detailed(&ds, &cfg)?;
            let model = &outcome.model;
            let seed = read_json::<Sidecar>(&sidecar_path(&data)).ok().map(|s| s.config.seed);
            let provenance = Provenance {
                seed,
                data_hash: data_hash(&ds),
                config: serde_json::to_value(cfg).expect("serialisable"),
            };
            write_model(&ModelFile::new(model, provenance), &out)?;
            let op = overparam_check(&ds);
            print_json(&json!({
                "loglik": model.loglik,
                "converged": model.converged,
                "iterations": model.iterations,
                "stop_reason": format!("{:?}", outcome.stop_reason),
                "gradient_inf_norm": outcome.gradient_inf_norm,
                "clamp_count": model.clamp_count,
                "beta": model.beta,
                "alpha": model.alpha,
                "kappa": model.kappa,
                "negligible_increments": model.negligible_increments(),
                "overparam": {
                    "free_increments": op.free_increments,
                    "grid_cells": op.grid_cells,
                    "features": op.features,
                    "total_spells": op.total_spells,
                    "ratio": op.ratio,
                    "warning": op.warning,
                },
            }));
            eprintln!(
                "fit {}: loglik {:.6} after {} iterations ({}), {} clamped spells",
                data.display(),
                model.loglik,
                model.iterations,
                if model.converged { "converged" } else { "not converged" },
                model.clamp_count
            );
            if op.warning {
                eprintln!("warning: {} parameters for {} spells", op.parameters(), op.total_spells);
            }
            Ok(())
        }
        Command::Evaluate { model, data, horizon } => {
            let file = read_model(&model)?;
            let m = file.model();
            let ds = read_panel_csv(&data, m.psi)?;
            let horizon = horizon.unwrap_or(m.delta.len() as f64 * m.psi);
            let c = concordance(&m, &ds)?;
            let ibs = integrated_brier(&m, &ds, horizon)?;
            print_json(&json!({ "c_index": c, "ibs": ibs, "horizon": horizon, "spells": ds.n_spells() }));
            eprintln!("C-index {c:.4}, IBS {ibs:.4} up to {horizon}");
            Ok(())
        }
        Command::Bootstrap { setup, reps, seed, out } => {
            if reps == 0 {
                return Err(CliError::Usage("--reps must be positive".into()));
            }
            let report = bootstrap(&BootstrapOptions::new(setup, reps, seed));
            let file = fs::File::create(&out).map_err(|e| CliError::io(&out, e))?;
            report.write_table(file).map_err(crate::csv_io::CsvError::from)?;
            let summary = report.summary();
            print_json(
                &json!({ "setup": setup.label(), "reps": reps, "excluded": report.excluded(), "summary": summary }),
            );
            for r in &report.replicates {
                if let Some(e) = match r {
                    crate::harness::ReplicateOutcome::Failed { replicate, error, .. } => {
                        Some(format!("replicate {replicate}: {error}"))
                    }
                    crate::harness::ReplicateOutcome::NotConverged { replicate, .. } => {
                        Some(format!("replicate {replicate}: not converged"))
                    }
                    _ => None,
                } {
                    eprintln!("excluded {e}");
                }
            }
            for s in &summary {
                eprintln!(
                    "{:<10} {:<8} mean {:>9.4} sd {:>7.4} (n={})",
                    s.estimator, s.statistic, s.mean, s.sd, s.used
                );
            }
            if summary.is_empty() {
                return Err(CliError::Numerical("no replicate converged".into()));
            }
            Ok(())
        }
    }
}
