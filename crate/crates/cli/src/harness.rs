//! Resimulation bootstrap over the registered setups.
//!
//! Replicate `r` draws a fresh panel with seed `replicate_seed(seed, r)`, fits
//! it, and records the estimates. Replicates run on a rayon pool and are
//! collected in replicate order, so the output does not depend on the number
//! of threads.

use std::io::Write;

use panelsurv_core::estimation::{fit_without_frailty, FitConfig};
use panelsurv_core::metrics::{concordance, marginal_concordance};
use panelsurv_core::simulation::{
    assemble, generate_subject, replicate_seed, FeatureModel, HazardEvaluator, Setup, SimConfig, ORACLE_BETA,
};
use panelsurv_core::{fit, PanelDataset, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Subjects used for training in the predictive setup; the rest are held out.
pub const NONLINEAR_TRAIN: usize = 200;

/// Generates a panel, drawing subjects in parallel.
pub fn simulate(cfg: &SimConfig) -> Result<PanelDataset> {
    cfg.validate()?;
    let hz = HazardEvaluator::new(cfg.hazard, cfg.t_max())?;
    let draws = (0..cfg.n).into_par_iter().map(|i| generate_subject(cfg, &hz, i)).collect();
    Ok(assemble(cfg, draws)?.dataset)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Replicate {
    pub replicate: usize,
    pub seed: u64,
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub loglik: f64,
    pub iterations: usize,
    /// Coefficients of the same model fitted without frailty.
    pub no_frailty_beta: Option<Vec<f64>>,
    /// Held-out concordance of `phi(x)` (predictive setup only).
    pub c_index: Option<f64>,
    /// Held-out concordance with each spell scored given its subject's
    /// earlier spells.
    pub c_index_history: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ReplicateOutcome {
    Done(Replicate),
    /// Fit stopped without meeting a convergence criterion.
    NotConverged {
        replicate: usize,
        seed: u64,
    },
    Failed {
        replicate: usize,
        seed: u64,
        error: String,
    },
}

impl ReplicateOutcome {
    pub fn done(&self) -> Option<&Replicate> {
        match self {
            ReplicateOutcome::Done(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub estimator: String,
    pub statistic: String,
    pub oracle: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub setup: String,
    pub seed: u64,
    pub replicates: Vec<ReplicateOutcome>,
}

/// Options shared by all replicates.
#[derive(Clone, Debug)]
pub struct BootstrapOptions {
    pub setup: Setup,
    pub reps: usize,
    pub seed: u64,
    pub fit: FitConfig,
    /// Applied to each replicate's configuration after the seed is set.
    pub adjust: fn(&mut SimConfig),
}

impl BootstrapOptions {
    pub fn new(setup: Setup, reps: usize, seed: u64) -> Self {
        BootstrapOptions { setup, reps, seed, fit: FitConfig::default(), adjust: |_| {} }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

pub fn run_replicate(opts: &BootstrapOptions, replicate: usize) -> ReplicateOutcome {
    let seed = replicate_seed(opts.seed, replicate as u64);
    let mut cfg = opts.setup.config(seed);
    (opts.adjust)(&mut cfg);
    match replicate_fit(opts, &cfg, replicate, seed) {
        Ok(out) => out,
        Err(e) => ReplicateOutcome::Failed { replicate, seed, error: e.to_string() },
    }
}

fn replicate_fit(opts: &BootstrapOptions, cfg: &SimConfig, replicate: usize, seed: u64) -> Result<ReplicateOutcome> {
    let hz = HazardEvaluator::new(cfg.hazard, cfg.t_max())?;
    let draws = (0..cfg.n).map(|i| generate_subject(cfg, &hz, i)).collect();
    let ds = assemble(cfg, draws)?.dataset;
    let predictive = matches!(cfg.features, FeatureModel::Nonlinear { .. });
    let (train, test) = if predictive {
        ds.split_at(NONLINEAR_TRAIN)
    } else {
        (ds, PanelDataset::new(cfg.psi, cfg.features.p(), vec![])?)
    };
    let model = fit(&train, &opts.fit)?;
    if !model.converged {
        return Ok(ReplicateOutcome::NotConverged { replicate, seed });
    }
    let (no_frailty_beta, c_index, c_index_history) = if predictive {
        (None, Some(marginal_concordance(&model, &test)?), Some(concordance(&model, &test)?))
    } else {
        let base = fit_without_frailty(&train, &opts.fit)?;
        (base.converged.then_some(base.beta), None, None)
    };
    Ok(ReplicateOutcome::Done(Replicate {
        replicate,
        seed,
        beta: model.beta,
        alpha: model.alpha,
        loglik: model.loglik,
        iterations: model.iterations,
        no_frailty_beta,
        c_index,
        c_index_history,
    }))
}

/// Runs every replicate on the current rayon pool.
pub fn bootstrap(opts: &BootstrapOptions) -> BootstrapReport {
    let replicates = (0..opts.reps).into_par_iter().map(|r| run_replicate(opts, r)).collect();
    BootstrapReport { setup: opts.setup.label().into(), seed: opts.seed, replicates }
}

/// Runs [`bootstrap`] on a dedicated pool of `threads` workers.
pub fn bootstrap_with_threads(opts: &BootstrapOptions, threads: usize) -> BootstrapReport {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| bootstrap(opts))
}

impl BootstrapReport {
    pub fn completed(&self) -> Vec<&Replicate> {
        self.replicates.iter().filter_map(ReplicateOutcome::done).collect()
    }

    pub fn excluded(&self) -> usize {
        self.replicates.len() - self.completed().len()
    }

    /// Mean and standard deviation of each estimate over completed replicates.
    pub fn summary(&self) -> Vec<Summary> {
        let done = self.completed();
        let mut rows = Vec::new();
        let Some(first) = done.first() else { return rows };
        let oracle = |k: usize| if self.setup == Setup::Nonlinear.label() { None } else { ORACLE_BETA.get(k).copied() };
        for k in 0..first.beta.len() {
            let v: Vec<f64> = done.iter().map(|r| r.beta[k]).collect();
            let (mean, sd) = mean_sd(&v);
            rows.push(Summary {
                estimator: "frailty".into(),
                statistic: format!("beta{}", k + 1),
                oracle: oracle(k),
                mean,
                sd,
                used: v.len(),
            });
        }
        let v: Vec<f64> = done.iter().map(|r| r.alpha).collect();
        let (mean, sd) = mean_sd(&v);
        rows.push(Summary {
            estimator: "frailty".into(),
            statistic: "alpha".into(),
            oracle: None,
            mean,
            sd,
            used: v.len(),
        });
        let base: Vec<&Vec<f64>> = done.iter().filter_map(|r| r.no_frailty_beta.as_ref()).collect();
        if !base.is_empty() {
            for k in 0..base[0].len() {
                let v: Vec<f64> = base.iter().map(|b| b[k]).collect();
                let (mean, sd) = mean_sd(&v);
                rows.push(Summary {
                    estimator: "no_frailty".into(),
                    statistic: format!("beta{}", k + 1),
                    oracle: oracle(k),
                    mean,
                    sd,
                    used: v.len(),
                });
            }
        }
        let scores: [(&str, fn(&Replicate) -> Option<f64>); 2] =
            [("c_index", |r| r.c_index), ("c_index_history", |r| r.c_index_history)];
        for (name, get) in scores {
            let c: Vec<f64> = done.iter().filter_map(|r| get(r)).collect();
            if !c.is_empty() {
                let (mean, sd) = mean_sd(&c);
                rows.push(Summary {
                    estimator: "frailty".into(),
                    statistic: name.into(),
                    oracle: None,
                    mean,
                    sd,
                    used: c.len(),
                });
            }
        }
        rows
    }

    /// Table of the summary, one row per estimator and statistic.
    pub fn write_table<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["setup", "estimator", "statistic", "oracle", "mean", "sd", "replicates", "excluded"])?;
        let excluded = self.excluded().to_string();
        for row in self.summary() {
            w.write_record([
                self.setup.clone(),
                row.estimator,
                row.statistic,
                row.oracle.map(|o| o.to_string()).unwrap_or_default(),
                row.mean.to_string(),
                row.sd.to_string(),
                row.used.to_string(),
                excluded.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
