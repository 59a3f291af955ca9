//! Maximum-likelihood fitting of the panel model.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::likelihood::{Normalization, PanelLikelihood, ParameterVector};
use crate::model::{baseline_for_dataset, DiscreteBaselineHazard, GammaParams, LinearTransform, PanelDataset};
use crate::optim::{minimize, LbfgsConfig, Minimum, StopReason};

/// Floor applied to the empirical hazard when seeding the increments.
const INIT_HAZARD_FLOOR: f64 = 1e-6;

/// Increments below `exp(-30)` are reported as zero.
pub const NEGLIGIBLE_LOG_INCREMENT: f64 = -30.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rel_f_tol: f64,
    /// Pin the frailty rate to its shape (unit-mean frailty).
    pub unit_mean_frailty: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { max_iters: 500, grad_tol: 1e-6, rel_f_tol: 1e-9, unit_mean_frailty: true }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter { name: "grad_tol", value: self.grad_tol });
        }
        if !(self.rel_f_tol > 0.0) {
            return Err(Error::InvalidParameter { name: "rel_f_tol", value: self.rel_f_tol });
        }
        Ok(())
    }

    pub fn normalization(&self) -> Normalization {
        if self.unit_mean_frailty {
            Normalization::UnitMean
        } else {
            Normalization::FreeKappa
        }
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            rel_f_tol: self.rel_f_tol,
            ..Default::default()
        }
    }
}

/// Estimated model.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    pub psi: f64,
    pub beta: Vec<f64>,
    /// Increments over the whole grid, zero where `free_mask` is false.
    pub delta: Vec<f64>,
    pub free_mask: Vec<bool>,
    pub alpha: f64,
    pub kappa: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub normalization: Normalization,
    pub clamp_count: usize,
}

impl FittedModel {
    pub fn transform(&self) -> LinearTransform {
        LinearTransform::new(self.beta.clone())
    }

    pub fn hazard(&self) -> Result<DiscreteBaselineHazard> {
        DiscreteBaselineHazard::new(self.psi, self.delta.clone(), self.free_mask.clone())
    }

    pub fn prior(&self) -> Result<GammaParams> {
        GammaParams::new(self.alpha, self.kappa)
    }

    /// Free increments that were driven to numerically zero.
    pub fn negligible_increments(&self) -> Vec<usize> {
        let cut = libm::exp(NEGLIGIBLE_LOG_INCREMENT);
        (0..self.delta.len()).filter(|&k| self.free_mask[k] && self.delta[k] < cut).collect()
    }

    /// Checks the invariants a model must satisfy before use.
    pub fn validate(&self) -> Result<()> {
        GammaParams::new(self.alpha, self.kappa)?;
        self.hazard()?;
        if self.normalization == Normalization::UnitMean && self.alpha != self.kappa {
            return Err(Error::InvalidInput(alloc::format!(
                "unit-mean normalization requires kappa == alpha ({} != {})",
                self.kappa,
                self.alpha
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(())
    }
}

/// Fitted model plus optimizer diagnostics.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: FittedModel,
    /// Log-likelihood after every accepted step.
    pub trace: Vec<f64>,
    pub gradient_inf_norm: f64,
    pub stop_reason: StopReason,
    /// With a free rate: `|l(2 delta, 2 kappa) - l(delta, kappa)|` at the optimum.
    pub scale_invariance_gap: Option<f64>,
}

/// Empirical discrete hazard per grid cell: events in the cell over spells
/// entering it.
pub fn empirical_hazard(ds: &PanelDataset, len: usize) -> Vec<f64> {
    let psi = ds.psi();
    let mut events = vec![0usize; len];
    let mut exits = vec![0usize; len + 1];
    for sp in ds.spells() {
        let c = sp.cell(psi);
        if sp.event && c < len {
            events[c] += 1;
        }
        exits[c.min(len)] += 1;
    }
    // at risk entering cell k: spells with cell >= k
    let mut at_risk = vec![0usize; len];
    let mut acc = exits[len];
    for k in (0..len).rev() {
        acc += exits[k];
        at_risk[k] = acc;
    }
    events.iter().zip(&at_risk).map(|(&e, &r)| if r == 0 { 0.0 } else { e as f64 / r as f64 }).collect()
}

/// Starting point: `beta = 0`, unit frailty parameters, increments at the
/// floored empirical hazard.
pub fn initialize(ds: &PanelDataset, normalization: Normalization) -> Result<ParameterVector> {
    if ds.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let grid = baseline_for_dataset(ds);
    let h = empirical_hazard(ds, grid.len());
    let log_delta = grid.free_indices().map(|k| libm::log(h[k].max(INIT_HAZARD_FLOOR))).collect();
    Ok(ParameterVector {
        beta: vec![0.0; ds.p()],
        log_delta,
        log_alpha: 0.0,
        log_kappa: (normalization == Normalization::FreeKappa).then_some(0.0),
    })
}

fn run(lik: &PanelLikelihood<'_>, x0: Vec<f64>, cfg: &FitConfig) -> Result<Minimum> {
    let objective = |theta: &[f64]| lik.gradient(theta).map(|(e, g)| (-e.loglik, g.into_iter().map(|v| -v).collect()));
    minimize(objective, x0, &cfg.lbfgs())
}

/// Maximises the panel log-likelihood.
pub fn fit(ds: &PanelDataset, cfg: &FitConfig) -> Result<FittedModel> {
    fit_detailed(ds, cfg).map(|o| o.model)
}

/// [`fit`] with optimizer diagnostics.
pub fn fit_detailed(ds: &PanelDataset, cfg: &FitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let normalization = cfg.normalization();
    let start = initialize(ds, normalization)?;
    let lik = PanelLikelihood::new(ds, normalization);
    let min = run(&lik, start.to_flat(), cfg)?;
    let pv = ParameterVector::from_flat(&min.x, ds.p(), lik.free_count(), normalization)?;
    let eval = lik.evaluate(&min.x)?;
    let hz = lik.baseline(&min.x)?;
    let prior = pv.prior()?;
    let scale_invariance_gap = match normalization {
        Normalization::FreeKappa => {
            let mut scaled = pv.clone();
            for v in scaled.log_delta.iter_mut() {
                *v += libm::log(2.0);
            }
            scaled.log_kappa = scaled.log_kappa.map(|k| k + libm::log(2.0));
            Some(libm::fabs(lik.evaluate(&scaled.to_flat())?.loglik - eval.loglik))
        }
        Normalization::UnitMean => None,
    };
    let model = FittedModel {
        psi: ds.psi(),
        beta: pv.beta.clone(),
        delta: hz.increments().to_vec(),
        free_mask: hz.free_mask().to_vec(),
        alpha: prior.shape,
        kappa: prior.rate,
        loglik: eval.loglik,
        converged: min.converged(),
        iterations: min.iterations,
        normalization,
        clamp_count: eval.clamped,
    };
    Ok(FitOutcome {
        trace: min.trace.iter().map(|v| -v).collect(),
        gradient_inf_norm: min.gradient.iter().fold(0.0, |m, v| m.max(libm::fabs(*v))),
        stop_reason: min.reason,
        model,
        scale_invariance_gap,
    })
}

/// Frailty-free reference fit.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineFit {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fits the same discrete-time model with the frailty removed.
pub fn fit_without_frailty(ds: &PanelDataset, cfg: &FitConfig) -> Result<BaselineFit> {
    cfg.validate()?;
    let start = initialize(ds, Normalization::UnitMean)?;
    let lik = PanelLikelihood::without_frailty(ds);
    let mut x0 = start.beta.clone();
    x0.extend_from_slice(&start.log_delta);
    let min = run(&lik, x0, cfg)?;
    let hz = lik.baseline(&min.x)?;
    Ok(BaselineFit {
        beta: min.x[..ds.p()].to_vec(),
        delta: hz.increments().to_vec(),
        loglik: -min.value,
        converged: min.converged(),
        iterations: min.iterations,
    })
}

/// Parameter-count diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverparamReport {
    pub free_increments: usize,
    /// Cells on the grid, free or pinned at zero.
    pub grid_cells: usize,
    pub features: usize,
    pub total_spells: usize,
    /// `(r + p + 1) / total_spells`; `None` without spells.
    pub ratio: Option<f64>,
    /// Set when the free parameter count reaches the number of spells.
    pub warning: bool,
}

impl OverparamReport {
    pub fn new(free_increments: usize, grid_cells: usize, features: usize, total_spells: usize) -> Self {
        let params = free_increments + features + 1;
        OverparamReport {
            free_increments,
            grid_cells,
            features,
            total_spells,
            ratio: (total_spells > 0).then(|| params as f64 / total_spells as f64),
            warning: params >= total_spells,
        }
    }

    pub fn parameters(&self) -> usize {
        self.free_increments + self.features + 1
    }
}

pub fn overparam_check(ds: &PanelDataset) -> OverparamReport {
    let grid = baseline_for_dataset(ds);
    OverparamReport::new(grid.free_count(), grid.len(), ds.p(), ds.n_spells())
}
