//! Discrete-time spell likelihoods and the chained panel log-likelihood.
//!
//! A spell with outcome cell `c`, event flag `d` and feature effect `phi`
//! contributes
//!
//! ```text
//! (1 + phi S(c) / rate)^(-shape) - d (1 + phi S(c+1) / rate)^(-shape)
//! ```
//!
//! where `S` is the cumulative baseline hazard and `(shape, rate)` is the
//! running Gamma posterior of the subject's frailty. The posterior is advanced
//! after each spell by [`crate::chain`].
//!
//! Gradients are computed by reverse accumulation through each subject's
//! chain. The local Jacobian of one spell step (five scalar inputs, three
//! outputs) comes from the same generic routine evaluated on dual numbers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain;
use crate::error::{Error, Result};
use crate::math::{CompensatedSum, Dual, Real};
use crate::model::{
    baseline_for_dataset, grid_cell, DiscreteBaselineHazard, GammaParams, LinearTransform, PanelDataset, Subject,
};

/// Spell likelihoods below this value are clamped before taking the log.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

/// How the frailty scale is pinned down.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Normalization {
    /// `rate == shape`, so the frailty has unit mean.
    UnitMean,
    /// Rate estimated separately. The likelihood is flat along joint
    /// `(delta, rate)` rescaling in this mode.
    FreeKappa,
}

/// Unconstrained parameters: `beta`, log increments over the free cells, log
/// shape, and log rate when it is estimated separately.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub beta: Vec<f64>,
    pub log_delta: Vec<f64>,
    pub log_alpha: f64,
    pub log_kappa: Option<f64>,
}

impl ParameterVector {
    pub fn normalization(&self) -> Normalization {
        if self.log_kappa.is_some() {
            Normalization::FreeKappa
        } else {
            Normalization::UnitMean
        }
    }

    pub fn alpha(&self) -> f64 {
        libm::exp(self.log_alpha)
    }

    pub fn kappa(&self) -> f64 {
        libm::exp(self.log_kappa.unwrap_or(self.log_alpha))
    }

    pub fn prior(&self) -> Result<GammaParams> {
        GammaParams::new(self.alpha(), self.kappa())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.log_delta);
        v.push(self.log_alpha);
        v.extend(self.log_kappa);
        v
    }

    pub fn from_flat(theta: &[f64], p: usize, r: usize, normalization: Normalization) -> Result<Self> {
        let extra = match normalization {
            Normalization::UnitMean => 1,
            Normalization::FreeKappa => 2,
        };
        if theta.len() != p + r + extra {
            return Err(Error::DimensionMismatch { expected: p + r + extra, found: theta.len() });
        }
        Ok(ParameterVector {
            beta: theta[..p].to_vec(),
            log_delta: theta[p..p + r].to_vec(),
            log_alpha: theta[p + r],
            log_kappa: (extra == 2).then(|| theta[p + r + 1]),
        })
    }

    pub fn len(&self) -> usize {
        self.beta.len() + self.log_delta.len() + 1 + usize::from(self.log_kappa.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Names of the flat entries, for diagnostics.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.beta.len()).map(|i| format!("beta[{i}]")).collect();
        out.extend((0..self.log_delta.len()).map(|i| format!("log_delta[{i}]")));
        out.push(String::from("log_alpha"));
        if self.log_kappa.is_some() {
            out.push(String::from("log_kappa"));
        }
        out
    }
}

/// Output of one spell step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Step<T> {
    pub log_lik: T,
    pub shape: T,
    pub rate: T,
}

/// Log-likelihood of one spell under `Gamma(shape, rate)` frailty and the
/// posterior after it. `s` is the cumulative hazard at the outcome cell and
/// `delta_next` the increment of that cell (ignored when `tail`).
pub(crate) fn spell_step<T: Real>(shape: T, rate: T, phi: T, s: T, delta_next: T, event: bool, tail: bool) -> Step<T> {
    let xi = rate + phi * s;
    let survivor = -shape * (phi * s / rate).ln_1p();
    let gap = phi * delta_next;
    let log_lik = if event && !tail {
        // log[(1+u)^-a - (1+u')^-a] = log(1+u)^-a + log(1 - (xi/xi')^a)
        let rel = -shape * (gap / xi).ln_1p();
        survivor + (-(rel.exp_m1())).ln()
    } else {
        survivor
    };
    let (shape, rate) = chain::update(shape, xi, gap, event, tail);
    Step { log_lik, shape, rate }
}

/// Spell log-likelihood without frailty: `exp(-phi S) - d exp(-phi S')`.
pub(crate) fn spell_step_no_frailty<T: Real>(phi: T, s: T, delta_next: T, event: bool, tail: bool) -> T {
    let survivor = -(phi * s);
    if event && !tail {
        survivor + (-((-(phi * delta_next)).exp_m1())).ln()
    } else {
        survivor
    }
}

fn cell_inputs(hz: &DiscreteBaselineHazard, cell: usize) -> Result<(f64, f64, bool)> {
    let s = hz.cumulative_at(cell).ok_or(Error::BeyondGrid { cell, len: hz.len() })?;
    match hz.increments().get(cell) {
        Some(&d) => Ok((s, d, false)),
        None => Ok((s, 0.0, true)),
    }
}

/// Marginal likelihood of a grouped spell under `Gamma(shape, rate)` frailty.
pub fn spell_likelihood(prior: GammaParams, phi: f64, y: f64, event: bool, hz: &DiscreteBaselineHazard) -> Result<f64> {
    let cell = grid_cell(y, hz.interval()).ok_or(Error::OffGrid { row: 0, y, psi: hz.interval() })?;
    let (s, d, tail) = cell_inputs(hz, cell)?;
    let step = spell_step(prior.shape, prior.rate, phi, s, d, event, tail);
    let v = libm::exp(step.log_lik);
    if v.is_nan() {
        return Err(Error::Internal("spell likelihood is not a number"));
    }
    Ok(v)
}

/// Likelihood of a spell given the folded posterior of all earlier spells.
pub fn conditional_spell_likelihood(
    state: GammaParams,
    phi: f64,
    y: f64,
    event: bool,
    hz: &DiscreteBaselineHazard,
) -> Result<f64> {
    spell_likelihood(state, phi, y, event, hz)
}

/// Chained log-likelihood of one subject's spells, with the number of spells
/// whose likelihood was clamped at [`LIKELIHOOD_FLOOR`].
pub fn panel_loglik_with_clamps(
    subject: &Subject,
    lt: &LinearTransform,
    hz: &DiscreteBaselineHazard,
    prior: GammaParams,
) -> Result<(f64, usize)> {
    let floor = libm::log(LIKELIHOOD_FLOOR);
    let mut total = 0.0;
    let mut clamps = 0;
    let (mut shape, mut rate) = (prior.shape, prior.rate);
    for (j, sp) in subject.spells.iter().enumerate() {
        let phi = lt.transform(&sp.x)?;
        let (s, d, tail) = cell_inputs(hz, sp.cell(hz.interval()))?;
        let step = spell_step(shape, rate, phi, s, d, sp.event, tail);
        let ll = checked_log_lik(step.log_lik, subject, j)?;
        if ll < floor {
            clamps += 1;
            total += floor;
        } else {
            total += ll;
        }
        shape = step.shape;
        rate = step.rate;
    }
    Ok((total, clamps))
}

/// Chained log-likelihood of one subject's spells.
pub fn panel_loglik(
    subject: &Subject,
    lt: &LinearTransform,
    hz: &DiscreteBaselineHazard,
    prior: GammaParams,
) -> Result<f64> {
    panel_loglik_with_clamps(subject, lt, hz, prior).map(|r| r.0)
}

fn checked_log_lik(ll: f64, subject: &Subject, spell: usize) -> Result<f64> {
    if ll.is_nan() || ll == f64::NEG_INFINITY {
        return Err(Error::ZeroLikelihood { subject: subject.id.clone(), spell });
    }
    Ok(ll)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Frailty(Normalization),
    NoFrailty,
}

/// Log-likelihood value with clamp count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loglik: f64,
    pub clamped: usize,
}

/// Dataset log-likelihood as a function of the flat unconstrained parameters.
///
/// Flat layout: `beta (p)`, `log delta` over the free cells `(r)`, then
/// `log alpha` and, for [`Normalization::FreeKappa`], `log kappa`. The
/// frailty-free variant has only `beta` and `log delta`.
#[derive(Clone, Debug)]
pub struct PanelLikelihood<'a> {
    ds: &'a PanelDataset,
    grid: DiscreteBaselineHazard,
    free: Vec<usize>,
    cells: Vec<usize>,
    mode: Mode,
}

struct Unpacked {
    beta: Vec<f64>,
    hz: DiscreteBaselineHazard,
    prior: Option<GammaParams>,
}

impl<'a> PanelLikelihood<'a> {
    pub fn new(ds: &'a PanelDataset, normalization: Normalization) -> Self {
        Self::with_mode(ds, Mode::Frailty(normalization))
    }

    /// Variant with the frailty removed (every subject has frailty one).
    pub fn without_frailty(ds: &'a PanelDataset) -> Self {
        Self::with_mode(ds, Mode::NoFrailty)
    }

    fn with_mode(ds: &'a PanelDataset, mode: Mode) -> Self {
        let grid = baseline_for_dataset(ds);
        let free = grid.free_indices().collect();
        let cells = ds.spells().map(|sp| sp.cell(ds.psi())).collect();
        PanelLikelihood { ds, grid, free, cells, mode }
    }

    pub fn dataset(&self) -> &PanelDataset {
        self.ds
    }

    /// Baseline structure with all free increments at zero.
    pub fn grid(&self) -> &DiscreteBaselineHazard {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.ds.p()
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn n_params(&self) -> usize {
        self.p()
            + self.free.len()
            + match self.mode {
                Mode::Frailty(Normalization::UnitMean) => 1,
                Mode::Frailty(Normalization::FreeKappa) => 2,
                Mode::NoFrailty => 0,
            }
    }

    pub fn normalization(&self) -> Option<Normalization> {
        match self.mode {
            Mode::Frailty(n) => Some(n),
            Mode::NoFrailty => None,
        }
    }

    fn unpack(&self, theta: &[f64]) -> Result<Unpacked> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), found: theta.len() });
        }
        let p = self.p();
        let r = self.free.len();
        let deltas: Vec<f64> = theta[p..p + r].iter().map(|v| libm::exp(*v)).collect();
        let hz = self.grid.with_free_increments(&deltas)?;
        let prior = match self.mode {
            Mode::Frailty(n) => {
                let a = libm::exp(theta[p + r]);
                let k = match n {
                    Normalization::UnitMean => a,
                    Normalization::FreeKappa => libm::exp(theta[p + r + 1]),
                };
                Some(GammaParams::new(a, k)?)
            }
            Mode::NoFrailty => None,
        };
        Ok(Unpacked { beta: theta[..p].to_vec(), hz, prior })
    }

    /// Log-likelihood at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let u = self.unpack(theta)?;
        let floor = libm::log(LIKELIHOOD_FLOOR);
        let mut sum = CompensatedSum::new();
        let mut clamped = 0;
        let mut idx = 0;
        for subject in self.ds.subjects() {
            let mut subject_sum = 0.0;
            let mut state = u.prior.map(|g| (g.shape, g.rate));
            for (j, sp) in subject.spells.iter().enumerate() {
                let cell = self.cells[idx];
                idx += 1;
                let phi = libm::exp(dot(&sp.x, &u.beta));
                let (s, d, tail) = cell_inputs(&u.hz, cell)?;
                let ll = match state.as_mut() {
                    Some((shape, rate)) => {
                        let step = spell_step(*shape, *rate, phi, s, d, sp.event, tail);
                        *shape = step.shape;
                        *rate = step.rate;
                        step.log_lik
                    }
                    None => spell_step_no_frailty(phi, s, d, sp.event, tail),
                };
                let ll = checked_log_lik(ll, subject, j)?;
                if ll < floor {
                    clamped += 1;
                    subject_sum += floor;
                } else {
                    subject_sum += ll;
                }
            }
            sum.add(subject_sum);
        }
        Ok(Evaluation { loglik: sum.total(), clamped })
    }

    /// Log-likelihood and its gradient with respect to the flat parameters.
    pub fn gradient(&self, theta: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
        type D = Dual<5>;
        let u = self.unpack(theta)?;
        let p = self.p();
        let floor = libm::log(LIKELIHOOD_FLOOR);
        let len = u.hz.len();
        let mut g_beta = vec![0.0; p];
        // adjoints of increment k directly, and of the prefix sum ending at k
        let mut g_inc = vec![0.0; len + 1];
        let mut g_cum = vec![0.0; len + 1];
        let mut g_shape0 = 0.0;
        let mut g_rate0 = 0.0;
        let mut sum = CompensatedSum::new();
        let mut clamped = 0;
        let mut idx = 0;

        // per-spell local Jacobians: rows (log_lik, shape', rate') x inputs
        // (shape, rate, phi, s, delta_next)
        let mut jac: Vec<[[f64; 5]; 3]> = Vec::new();
        let mut meta: Vec<(f64, usize, bool)> = Vec::new();

        for subject in self.ds.subjects() {
            jac.clear();
            meta.clear();
            let mut subject_sum = 0.0;
            let mut state = u.prior.map(|g| (g.shape, g.rate));
            for (j, sp) in subject.spells.iter().enumerate() {
                let cell = self.cells[idx];
                idx += 1;
                let phi = libm::exp(dot(&sp.x, &u.beta));
                let (s, d, tail) = cell_inputs(&u.hz, cell)?;
                let mut rows = [[0.0; 5]; 3];
                let ll = match state.as_mut() {
                    Some((shape, rate)) => {
                        let step = spell_step(
                            D::variable(*shape, 0),
                            D::variable(*rate, 1),
                            D::variable(phi, 2),
                            D::variable(s, 3),
                            D::variable(d, 4),
                            sp.event,
                            tail,
                        );
                        rows = [step.log_lik.d, step.shape.d, step.rate.d];
                        *shape = step.shape.v;
                        *rate = step.rate.v;
                        step.log_lik.v
                    }
                    None => {
                        let ll = spell_step_no_frailty(
                            D::variable(phi, 2),
                            D::variable(s, 3),
                            D::variable(d, 4),
                            sp.event,
                            tail,
                        );
                        rows[0] = ll.d;
                        ll.v
                    }
                };
                let ll = checked_log_lik(ll, subject, j)?;
                if ll < floor {
                    clamped += 1;
                    subject_sum += floor;
                    rows[0] = [0.0; 5];
                } else {
                    subject_sum += ll;
                }
                jac.push(rows);
                meta.push((phi, cell, tail));
            }
            sum.add(subject_sum);

            let (mut adj_shape, mut adj_rate) = (0.0, 0.0);
            for (j, sp) in subject.spells.iter().enumerate().rev() {
                let rows = &jac[j];
                let (phi, cell, tail) = meta[j];
                let mut g = [0.0; 5];
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi = rows[0][i] + adj_shape * rows[1][i] + adj_rate * rows[2][i];
                }
                for (gb, x) in g_beta.iter_mut().zip(&sp.x) {
                    *gb += g[2] * phi * x;
                }
                g_cum[cell] += g[3];
                if !tail {
                    g_inc[cell] += g[4];
                }
                adj_shape = g[0];
                adj_rate = g[1];
            }
            g_shape0 += adj_shape;
            g_rate0 += adj_rate;
        }

        // d S(c) / d delta_k = 1 for k < c
        let mut suffix = 0.0;
        for k in (0..len).rev() {
            suffix += g_cum[k + 1];
            g_inc[k] += suffix;
        }

        let mut grad = Vec::with_capacity(self.n_params());
        grad.extend_from_slice(&g_beta);
        for &k in &self.free {
            grad.push(g_inc[k] * u.hz.increments()[k]);
        }
        match (self.mode, u.prior) {
            (Mode::Frailty(Normalization::UnitMean), Some(g)) => grad.push((g_shape0 + g_rate0) * g.shape),
            (Mode::Frailty(Normalization::FreeKappa), Some(g)) => {
                grad.push(g_shape0 * g.shape);
                grad.push(g_rate0 * g.rate);
            }
            _ => {}
        }
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { parameter: self.param_name(i) });
        }
        Ok((Evaluation { loglik: sum.total(), clamped }, grad))
    }

    fn param_name(&self, i: usize) -> String {
        let p = self.p();
        let r = self.free.len();
        if i < p {
            format!("beta[{i}]")
        } else if i < p + r {
            format!("log_delta[{}]", self.free[i - p])
        } else if i == p + r {
            String::from("log_alpha")
        } else {
            String::from("log_kappa")
        }
    }

    /// Full baseline hazard at `theta`.
    pub fn baseline(&self, theta: &[f64]) -> Result<DiscreteBaselineHazard> {
        self.unpack(theta).map(|u| u.hz)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Panel log-likelihood of the whole dataset at `pv`.
pub fn dataset_loglik(ds: &PanelDataset, pv: &ParameterVector) -> Result<f64> {
    let lik = PanelLikelihood::new(ds, pv.normalization());
    lik.evaluate(&pv.to_flat()).map(|e| e.loglik)
}

/// Gradient of [`dataset_loglik`] with respect to the flat unconstrained
/// parameters of `pv`.
pub fn dataset_loglik_grad(ds: &PanelDataset, pv: &ParameterVector) -> Result<Vec<f64>> {
    let lik = PanelLikelihood::new(ds, pv.normalization());
    lik.gradient(&pv.to_flat()).map(|r| r.1)
}
