//! Discrete-time survival analysis of recurrent events with Gamma frailty.
//!
//! Each subject contributes an ordered panel of grouped spells. The frailty
//! posterior is carried from spell to spell as a Gamma distribution (exact
//! after censoring, moment-matched after an event), which gives a closed-form
//! panel likelihood. Parameters are fitted by quasi-Newton maximum likelihood.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chain;
pub mod error;
pub mod estimation;
pub mod likelihood;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod quadrature;
pub mod simulation;

pub use chain::{compute_xi, fold_chain, posterior_moments_oracle, posterior_update, XiPair};
pub use error::{Error, Result};
pub use estimation::{fit, fit_detailed, fit_without_frailty, initialize, overparam_check, FitConfig, FittedModel};
pub use likelihood::{
    conditional_spell_likelihood, dataset_loglik, dataset_loglik_grad, panel_loglik, spell_likelihood, Normalization,
    PanelLikelihood, ParameterVector,
};
pub use metrics::{c_index, integrated_brier, predict_survival, risk_score, SurvivalCurve};
pub use model::{build_baseline, DiscreteBaselineHazard, GammaParams, LinearTransform, PanelDataset, Spell, Subject};
pub use simulation::{generate, sample_duration, CovariateLaw, HazardSpec, Setup, SimConfig};
