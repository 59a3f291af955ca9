#![allow(dead_code)]

use panelsurv_core::likelihood::{Normalization, PanelLikelihood, ParameterVector};
use panelsurv_core::simulation::{generate, Setup};
use panelsurv_core::PanelDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Small simulated panel with a short grid.
pub fn small_dataset(seed: u64, n: usize, spells: usize, y_max: f64) -> PanelDataset {
    let mut cfg = Setup::LogHazard.config(seed);
    cfg.n = n;
    cfg.spells = spells;
    cfg.y_max = y_max;
    generate(&cfg).unwrap()
}

/// Random parameters of the right shape for `ds`.
pub fn random_parameters(ds: &PanelDataset, normalization: Normalization, r: &mut ChaCha20Rng) -> ParameterVector {
    let free = PanelLikelihood::new(ds, normalization).free_count();
    ParameterVector {
        beta: (0..ds.p()).map(|_| r.random_range(-1.0..1.0)).collect(),
        log_delta: (0..free).map(|_| r.random_range(-3.0..0.5)).collect(),
        log_alpha: r.random_range(-1.0..1.5),
        log_kappa: (normalization == Normalization::FreeKappa).then(|| r.random_range(-1.0..1.5)),
    }
}
