//! Synthetic recurrent-event panels with grouped, administratively censored
//! outcomes.
//!
//! Every subject draws one frailty `v`; each of its spells draws independent
//! features `x` (Uniform(0,1) entries by default), a latent duration `t` with hazard `v * h0(t) * phi(x)`,
//! and is recorded as `y = psi * floor(t / psi)`, censored at `y_max`.
//! Subject `i` uses its own ChaCha20 stream, so generation is reproducible and
//! independent of how subjects are scheduled.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::likelihood::Normalization;
use crate::model::{PanelDataset, Spell, Subject};
use crate::quadrature::integrate;

/// Baseline hazard shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum HazardSpec {
    /// `h0(t) = ln(1 + c t)`.
    LogHazard { c: f64 },
    /// `h0(t) = c1 sqrt(t) sin^2(c2 t)`.
    SqrtSin { c1: f64, c2: f64 },
}

impl HazardSpec {
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            HazardSpec::LogHazard { c } => libm::log1p(c * t),
            HazardSpec::SqrtSin { c1, c2 } => {
                let s = libm::sin(c2 * t);
                c1 * libm::sqrt(t) * s * s
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |name, value| Err(Error::InvalidParameter { name, value });
        match *self {
            HazardSpec::LogHazard { c } if !(c > 0.0 && c.is_finite()) => bad("c", c),
            HazardSpec::SqrtSin { c1, .. } if !(c1 > 0.0 && c1.is_finite()) => bad("c1", c1),
            HazardSpec::SqrtSin { c2, .. } if !(c2 > 0.0 && c2.is_finite()) => bad("c2", c2),
            _ => Ok(()),
        }
    }
}

/// `(1 + x) ln(1 + x) - x`, accurate for small `x`.
fn log_hazard_integral(x: f64) -> f64 {
    if x < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 12.0 - x2 * x / 20.0 + x2 * x2 / 30.0)
    } else {
        (1.0 + x) * libm::log1p(x) - x
    }
}

/// Cumulative baseline hazard `H0(t)`. Closed form for the log hazard;
/// adaptive quadrature (absolute tolerance 1e-10) otherwise.
pub fn cumulative_hazard(hs: &HazardSpec, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    match *hs {
        HazardSpec::LogHazard { c } => log_hazard_integral(c * t) / c,
        HazardSpec::SqrtSin { .. } => {
            integrate(|s| hs.rate(s), 0.0, t, 1e-10, 0.0, 100_000).map(|r| r.value).unwrap_or(f64::NAN)
        }
    }
}

/// Cumulative hazard with a precomputed table of unit panels, for repeated
/// evaluation on `[0, t_max]`.
#[derive(Clone, Debug)]
pub struct HazardEvaluator {
    spec: HazardSpec,
    t_max: f64,
    // cumulative hazard at integer panel boundaries (quadrature hazards only)
    table: Vec<f64>,
}

impl HazardEvaluator {
    pub fn new(spec: HazardSpec, t_max: f64) -> Result<Self> {
        spec.validate()?;
        let table = match spec {
            HazardSpec::LogHazard { .. } => Vec::new(),
            HazardSpec::SqrtSin { .. } => {
                let panels = libm::ceil(t_max) as usize;
                let mut table = Vec::with_capacity(panels + 1);
                table.push(0.0);
                let mut acc = 0.0;
                for k in 0..panels {
                    let a = k as f64;
                    acc += integrate(|s| spec.rate(s), a, a + 1.0, 1e-13, 1e-15, 10_000)?.value;
                    table.push(acc);
                }
                table
            }
        };
        Ok(HazardEvaluator { spec, t_max, table })
    }

    pub fn spec(&self) -> &HazardSpec {
        &self.spec
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if self.table.is_empty() {
            return cumulative_hazard(&self.spec, t);
        }
        let k = (libm::floor(t) as usize).min(self.table.len() - 1);
        let a = k as f64;
        let rest = integrate(|s| self.spec.rate(s), a, t, 1e-12, 1e-15, 10_000).map(|r| r.value).unwrap_or(f64::NAN);
        self.table[k] + rest
    }
}

/// A sampled latent duration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Duration {
    pub t: f64,
    /// The target hazard exceeded `H0(t_max)`; `t` is set to `t_max`.
    pub truncated: bool,
}

/// Inverts `v * phi * H0(t) = -ln(u)` for `t`, to absolute tolerance 1e-9.
pub fn sample_duration(hz: &HazardEvaluator, nu: f64, phi: f64, u: f64) -> Duration {
    let target = -libm::log(u) / (nu * phi);
    if !(target > 0.0) {
        return Duration { t: 0.0, truncated: false };
    }
    let t_max = hz.t_max();
    if hz.cumulative(t_max) < target {
        return Duration { t: t_max, truncated: true };
    }
    let (mut lo, mut hi) = (0.0, 1.0f64.min(t_max));
    while hz.cumulative(hi) < target {
        lo = hi;
        hi = (2.0 * hi).min(t_max);
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = hz.cumulative(t) - target;
        if libm::fabs(f) <= 1e-13 * target.max(1.0) {
            return Duration { t, truncated: false };
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo < 1e-9 {
            break;
        }
        let slope = hz.spec().rate(t);
        let newton = t - f / slope;
        t = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Duration { t: 0.5 * (lo + hi), truncated: false }
}

/// Frailty distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FrailtySpec {
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// `low` with probability `p_low`, otherwise `high`.
    TwoPoint {
        p_low: f64,
        low: f64,
        high: f64,
    },
}

impl FrailtySpec {
    fn validate(&self) -> Result<()> {
        match *self {
            FrailtySpec::Gamma { shape, rate } => crate::model::GammaParams::new(shape, rate).map(|_| ()),
            FrailtySpec::TwoPoint { p_low, low, high } => {
                if !(0.0..=1.0).contains(&p_low) {
                    return Err(Error::InvalidParameter { name: "p_low", value: p_low });
                }
                if !(low > 0.0 && high > 0.0) {
                    return Err(Error::InvalidParameter { name: "two-point support", value: low.min(high) });
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            FrailtySpec::Gamma { shape, rate } => {
                Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters").sample(rng)
            }
            FrailtySpec::TwoPoint { p_low, low, high } => {
                let u: f64 = rng.random();
                if u < p_low {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// How features map to the hazard multiplier.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FeatureModel {
    /// `exp(x . beta)`.
    Linear { beta: Vec<f64> },
    /// `exp(b1 x1 + b2 (x2 + c2)^2 + ln(b3 x3 + c3) + b4 x4)` with the
    /// logarithm's argument floored at `log_floor`.
    Nonlinear { beta: [f64; 4], c2: f64, c3: f64, log_floor: f64 },
}

impl FeatureModel {
    pub fn p(&self) -> usize {
        match self {
            FeatureModel::Linear { beta } => beta.len(),
            FeatureModel::Nonlinear { .. } => 4,
        }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        match self {
            FeatureModel::Linear { beta } => libm::exp(x.iter().zip(beta).map(|(a, b)| a * b).sum()),
            FeatureModel::Nonlinear { beta, c2, c3, log_floor } => {
                let shifted = x[1] + c2;
                let arg = (beta[2] * x[2] + c3).max(*log_floor);
                libm::exp(beta[0] * x[0] + beta[1] * shifted * shifted + libm::log(arg) + beta[3] * x[3])
            }
        }
    }
}

/// Distribution of each feature entry, drawn independently per spell.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CovariateLaw {
    StandardNormal,
    Uniform { low: f64, high: f64 },
}

impl CovariateLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            CovariateLaw::Uniform { low, high } if !(low < high && low.is_finite() && high.is_finite()) => {
                Err(Error::InvalidParameter { name: "covariate range", value: high - low })
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateLaw::StandardNormal => StandardNormal.sample(rng),
            CovariateLaw::Uniform { low, high } => {
                let u: f64 = rng.random();
                low + (high - low) * u
            }
        }
    }
}

/// Coefficients used by every estimation setup.
pub const ORACLE_BETA: [f64; 3] = [0.4, -1.0, 1.0];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub n: usize,
    pub spells: usize,
    pub hazard: HazardSpec,
    pub frailty: FrailtySpec,
    pub features: FeatureModel,
    pub covariates: CovariateLaw,
    pub psi: f64,
    pub y_max: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.spells == 0 {
            return Err(Error::InvalidInput(format!(
                "n and spells must be positive (n={}, spells={})",
                self.n, self.spells
            )));
        }
        if !(self.psi > 0.0 && self.psi.is_finite()) {
            return Err(Error::InvalidParameter { name: "psi", value: self.psi });
        }
        if crate::model::grid_cell(self.y_max, self.psi).map_or(true, |k| k == 0) {
            return Err(Error::OffGrid { row: 0, y: self.y_max, psi: self.psi });
        }
        self.hazard.validate()?;
        self.covariates.validate()?;
        self.frailty.validate()
    }

    /// Upper limit of the duration search.
    pub fn t_max(&self) -> f64 {
        10.0 * self.y_max
    }
}

/// Registered simulation setups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Setup {
    /// n=250, J=4, Gamma(1,1) frailty, log hazard.
    LogHazard,
    /// As setup 1 with the sqrt-sine hazard.
    SqrtSinHazard,
    /// As setup 1 with two-point frailty {0.5, 5}.
    TwoPointFrailty,
    /// As setup 1 with n=50, J=20.
    WidePanel,
    /// Nonlinear feature effect, n=300, J=4, four features.
    Nonlinear,
}

/// Default constants of the baseline hazards and the nonlinear feature map.
pub mod defaults {
    pub const LOG_HAZARD_C: f64 = 1.0;
    pub const SQRT_SIN_C1: f64 = 1.0;
    pub const SQRT_SIN_C2: f64 = 0.5;
    pub const NONLINEAR_C2: f64 = 0.5;
    pub const NONLINEAR_C3: f64 = 2.0;
    pub const NONLINEAR_BETA4: f64 = 0.5;
    pub const NONLINEAR_LOG_FLOOR: f64 = 1e-3;
    pub const Y_MAX: f64 = 80.0;
    pub const PSI: f64 = 1.0;
    pub const COVARIATES: super::CovariateLaw = super::CovariateLaw::Uniform { low: 0.0, high: 1.0 };
}

impl Setup {
    pub const ALL: [Setup; 5] =
        [Setup::LogHazard, Setup::SqrtSinHazard, Setup::TwoPointFrailty, Setup::WidePanel, Setup::Nonlinear];

    pub fn label(&self) -> &'static str {
        match self {
            Setup::LogHazard => "1",
            Setup::SqrtSinHazard => "2",
            Setup::TwoPointFrailty => "3",
            Setup::WidePanel => "4",
            Setup::Nonlinear => "nonlinear",
        }
    }

    pub fn from_label(s: &str) -> Option<Setup> {
        Setup::ALL.iter().copied().find(|x| x.label() == s)
    }

    pub fn config(&self, seed: u64) -> SimConfig {
        use defaults::*;
        let mut cfg = SimConfig {
            n: 250,
            spells: 4,
            hazard: HazardSpec::LogHazard { c: LOG_HAZARD_C },
            frailty: FrailtySpec::Gamma { shape: 1.0, rate: 1.0 },
            features: FeatureModel::Linear { beta: ORACLE_BETA.to_vec() },
            covariates: COVARIATES,
            psi: PSI,
            y_max: Y_MAX,
            seed,
        };
        match self {
            Setup::LogHazard => {}
            Setup::SqrtSinHazard => cfg.hazard = HazardSpec::SqrtSin { c1: SQRT_SIN_C1, c2: SQRT_SIN_C2 },
            Setup::TwoPointFrailty => cfg.frailty = FrailtySpec::TwoPoint { p_low: 0.5, low: 0.5, high: 5.0 },
            Setup::WidePanel => {
                cfg.n = 50;
                cfg.spells = 20;
            }
            Setup::Nonlinear => {
                cfg.n = 300;
                cfg.features = FeatureModel::Nonlinear {
                    beta: [ORACLE_BETA[0], ORACLE_BETA[1], ORACLE_BETA[2], NONLINEAR_BETA4],
                    c2: NONLINEAR_C2,
                    c3: NONLINEAR_C3,
                    log_floor: NONLINEAR_LOG_FLOOR,
                };
            }
        }
        cfg
    }
}

/// Generated panel with its latent quantities.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub dataset: PanelDataset,
    /// Frailty of each subject, in dataset order.
    pub frailty: Vec<f64>,
    /// Latent durations, per subject and spell.
    pub durations: Vec<Vec<Duration>>,
}

/// Zero-padded so that lexicographic order matches generation order.
fn subject_id(i: usize, n: usize) -> alloc::string::String {
    let width = n.to_string().len().max(6);
    format!("s{:0width$}", i + 1)
}

/// Random stream for subject `index` under `seed`.
pub fn subject_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed of bootstrap replicate `replicate`: the first word of stream
/// `replicate` under `seed`.
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    subject_rng(seed, replicate).next_u64()
}

pub fn generate(cfg: &SimConfig) -> Result<PanelDataset> {
    generate_detailed(cfg).map(|s| s.dataset)
}

pub fn generate_detailed(cfg: &SimConfig) -> Result<Simulated> {
    cfg.validate()?;
    let hz = HazardEvaluator::new(cfg.hazard, cfg.t_max())?;
    let draws: Vec<SubjectDraw> = (0..cfg.n).map(|i| generate_subject(cfg, &hz, i)).collect();
    assemble(cfg, draws)
}

/// One generated subject with its latent quantities.
#[derive(Clone, Debug)]
pub struct SubjectDraw {
    pub subject: Subject,
    pub frailty: f64,
    pub durations: Vec<Duration>,
}

/// Generates subject `index` from its own random stream. Subjects can be
/// produced in any order, or in parallel, and then passed to [`assemble`].
pub fn generate_subject(cfg: &SimConfig, hz: &HazardEvaluator, index: usize) -> SubjectDraw {
    let p = cfg.features.p();
    let mut rng = subject_rng(cfg.seed, index as u64);
    let nu = cfg.frailty.sample(&mut rng);
    let mut spells = Vec::with_capacity(cfg.spells);
    let mut durations = Vec::with_capacity(cfg.spells);
    for _ in 0..cfg.spells {
        let x: Vec<f64> = (0..p).map(|_| cfg.covariates.sample(&mut rng)).collect();
        let u: f64 = Open01.sample(&mut rng);
        let dur = sample_duration(hz, nu, cfg.features.phi(&x), u);
        let grouped = cfg.psi * libm::floor(dur.t / cfg.psi);
        let spell = if dur.truncated || grouped >= cfg.y_max {
            Spell::new(cfg.y_max, false, x)
        } else {
            Spell::new(grouped, true, x)
        };
        spells.push(spell);
        durations.push(dur);
    }
    SubjectDraw { subject: Subject { id: subject_id(index, cfg.n), spells }, frailty: nu, durations }
}

/// Builds the dataset from subject draws given in index order.
pub fn assemble(cfg: &SimConfig, draws: Vec<SubjectDraw>) -> Result<Simulated> {
    let mut subjects = Vec::with_capacity(draws.len());
    let mut frailty = Vec::with_capacity(draws.len());
    let mut durations = Vec::with_capacity(draws.len());
    for d in draws {
        subjects.push(d.subject);
        frailty.push(d.frailty);
        durations.push(d.durations);
    }
    let dataset = PanelDataset::new(cfg.psi, cfg.features.p(), subjects)?;
    Ok(Simulated { dataset, frailty, durations })
}

/// The generating model expressed as a fitted model on a grid of `cells`
/// increments. Requires Gamma frailty and linear features.
pub fn oracle_model(cfg: &SimConfig, cells: usize) -> Result<FittedModel> {
    let FeatureModel::Linear { beta } = &cfg.features else {
        return Err(Error::InvalidInput("oracle model needs linear features".into()));
    };
    let FrailtySpec::Gamma { shape, rate } = cfg.frailty else {
        return Err(Error::InvalidInput("oracle model needs Gamma frailty".into()));
    };
    let hz = HazardEvaluator::new(cfg.hazard, cells as f64 * cfg.psi + 1.0)?;
    let delta: Vec<f64> =
        (0..cells).map(|k| hz.cumulative((k + 1) as f64 * cfg.psi) - hz.cumulative(k as f64 * cfg.psi)).collect();
    Ok(FittedModel {
        psi: cfg.psi,
        beta: beta.clone(),
        free_mask: vec![true; cells],
        delta,
        alpha: shape,
        kappa: rate,
        loglik: f64::NAN,
        converged: true,
        iterations: 0,
        normalization: if shape == rate { Normalization::UnitMean } else { Normalization::FreeKappa },
        clamp_count: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = core::f64::consts::E;

    #[test]
    fn cumulative_hazard_examples() {
        let lh = HazardSpec::LogHazard { c: 1.0 };
        assert_eq!(cumulative_hazard(&lh, 0.0), 0.0);
        assert!((cumulative_hazard(&lh, E - 1.0) - 1.0).abs() < 1e-14);
        let quad = integrate(|s| lh.rate(s), 0.0, E - 1.0, 1e-14, 0.0, 1000).unwrap().value;
        assert!((quad - 1.0).abs() < 1e-13);
        let ss = HazardSpec::SqrtSin { c1: 1.0, c2: 0.5 };
        assert_eq!(cumulative_hazard(&ss, 0.0), 0.0);
    }

    #[test]
    fn log_hazard_series_matches_closed_form() {
        for &x in &[1e-6, 5e-4, 9.9e-4] {
            let direct = (1.0 + x) * libm::log1p(x) - x;
            assert!((log_hazard_integral(x) - direct).abs() <= 1e-9 * direct);
        }
        let lh = HazardSpec::LogHazard { c: 2.0 };
        let t = 1e-4;
        let quad = integrate(|s| lh.rate(s), 0.0, t, 1e-22, 1e-14, 1000).unwrap().value;
        assert!((cumulative_hazard(&lh, t) - quad).abs() <= 1e-12 * quad);
    }

    #[test]
    fn sqrt_sin_small_t_series() {
        // leading order c1 c2^2 (2/7) t^(7/2)
        let (c1, c2) = (1.3, 0.5);
        let ss = HazardSpec::SqrtSin { c1, c2 };
        let t: f64 = 1e-3;
        let series = c1 * c2 * c2 * (2.0 / 7.0) * t.powf(3.5);
        let direct = integrate(|s| ss.rate(s), 0.0, t, 1e-30, 1e-13, 1000).unwrap().value;
        assert!((direct - series).abs() <= 1e-6 * series);
        assert!((cumulative_hazard(&ss, t) - direct).abs() <= 1e-10);
    }

    #[test]
    fn evaluator_table_matches_direct_quadrature() {
        let ss = HazardSpec::SqrtSin { c1: 1.0, c2: 0.5 };
        let ev = HazardEvaluator::new(ss, 100.0).unwrap();
        for &t in &[0.3, 1.0, 7.25, 33.3, 79.999] {
            assert!((ev.cumulative(t) - cumulative_hazard(&ss, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn sample_duration_examples() {
        let ev = HazardEvaluator::new(HazardSpec::LogHazard { c: 1.0 }, 800.0).unwrap();
        let d = sample_duration(&ev, 1.0, 1.0, libm::exp(-1.0));
        assert!((d.t - (E - 1.0)).abs() < 1e-9);
        assert!(!d.truncated);
        assert!(sample_duration(&ev, 1.0, 1.0, 1.0 - 1e-15).t < 1e-5);
        let slow = sample_duration(&ev, 1.0, 1.0, 0.3).t;
        let fast = sample_duration(&ev, 2.0, 1.0, 0.3).t;
        assert!(fast < slow);
        let cut = sample_duration(&ev, 1e-9, 1e-9, 0.5);
        assert!(cut.truncated);
        assert_eq!(cut.t, 800.0);
    }

    #[test]
    fn sample_duration_sqrt_sin_inverts() {
        let ev = HazardEvaluator::new(HazardSpec::SqrtSin { c1: 1.0, c2: 0.5 }, 800.0).unwrap();
        for &u in &[0.9, 0.5, 0.1, 1e-3] {
            let d = sample_duration(&ev, 1.0, 0.7, u);
            let target = -libm::log(u) / 0.7;
            let lo = ev.cumulative(d.t - 1e-9);
            let hi = ev.cumulative(d.t + 1e-9);
            assert!(lo <= target + 1e-9 && hi >= target - 1e-9, "u={u} t={}", d.t);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = Setup::LogHazard.config(42);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = Setup::LogHazard.config(43);
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn grouping_and_censoring_identities() {
        for setup in Setup::ALL {
            let mut cfg = setup.config(7);
            cfg.n = 40;
            cfg.y_max = 12.0;
            let sim = generate_detailed(&cfg).unwrap();
            for (s, durs) in sim.dataset.subjects().iter().zip(&sim.durations) {
                for (sp, dur) in s.spells.iter().zip(durs) {
                    assert_eq!(sp.event, sp.y < cfg.y_max);
                    if sp.event {
                        assert!(sp.y <= dur.t && dur.t < sp.y + cfg.psi);
                    } else {
                        assert!(dur.t >= cfg.y_max);
                    }
                }
            }
        }
    }

    #[test]
    fn setup_one_has_events_and_censoring_mix() {
        let ds = generate(&Setup::LogHazard.config(2024)).unwrap();
        let events = ds.n_events();
        assert!(events > 0 && events < ds.n_spells());
        assert_eq!(ds.n_subjects(), 250);
        assert_eq!(ds.n_spells(), 1000);
    }

    #[test]
    fn replicate_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|r| replicate_seed(5, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(replicate_seed(5, 3), seeds[3]);
        assert_ne!(replicate_seed(6, 3), seeds[3]);
    }

    #[test]
    fn setup_registry() {
        let c = Setup::WidePanel.config(0);
        assert_eq!((c.n, c.spells), (50, 20));
        let c = Setup::TwoPointFrailty.config(0);
        assert_eq!(c.frailty, FrailtySpec::TwoPoint { p_low: 0.5, low: 0.5, high: 5.0 });
        let c = Setup::SqrtSinHazard.config(0);
        assert!(matches!(c.hazard, HazardSpec::SqrtSin { .. }));
        assert_eq!(Setup::Nonlinear.config(0).features.p(), 4);
        for s in Setup::ALL {
            assert_eq!(Setup::from_label(s.label()), Some(s));
        }
    }

    #[test]
    fn invalid_configs() {
        let mut c = Setup::LogHazard.config(0);
        c.y_max = 10.5;
        assert!(generate(&c).is_err());
        let mut c = Setup::LogHazard.config(0);
        c.n = 0;
        assert!(generate(&c).is_err());
    }

    #[test]
    fn nonlinear_phi_is_positive() {
        let f = Setup::Nonlinear.config(0).features;
        assert!(f.phi(&[0.0, 0.0, -10.0, 0.0]) > 0.0);
        let v = f.phi(&[1.0, -0.5, 0.0, 0.0]);
        assert!((v - libm::exp(0.4) * 2.0).abs() < 1e-12);
    }
}
