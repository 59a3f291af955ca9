//! Survival prediction from a fitted model, Harrell's concordance index and
//! an integrated Brier score.
//!
//! Predictions for a spell condition on the spells of the same subject that
//! precede it. Survival at grid time `k psi` is `P(y >= k psi)`, so the Brier
//! score compares it with the indicator `1{y >= tau}`.

use alloc::format;
use alloc::vec::Vec;

use crate::chain::{posterior_update, xi_for_cell};
use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::model::{grid_cell, DiscreteBaselineHazard, GammaParams, LinearTransform, PanelDataset, Spell};

/// Marginal survival on the grid `0, psi, ..., len * psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub grid: Vec<f64>,
    pub survival: Vec<f64>,
}

impl SurvivalCurve {
    /// Constant curve, for reference predictors.
    pub fn constant(psi: f64, len: usize, value: f64) -> Self {
        SurvivalCurve { grid: (0..=len).map(|k| k as f64 * psi).collect(), survival: alloc::vec![value; len + 1] }
    }
}

/// A fitted model prepared for repeated prediction.
#[derive(Clone, Debug)]
pub struct Predictor {
    transform: LinearTransform,
    hazard: DiscreteBaselineHazard,
    prior: GammaParams,
}

impl Predictor {
    pub fn new(model: &FittedModel) -> Result<Self> {
        model.validate()?;
        Ok(Predictor { transform: model.transform(), hazard: model.hazard()?, prior: model.prior()? })
    }

    pub fn hazard(&self) -> &DiscreteBaselineHazard {
        &self.hazard
    }

    fn phi(&self, x: &[f64]) -> Result<f64> {
        let phi = self.transform.transform(x)?;
        if phi.is_finite() && phi >= 0.0 {
            Ok(phi)
        } else {
            Err(Error::NonFinitePrediction { phi })
        }
    }

    /// Frailty posterior after `history`. Outcomes past the model grid are
    /// treated as outcomes at its end.
    pub fn posterior(&self, history: &[Spell]) -> Result<GammaParams> {
        let psi = self.hazard.interval();
        let mut state = self.prior;
        for sp in history {
            let phi = self.phi(&sp.x)?;
            let cell = grid_cell(sp.y, psi).ok_or(Error::OffGrid { row: 0, y: sp.y, psi })?;
            let xp = xi_for_cell(state, phi, cell.min(self.hazard.len()), &self.hazard)?;
            state = posterior_update(state, xp, sp.event);
        }
        Ok(state)
    }

    pub fn survival(&self, x: &[f64], history: &[Spell]) -> Result<SurvivalCurve> {
        let phi = self.phi(x)?;
        let state = self.posterior(history)?;
        let psi = self.hazard.interval();
        let cum = self.hazard.cumulative();
        Ok(SurvivalCurve {
            grid: (0..cum.len()).map(|k| k as f64 * psi).collect(),
            survival: cum.iter().map(|s| survivor(state, phi, *s)).collect(),
        })
    }

    /// `phi(x)` times the posterior mean frailty.
    pub fn risk_score(&self, x: &[f64], history: &[Spell]) -> Result<f64> {
        let state = self.posterior(history)?;
        Ok(self.phi(x)? * state.mean())
    }
}

fn survivor(state: GammaParams, phi: f64, s: f64) -> f64 {
    libm::exp(-state.shape * libm::log1p(phi * s / state.rate))
}

pub fn predict_survival(model: &FittedModel, x: &[f64], history: &[Spell]) -> Result<SurvivalCurve> {
    Predictor::new(model)?.survival(x, history)
}

pub fn risk_score(model: &FittedModel, x: &[f64], history: &[Spell]) -> Result<f64> {
    Predictor::new(model)?.risk_score(x, history)
}

/// Risk scores, outcomes and event flags of every spell in `ds`, in dataset
/// order, each conditioned on its subject's earlier spells.
pub fn spell_scores(model: &FittedModel, ds: &PanelDataset) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let pred = Predictor::new(model)?;
    let mut scores = Vec::with_capacity(ds.n_spells());
    for s in ds.subjects() {
        for j in 0..s.spells.len() {
            scores.push(pred.risk_score(&s.spells[j].x, &s.spells[..j])?);
        }
    }
    let y = ds.spells().map(|s| s.y).collect();
    let d = ds.spells().map(|s| s.event).collect();
    Ok((scores, y, d))
}

/// Harrell's concordance. A pair is comparable when the shorter outcome is an
/// event; tied scores earn half credit.
pub fn c_index(scores: &[f64], y: &[f64], d: &[bool]) -> Result<f64> {
    if scores.len() != y.len() || y.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: if y.len() != scores.len() { y.len() } else { d.len() },
        });
    }
    let mut pairs = 0u64;
    let mut credit = 0u64; // in half units
    for i in 0..y.len() {
        if !d[i] {
            continue;
        }
        for j in 0..y.len() {
            if y[i] < y[j] {
                pairs += 1;
                credit += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    if pairs == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(credit as f64 / (2 * pairs) as f64)
}

/// Scores every spell as if it were the subject's first, `phi(x) alpha / kappa`.
pub fn marginal_scores(model: &FittedModel, ds: &PanelDataset) -> Result<Vec<f64>> {
    let pred = Predictor::new(model)?;
    ds.spells().map(|sp| pred.risk_score(&sp.x, &[])).collect()
}

/// Test-set concordance of a fitted model, scoring each spell given its
/// subject's earlier spells.
pub fn concordance(model: &FittedModel, ds: &PanelDataset) -> Result<f64> {
    let (s, y, d) = spell_scores(model, ds)?;
    c_index(&s, &y, &d)
}

/// Test-set concordance of the covariate effect alone.
pub fn marginal_concordance(model: &FittedModel, ds: &PanelDataset) -> Result<f64> {
    let s = marginal_scores(model, ds)?;
    let y: Vec<f64> = ds.spells().map(|sp| sp.y).collect();
    let d: Vec<bool> = ds.spells().map(|sp| sp.event).collect();
    c_index(&s, &y, &d)
}

/// Integrated Brier score of arbitrary curves, one per spell.
///
/// At each `tau = k psi` for `k = 1..=horizon/psi`, events contribute
/// `(1{y >= tau} - S(tau))^2` and censored spells contribute `(1 - S(tau))^2`
/// while `tau <= y`. Times with no contributors are skipped; the rest are
/// averaged by the trapezoid rule.
pub fn integrated_brier_curves(curves: &[SurvivalCurve], y: &[f64], d: &[bool], psi: f64, horizon: f64) -> Result<f64> {
    if curves.len() != y.len() || y.len() != d.len() {
        return Err(Error::DimensionMismatch { expected: curves.len(), found: y.len() });
    }
    let cells = grid_cell(horizon, psi).ok_or(Error::OffGrid { row: 0, y: horizon, psi })?;
    if cells == 0 {
        return Err(Error::InvalidInput("horizon must be at least one interval".into()));
    }
    if let Some(c) = curves.iter().find(|c| c.survival.len() <= cells) {
        return Err(Error::BeyondGrid { cell: cells, len: c.survival.len() - 1 });
    }
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(cells);
    for k in 1..=cells {
        let tau = k as f64 * psi;
        let mut sum = 0.0;
        let mut count = 0usize;
        for ((c, &yi), &di) in curves.iter().zip(y).zip(d) {
            let at_risk = grid_cell(yi, psi).is_some_and(|cy| cy >= k);
            if !di && !at_risk {
                continue;
            }
            let truth = if at_risk { 1.0 } else { 0.0 };
            let e = truth - c.survival[k];
            sum += e * e;
            count += 1;
        }
        if count > 0 {
            points.push((tau, sum / count as f64));
        }
    }
    match points.as_slice() {
        [] => Err(Error::InvalidInput(format!("no spell contributes to the Brier score up to {horizon}"))),
        [(_, b)] => Ok(*b),
        pts => {
            let area: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
            Ok(area / (pts[pts.len() - 1].0 - pts[0].0))
        }
    }
}

/// Predicted curve of every spell in `ds`, conditioned on earlier spells.
pub fn spell_curves(model: &FittedModel, ds: &PanelDataset) -> Result<Vec<SurvivalCurve>> {
    let pred = Predictor::new(model)?;
    let mut curves = Vec::with_capacity(ds.n_spells());
    for s in ds.subjects() {
        for j in 0..s.spells.len() {
            curves.push(pred.survival(&s.spells[j].x, &s.spells[..j])?);
        }
    }
    Ok(curves)
}

/// Integrated Brier score of a fitted model on a test set, up to `horizon`.
pub fn integrated_brier(model: &FittedModel, ds: &PanelDataset, horizon: f64) -> Result<f64> {
    if ds.n_spells() == 0 {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let curves = spell_curves(model, ds)?;
    let y: Vec<f64> = ds.outcomes();
    let d: Vec<bool> = ds.spells().map(|s| s.event).collect();
    integrated_brier_curves(&curves, &y, &d, model.psi, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Normalization;
    use alloc::vec;
    use proptest::prelude::*;

    fn model(beta: Vec<f64>, delta: Vec<f64>, alpha: f64, kappa: f64) -> FittedModel {
        let len = delta.len();
        FittedModel {
            psi: 1.0,
            beta,
            delta,
            free_mask: vec![true; len],
            alpha,
            kappa,
            loglik: f64::NAN,
            converged: true,
            iterations: 0,
            normalization: if alpha == kappa { Normalization::UnitMean } else { Normalization::FreeKappa },
            clamp_count: 0,
        }
    }

    #[test]
    fn survival_examples() {
        let m = model(vec![0.0], vec![1.0], 1.0, 1.0);
        let c = predict_survival(&m, &[0.3], &[]).unwrap();
        assert_eq!(c.survival[0], 1.0);
        assert!((c.survival[1] - 0.5).abs() < 1e-15);
        assert_eq!(c.grid, vec![0.0, 1.0]);
        let censored = [Spell::new(1.0, false, vec![0.0])];
        let after = predict_survival(&m, &[0.3], &censored).unwrap();
        assert!(after.survival[1] > c.survival[1]);
        assert!(predict_survival(&m, &[0.3, 1.0], &[]).is_err());
    }

    #[test]
    fn risk_score_examples() {
        let m = model(vec![0.0, 0.0], vec![0.5, 0.5, 0.5], 2.0, 2.0);
        assert!((risk_score(&m, &[3.0, -1.0], &[]).unwrap() - 1.0).abs() < 1e-15);
        let m = model(vec![libm::log(2.0)], vec![0.5, 0.5, 0.5], 2.0, 2.0);
        let base = risk_score(&m, &[0.0], &[]).unwrap();
        assert!((risk_score(&m, &[1.0], &[]).unwrap() - 2.0 * base).abs() < 1e-14);
        // one event in the first cell: prior Gamma(2, 2), phi = 1, xi = 2,
        // xi' = 2.5, eps = 0.2
        let hist = [Spell::new(0.0, true, vec![0.0])];
        let after = risk_score(&m, &[0.0], &hist).unwrap();
        let g = crate::chain::moment_matched_closed_form(2.0, 2.0, 0.2);
        assert!((after - g.shape / g.rate).abs() < 1e-14);
        assert!(after > base);
    }

    #[test]
    fn c_index_examples() {
        let y = [1.0, 2.0, 3.0];
        let d = [true; 3];
        assert_eq!(c_index(&[3.0, 2.0, 1.0], &y, &d).unwrap(), 1.0);
        assert_eq!(c_index(&[1.0, 1.0, 1.0], &y, &d).unwrap(), 0.5);
        assert!((c_index(&[3.0, 1.0, 2.0], &y, &d).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c_index(&[1.0, 2.0], &[1.0, 2.0], &[false, false]).unwrap_err(), Error::NoComparablePairs);
        assert!(c_index(&[1.0], &[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn brier_examples() {
        let ones = vec![SurvivalCurve::constant(1.0, 3, 1.0); 2];
        assert_eq!(integrated_brier_curves(&ones, &[3.0, 5.0], &[true, false], 1.0, 3.0).unwrap(), 0.0);
        let b = integrated_brier_curves(&ones, &[0.0, 0.0], &[true, true], 1.0, 3.0).unwrap();
        assert_eq!(b, 1.0);
        assert!(integrated_brier_curves(&ones, &[0.0, 0.0], &[false, false], 1.0, 3.0).is_err());
        assert!(integrated_brier_curves(&ones, &[0.0, 0.0], &[true, true], 1.0, 4.0).is_err());
    }

    #[test]
    fn brier_two_subjects_by_hand() {
        // alpha = kappa = 1, delta = [0.5, 1, 1], beta = 1.
        // subject a: x = 0, event at y = 1; subject b: x = ln 2, censored at y = 2.
        // S_a = [1, 1/1.5, 1/2.5, 1/3.5], S_b = [1, 1/2, 1/4, 1/6].
        // tau = 1: a (1 - 1/1.5)^2 = 1/9, b (1 - 1/2)^2 = 1/4.
        // tau = 2: a (0 - 1/2.5)^2 = 4/25, b (1 - 1/4)^2 = 9/16.
        // tau = 3: a (0 - 1/3.5)^2 = 4/49; b censored before tau.
        let m = model(vec![1.0], vec![0.5, 1.0, 1.0], 1.0, 1.0);
        let ds = PanelDataset::new(
            1.0,
            1,
            vec![
                crate::model::Subject { id: "a".into(), spells: vec![Spell::new(1.0, true, vec![0.0])] },
                crate::model::Subject { id: "b".into(), spells: vec![Spell::new(2.0, false, vec![libm::log(2.0)])] },
            ],
        )
        .unwrap();
        let b1 = (1.0 / 9.0 + 0.25) / 2.0;
        let b2 = (4.0 / 25.0 + 9.0 / 16.0) / 2.0;
        let b3 = 4.0 / 49.0;
        let expected = (0.5 * (b1 + b2) + 0.5 * (b2 + b3)) / 2.0;
        let got = integrated_brier(&m, &ds, 3.0).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        assert!((integrated_brier(&m, &ds, 1.0).unwrap() - b1).abs() < 1e-14);
    }

    #[test]
    fn history_past_grid_is_clamped() {
        let m = model(vec![0.0], vec![0.5, 0.5], 1.0, 1.0);
        let hist = [Spell::new(9.0, false, vec![0.0]), Spell::new(7.0, true, vec![0.0])];
        let s = risk_score(&m, &[0.0], &hist).unwrap();
        // censored at the grid end: rate 1 + 1; the tail event adds S = 1 again
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn overflowing_feature_effect_is_an_error() {
        let m = model(vec![900.0], vec![0.5, 0.5], 1.0, 1.0);
        assert!(matches!(risk_score(&m, &[1.0], &[]), Err(Error::NonFinitePrediction { .. })));
        assert!(predict_survival(&m, &[1.0], &[]).is_err());
        let hist = [Spell::new(0.0, true, vec![1.0])];
        assert!(risk_score(&m, &[0.0], &hist).is_err());
        assert!(risk_score(&m, &[-1.0], &[]).is_ok());
    }

    #[test]
    fn marginal_scores_ignore_history() {
        let m = model(vec![1.0], vec![0.5, 0.5], 2.0, 2.0);
        let ds = PanelDataset::new(
            1.0,
            1,
            vec![crate::model::Subject {
                id: "a".into(),
                spells: vec![Spell::new(0.0, true, vec![0.0]), Spell::new(1.0, false, vec![0.5])],
            }],
        )
        .unwrap();
        let s = marginal_scores(&m, &ds).unwrap();
        assert_eq!(s, vec![1.0, libm::exp(0.5)]);
        let (h, _, _) = spell_scores(&m, &ds).unwrap();
        assert_eq!(h[0], s[0]);
        assert!(h[1] > s[1]);
    }

    proptest! {
        #[test]
        fn c_index_order_invariance(
            data in proptest::collection::vec((0u8..20, any::<bool>(), -5.0f64..5.0), 2..40),
        ) {
            let y: Vec<f64> = data.iter().map(|t| t.0 as f64).collect();
            let d: Vec<bool> = data.iter().map(|t| t.1).collect();
            let s: Vec<f64> = data.iter().map(|t| t.2).collect();
            let Ok(c) = c_index(&s, &y, &d) else { return Ok(()) };
            let t: Vec<f64> = s.iter().map(|v| libm::exp(2.0 * v) + 3.0).collect();
            prop_assert_eq!(c, c_index(&t, &y, &d).unwrap());
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).all(|w| w[0] != w[1]) {
                let neg: Vec<f64> = s.iter().map(|v| -v).collect();
                prop_assert!((c + c_index(&neg, &y, &d).unwrap() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn survival_monotone_in_time_and_increments(
            delta in proptest::collection::vec(0.0f64..2.0, 1..12),
            alpha in 0.1f64..5.0,
            x in -2.0f64..2.0,
            k in 0usize..12,
            bump in 0.01f64..1.0,
        ) {
            let m = model(vec![0.7], delta.clone(), alpha, alpha);
            let c = predict_survival(&m, &[x], &[]).unwrap();
            prop_assert!(c.survival.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(c.survival.iter().all(|&s| s > 0.0 && s <= 1.0));
            let k = k % delta.len();
            let mut bumped = delta.clone();
            bumped[k] += bump;
            let b = predict_survival(&model(vec![0.7], bumped, alpha, alpha), &[x], &[]).unwrap();
            for t in 0..c.survival.len() {
                if t > k {
                    prop_assert!(b.survival[t] < c.survival[t]);
                } else {
                    prop_assert_eq!(b.survival[t], c.survival[t]);
                }
            }
        }
    }
}
