//! Domain types of the mixed proportional-hazards model.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative tolerance used when checking that an outcome lies on the grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Shape/rate parameterisation of a Gamma distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidParameter { name: "shape", value: shape });
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter { name: "rate", value: rate });
        }
        Ok(GammaParams { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// First two raw moments `(E[v], E[v^2])`.
    pub fn raw_moments(&self) -> (f64, f64) {
        let m1 = self.shape / self.rate;
        (m1, self.shape * (self.shape + 1.0) / (self.rate * self.rate))
    }
}

/// Grid index of an outcome `y`, if it is a non-negative multiple of `psi`.
pub fn grid_cell(y: f64, psi: f64) -> Option<usize> {
    if !(y.is_finite() && y >= -GRID_TOLERANCE * psi) {
        return None;
    }
    let k = libm::round(y / psi);
    if libm::fabs(y - k * psi) <= GRID_TOLERANCE * psi && k >= 0.0 {
        Some(k as usize)
    } else {
        None
    }
}

/// Piecewise-constant cumulative baseline hazard on a grid of width `interval`.
///
/// `increments[k]` holds the hazard mass of cell `k + 1`, i.e. of
/// `[k * interval, (k + 1) * interval)`. Past the last cell the increment is
/// infinite, so nothing survives beyond the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteBaselineHazard {
    interval: f64,
    increments: Vec<f64>,
    free_mask: Vec<bool>,
    cumulative: Vec<f64>,
}

impl DiscreteBaselineHazard {
    pub fn new(interval: f64, increments: Vec<f64>, free_mask: Vec<bool>) -> Result<Self> {
        if !(interval.is_finite() && interval > 0.0) {
            return Err(Error::InvalidParameter { name: "interval", value: interval });
        }
        if increments.len() != free_mask.len() {
            return Err(Error::DimensionMismatch { expected: free_mask.len(), found: increments.len() });
        }
        for (&v, &free) in increments.iter().zip(&free_mask) {
            if !(v.is_finite() && v >= 0.0) || (!free && v != 0.0) {
                return Err(Error::InvalidParameter { name: "increment", value: v });
            }
        }
        let cumulative = prefix_sums(&increments);
        // Re-derive increments from the stored prefix sums so that the two
        // representations agree bit-for-bit.
        let increments = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(DiscreteBaselineHazard { interval, increments, free_mask, cumulative })
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    /// Number of finite grid cells.
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free_mask
    }

    /// Prefix sums with `cumulative()[0] == 0`; length `len() + 1`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Sum of the first `cells` increments, or `None` past the grid.
    pub fn cumulative_at(&self, cells: usize) -> Option<f64> {
        self.cumulative.get(cells).copied()
    }

    /// Positions of the estimable increments.
    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.free_mask.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }

    pub fn free_count(&self) -> usize {
        self.free_mask.iter().filter(|&&f| f).count()
    }

    /// Replaces the free increments (in grid order), keeping masked ones at zero.
    pub fn with_free_increments(&self, values: &[f64]) -> Result<Self> {
        let free = self.free_count();
        if values.len() != free {
            return Err(Error::DimensionMismatch { expected: free, found: values.len() });
        }
        let mut increments = vec![0.0; self.len()];
        for (slot, &v) in self.free_indices().zip(values) {
            increments[slot] = v;
        }
        Self::new(self.interval, increments, self.free_mask.clone())
    }

    /// Multiplies every increment by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let inc = self.increments.iter().map(|v| v * c).collect();
        Self::new(self.interval, inc, self.free_mask.clone())
    }
}

fn prefix_sums(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for &v in increments {
        acc += v;
        out.push(acc);
    }
    out
}

/// Builds the baseline grid structure from the observed outcomes.
///
/// The cell `[(k-1)psi, k psi)` is estimable iff it contains an observed
/// outcome; all other increments are pinned at zero. The grid runs up to the
/// cell holding the largest outcome. Free increments start at zero and are set
/// by the estimator.
pub fn build_baseline(psi: f64, observed_ys: &[f64]) -> Result<DiscreteBaselineHazard> {
    let cells = observed_ys
        .iter()
        .enumerate()
        .map(|(row, &y)| grid_cell(y, psi).ok_or(Error::OffGrid { row, y, psi }))
        .collect::<Result<Vec<_>>>()?;
    let len = cells.iter().map(|c| c + 1).max().unwrap_or(0);
    let mut mask = vec![false; len];
    for c in cells {
        mask[c] = true;
    }
    DiscreteBaselineHazard::new(psi, vec![0.0; len], mask)
}

/// Baseline grid for a dataset, trimmed to the increments the likelihood uses.
///
/// A censored spell at cell `c` needs increments `1..=c`; an event spell also
/// needs increment `c + 1`. Cells beyond the largest such index never enter any
/// likelihood term and are dropped.
pub fn baseline_for_dataset(ds: &PanelDataset) -> DiscreteBaselineHazard {
    let psi = ds.psi();
    let spells = || ds.subjects().iter().flat_map(|s| s.spells.iter());
    let len = spells().map(|sp| sp.cell(psi) + usize::from(sp.event)).max().unwrap_or(0);
    let mut mask = vec![false; len];
    for sp in spells() {
        let c = sp.cell(psi);
        if c < len {
            mask[c] = true;
        }
    }
    let inc = vec![0.0; len];
    DiscreteBaselineHazard { interval: psi, cumulative: prefix_sums(&inc), increments: inc, free_mask: mask }
}

/// Feature transform `x -> exp(x . beta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTransform {
    pub coefficients: Vec<f64>,
}

impl LinearTransform {
    pub fn new(coefficients: Vec<f64>) -> Self {
        LinearTransform { coefficients }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch { expected: self.coefficients.len(), found: x.len() });
        }
        Ok(x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    pub fn transform(&self, x: &[f64]) -> Result<f64> {
        Ok(libm::exp(self.linear_predictor(x)?))
    }
}

/// One grouped spell: outcome `y` (a grid multiple), event flag, and features.
#[derive(Clone, Debug, PartialEq)]
pub struct Spell {
    pub y: f64,
    pub event: bool,
    pub x: Vec<f64>,
}

impl Spell {
    pub fn new(y: f64, event: bool, x: Vec<f64>) -> Self {
        Spell { y, event, x }
    }

    /// Grid index `y / psi`. Assumes `y` is already on the grid.
    pub fn cell(&self, psi: f64) -> usize {
        libm::round(self.y / psi) as usize
    }

    pub fn d(&self) -> u8 {
        u8::from(self.event)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subject {
    pub id: String,
    pub spells: Vec<Spell>,
}

/// Validated panel of subjects, each with spells in observation order.
///
/// Subjects are kept sorted by id so that every downstream reduction runs in a
/// canonical order regardless of how the input was arranged.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelDataset {
    psi: f64,
    p: usize,
    subjects: Vec<Subject>,
}

impl PanelDataset {
    pub fn new(psi: f64, p: usize, mut subjects: Vec<Subject>) -> Result<Self> {
        if !(psi.is_finite() && psi > 0.0) {
            return Err(Error::InvalidParameter { name: "psi", value: psi });
        }
        let mut row = 0;
        for s in subjects.iter_mut() {
            for sp in s.spells.iter_mut() {
                if sp.x.len() != p {
                    return Err(Error::DimensionMismatch { expected: p, found: sp.x.len() });
                }
                if sp.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(alloc::format!("non-finite feature in row {row}")));
                }
                let k = grid_cell(sp.y, psi).ok_or(Error::OffGrid { row, y: sp.y, psi })?;
                sp.y = k as f64 * psi;
                row += 1;
            }
        }
        subjects.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = subjects.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidInput(alloc::format!("duplicate subject id `{}`", w[0].id)));
        }
        Ok(PanelDataset { psi, p, subjects })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_spells(&self) -> usize {
        self.subjects.iter().map(|s| s.spells.len()).sum()
    }

    pub fn n_events(&self) -> usize {
        self.spells().filter(|s| s.event).count()
    }

    pub fn spells(&self) -> impl Iterator<Item = &Spell> {
        self.subjects.iter().flat_map(|s| s.spells.iter())
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.spells().map(|s| s.y).collect()
    }

    /// Splits by subject position: the first `n_first` subjects and the rest.
    pub fn split_at(&self, n_first: usize) -> (PanelDataset, PanelDataset) {
        let n_first = n_first.min(self.subjects.len());
        let (a, b) = self.subjects.split_at(n_first);
        (
            PanelDataset { psi: self.psi, p: self.p, subjects: a.to_vec() },
            PanelDataset { psi: self.psi, p: self.p, subjects: b.to_vec() },
        )
    }

    /// Returns a copy with feature column `col` multiplied by `c`.
    pub fn with_scaled_feature(&self, col: usize, c: f64) -> PanelDataset {
        let mut out = self.clone();
        for s in out.subjects.iter_mut() {
            for sp in s.spells.iter_mut() {
                sp.x[col] *= c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn transform_examples() {
        let lt = LinearTransform::new(vec![0.0, 0.0, 0.0]);
        assert_eq!(lt.transform(&[5.0, -2.0, 7.0]).unwrap(), 1.0);
        assert_eq!(LinearTransform::new(vec![1.0]).transform(&[0.0]).unwrap(), 1.0);
        let v = LinearTransform::new(vec![0.4, -1.0, 1.0]).transform(&[1.0, 1.0, 1.0]).unwrap();
        assert!((v - 1.491_824_698).abs() < 1e-9);
    }

    #[test]
    fn transform_dimension_mismatch() {
        let err = LinearTransform::new(vec![1.0, 2.0]).transform(&[1.0]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn baseline_examples() {
        let hz = build_baseline(1.0, &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(hz.free_mask(), &[true, false, true]);
        assert!(build_baseline(1.0, &[]).unwrap().is_empty());
        let hz = build_baseline(2.0, &[0.0, 2.0, 4.0, 4.0]).unwrap();
        assert_eq!(hz.free_mask(), &[true, true, true]);
    }

    #[test]
    fn baseline_rejects_off_grid() {
        let err = build_baseline(1.0, &[0.0, 1.5]).unwrap_err();
        assert_eq!(err, Error::OffGrid { row: 1, y: 1.5, psi: 1.0 });
    }

    #[test]
    fn grid_snapping_tolerance() {
        assert_eq!(grid_cell(3.0 + 1e-12, 1.0), Some(3));
        assert_eq!(grid_cell(0.3 * 3.0, 0.3), Some(3));
        assert_eq!(grid_cell(1.0 + 1e-6, 1.0), None);
        assert_eq!(grid_cell(-1.0, 1.0), None);
    }

    #[test]
    fn dataset_grid_trims_unused_tail() {
        let sub = |id: &str, spells| Subject { id: id.to_string(), spells };
        let ds = PanelDataset::new(
            1.0,
            1,
            vec![
                sub("a", vec![Spell::new(2.0, true, vec![0.0]), Spell::new(5.0, false, vec![0.0])]),
                sub("b", vec![Spell::new(0.0, true, vec![0.0])]),
            ],
        )
        .unwrap();
        let hz = baseline_for_dataset(&ds);
        assert_eq!(hz.free_mask(), &[true, false, true, false, false]);
    }

    #[test]
    fn dataset_sorts_subjects_and_rejects_duplicates() {
        let s = |id: &str| Subject { id: id.to_string(), spells: vec![Spell::new(0.0, true, vec![1.0])] };
        let ds = PanelDataset::new(1.0, 1, vec![s("b"), s("a")]).unwrap();
        assert_eq!(ds.subjects()[0].id, "a");
        assert!(PanelDataset::new(1.0, 1, vec![s("a"), s("a")]).is_err());
    }

    #[test]
    fn masked_increment_must_be_zero() {
        assert!(DiscreteBaselineHazard::new(1.0, vec![1.0, 0.5], vec![true, false]).is_err());
        assert!(DiscreteBaselineHazard::new(1.0, vec![1.0, -0.5], vec![true, true]).is_err());
    }

    proptest! {
        #[test]
        fn transform_is_multiplicative_over_blocks(
            b1 in proptest::collection::vec(-2.0f64..2.0, 1..5),
            b2 in proptest::collection::vec(-2.0f64..2.0, 1..5),
            seed in proptest::collection::vec(-2.0f64..2.0, 10),
        ) {
            let x1: Vec<f64> = seed[..b1.len()].to_vec();
            let x2: Vec<f64> = seed[5..5 + b2.len()].to_vec();
            let whole = LinearTransform::new([b1.clone(), b2.clone()].concat())
                .transform(&[x1.clone(), x2.clone()].concat()).unwrap();
            let parts = LinearTransform::new(b1).transform(&x1).unwrap()
                * LinearTransform::new(b2).transform(&x2).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs());
        }

        #[test]
        fn baseline_is_permutation_invariant(mut ks in proptest::collection::vec(0usize..30, 0..40), rot in 0usize..40) {
            let ys: Vec<f64> = ks.iter().map(|&k| k as f64 * 0.5).collect();
            let a = build_baseline(0.5, &ys).unwrap();
            if !ks.is_empty() {
                let r = rot % ks.len();
                ks.rotate_left(r);
                ks.reverse();
            }
            let ys: Vec<f64> = ks.iter().map(|&k| k as f64 * 0.5).collect();
            prop_assert_eq!(a, build_baseline(0.5, &ys).unwrap());
        }

        #[test]
        fn cumulative_differences_are_increments(inc in proptest::collection::vec(0.0f64..3.0, 0..50)) {
            let mask = vec![true; inc.len()];
            let hz = DiscreteBaselineHazard::new(1.0, inc.clone(), mask).unwrap();
            let c = hz.cumulative();
            prop_assert_eq!(c[0], 0.0);
            for k in 1..c.len() {
                prop_assert!(c[k] >= c[k - 1]);
                prop_assert_eq!(c[k] - c[k - 1], hz.increments()[k - 1]);
                prop_assert!((hz.increments()[k - 1] - inc[k - 1]).abs() <= 1e-15 * c[k].max(1.0));
            }
        }
    }
}
