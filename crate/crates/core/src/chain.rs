//! Sequential Gamma approximation of the posterior frailty.
//!
//! After a censored spell the posterior is exactly `Gamma(shape, xi)`. After an
//! event it is a difference of two Gamma kernels, which is replaced by the
//! Gamma distribution with the same first two raw moments. Writing
//! `q = 1 - eps` and `A(m) = 1 - q^m`, the matched parameters are
//!
//! ```text
//! shape' = shape * A(a+1)^2      / (A(a) A(a+2) - a q^a eps^2)
//! rate'  = xi    * A(a) A(a+1)   / (A(a) A(a+2) - a q^a eps^2)
//! ```
//!
//! with the limits `(shape + 1, (xi + xi') / 2)` as `eps -> 0` and
//! `(shape, xi)` as `eps -> 1`, which are used directly near the ends of the
//! unit interval where the closed forms lose precision.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{one_minus_pow_one_minus, pow_one_minus, Real};
use crate::model::{grid_cell, DiscreteBaselineHazard, GammaParams, LinearTransform, Spell};
use crate::quadrature::{gamma_q, integrate};

/// Below this `eps` the small-difference limit is used.
pub const SMALL_EPS: f64 = 1e-4;
/// Above this `eps` the large-difference limit is used.
pub const LARGE_EPS: f64 = 1.0 - 1e-8;

/// Rates entering the posterior kernel of one spell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiPair {
    /// `rate + phi * S(y)`.
    pub xi: f64,
    /// `rate + phi * S(y + psi)`; infinite for an event in the last grid cell.
    pub xi_prime: f64,
    /// `(xi_prime - xi) / xi_prime`, in `[0, 1]`.
    pub epsilon: f64,
    /// The event term would need the increment past the grid, which is infinite.
    pub tail: bool,
}

/// Computes `xi`, `xi'` and `eps` for an outcome at grid cell `cell`.
pub fn xi_for_cell(prior: GammaParams, phi: f64, cell: usize, hz: &DiscreteBaselineHazard) -> Result<XiPair> {
    let s = hz.cumulative_at(cell).ok_or(Error::BeyondGrid { cell, len: hz.len() })?;
    let xi = prior.rate + phi * s;
    match hz.increments().get(cell) {
        Some(&delta) => {
            let gap = phi * delta;
            let xi_prime = xi + gap;
            Ok(XiPair { xi, xi_prime, epsilon: gap / xi_prime, tail: false })
        }
        None => Ok(XiPair { xi, xi_prime: f64::INFINITY, epsilon: 1.0, tail: true }),
    }
}

/// Computes `xi`, `xi'` and `eps` for a grouped outcome `y`.
pub fn compute_xi(prior: GammaParams, phi: f64, y: f64, hz: &DiscreteBaselineHazard) -> Result<XiPair> {
    let cell = grid_cell(y, hz.interval()).ok_or(Error::OffGrid { row: 0, y, psi: hz.interval() })?;
    xi_for_cell(prior, phi, cell, hz)
}

/// Posterior shape and rate after one spell, generic so that it can be
/// differentiated. `xi_gap` is `xi' - xi`; `tail` marks an infinite gap.
pub(crate) fn update<T: Real>(shape: T, xi: T, xi_gap: T, event: bool, tail: bool) -> (T, T) {
    if !event || tail {
        return (shape, xi);
    }
    let xi_prime = xi + xi_gap;
    let eps = xi_gap / xi_prime;
    let e = eps.value();
    if e >= LARGE_EPS {
        (shape, xi)
    } else if e <= SMALL_EPS {
        (shape + T::constant(1.0), (xi + xi_prime) * T::constant(0.5))
    } else {
        let one = T::constant(1.0);
        let a0 = one_minus_pow_one_minus(eps, shape);
        let a1 = one_minus_pow_one_minus(eps, shape + one);
        let a2 = one_minus_pow_one_minus(eps, shape + T::constant(2.0));
        let denom = a0 * a2 - shape * pow_one_minus(eps, shape) * eps * eps;
        (shape * a1 * a1 / denom, xi * a0 * a1 / denom)
    }
}

/// Gamma approximation of the frailty posterior after observing one spell.
pub fn posterior_update(prior: GammaParams, xp: XiPair, event: bool) -> GammaParams {
    let (shape, rate) =
        if xp.tail { (prior.shape, xp.xi) } else { update(prior.shape, xp.xi, xp.xi_prime * xp.epsilon, event, false) };
    GammaParams { shape, rate }
}

/// Evaluates the moment-matching closed forms at an arbitrary `eps`, without
/// switching to the limits. Used to check the limits themselves.
pub fn moment_matched_closed_form(shape: f64, xi: f64, eps: f64) -> GammaParams {
    let a0 = one_minus_pow_one_minus(eps, shape);
    let a1 = one_minus_pow_one_minus(eps, shape + 1.0);
    let a2 = one_minus_pow_one_minus(eps, shape + 2.0);
    let denom = a0 * a2 - shape * pow_one_minus(eps, shape) * eps * eps;
    GammaParams { shape: shape * a1 * a1 / denom, rate: xi * a0 * a1 / denom }
}

/// Folds spells into the running posterior, returning every intermediate state
/// starting with `prior`.
pub fn fold_chain(
    prior: GammaParams,
    spells: &[Spell],
    lt: &LinearTransform,
    hz: &DiscreteBaselineHazard,
) -> Result<Vec<GammaParams>> {
    let mut states = Vec::with_capacity(spells.len() + 1);
    let mut state = prior;
    states.push(state);
    for sp in spells {
        let phi = lt.transform(&sp.x)?;
        let xp = compute_xi(state, phi, sp.y, hz)?;
        state = posterior_update(state, xp, sp.event);
        states.push(state);
    }
    Ok(states)
}

/// Raw moments `(E[v], E[v^2])` of the exact posterior, by quadrature.
///
/// The unnormalised density is `v^(a-1) (exp(-v xi) - exp(-v xi'))` after an
/// event and `v^(a-1) exp(-v xi)` after censoring. The integration range is cut
/// where the `Gamma(a + 2, xi)` tail mass drops below `1e-14`.
pub fn posterior_moments_oracle(prior: GammaParams, xp: XiPair, event: bool) -> Result<(f64, f64)> {
    let shape = prior.shape;
    let xi = xp.xi;
    let gap = if event && !xp.tail { xp.xi_prime * xp.epsilon } else { f64::INFINITY };
    let mut upper = (shape + 2.0) / xi;
    while gamma_q(shape + 2.0, xi * upper) >= 1e-14 {
        upper *= 2.0;
    }
    let kernel = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let base = libm::exp((shape - 1.0) * libm::log(v) - v * xi);
        if gap.is_infinite() {
            base
        } else {
            base * -libm::expm1(-v * gap)
        }
    };
    let moment =
        |m: i32| integrate(|v| kernel(v) * libm::pow(v, m as f64), 0.0, upper, 1e-12, 1e-13, 20_000).map(|r| r.value);
    let z = moment(0)?;
    Ok((moment(1)? / z, moment(2)? / z))
}
