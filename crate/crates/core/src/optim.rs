//! Limited-memory BFGS with backtracking Armijo line search.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    /// Stop when the gradient infinity norm is at most this.
    pub grad_tol: f64,
    /// Stop when an accepted step changes the objective by at most
    /// `rel_f_tol * max(|f|, 1)`.
    pub rel_f_tol: f64,
    pub memory: usize,
    pub armijo_c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Largest coordinate change attempted by the first trial step.
    pub max_step: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            max_iters: 500,
            grad_tol: 1e-6,
            rel_f_tol: 1e-9,
            memory: 10,
            armijo_c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
            max_step: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    ObjectiveTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::GradientTolerance | StopReason::ObjectiveTolerance)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
}

/// Minimises `f`, which returns the objective and its gradient.
///
/// Errors from `f` during the line search are treated as infeasible trial
/// points; an error at the starting point is returned.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut trace = alloc::vec![fx];
    let mut iterations = 0;
    let reason = loop {
        if inf_norm(&g) <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
            }
            let mut d = direction(&g, &memory);
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                memory.clear();
                d = g.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
            }
            let mut t = if memory.is_empty() { 1.0 / inf_norm(&g).max(1.0) } else { 1.0 };
            let dmax = inf_norm(&d);
            if t * dmax > cfg.max_step {
                t = cfg.max_step / dmax;
            }
            for _ in 0..=cfg.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                if let Ok((ft, gt)) = f(&trial) {
                    if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + cfg.armijo_c1 * t * slope {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
                t *= cfg.shrink;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break StopReason::LineSearchFailed;
        };
        iterations += 1;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let change = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if change <= cfg.rel_f_tol * libm::fabs(fx).max(1.0) {
            break StopReason::ObjectiveTolerance;
        }
    };
    Ok(Minimum { x, value: fx, gradient: g, iterations, reason, trace })
}

/// Two-loop recursion: `-H g`.
fn direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let cfg = LbfgsConfig { grad_tol: 1e-8, rel_f_tol: 0.0, ..Default::default() };
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert_eq!(m.reason, StopReason::GradientTolerance);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_converges_quickly() {
        let f = |x: &[f64]| {
            let v: f64 = x.iter().enumerate().map(|(i, xi)| (i as f64 + 1.0) * xi * xi).sum();
            let g = x.iter().enumerate().map(|(i, xi)| 2.0 * (i as f64 + 1.0) * xi).collect();
            Ok((v, g))
        };
        let m = minimize(f, vec![1.0; 20], &LbfgsConfig::default()).unwrap();
        assert!(m.converged());
        assert!(m.iterations < 100);
    }

    #[test]
    fn iteration_cap_is_not_an_error() {
        let cfg = LbfgsConfig { max_iters: 3, rel_f_tol: 0.0, grad_tol: 1e-12, ..Default::default() };
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert_eq!(m.reason, StopReason::MaxIterations);
        assert!(!m.converged());
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // log barrier at x > 0; trial points at x <= 0 error out
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                return Err(Error::NonFiniteObjective);
            }
            Ok((x[0] - libm::log(x[0]), vec![1.0 - 1.0 / x[0]]))
        };
        let m = minimize(f, vec![5.0], &LbfgsConfig::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert_eq!(minimize(f, vec![0.0], &LbfgsConfig::default()).unwrap_err(), Error::NonFiniteObjective);
    }
}
