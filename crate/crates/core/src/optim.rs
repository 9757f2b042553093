//! Limited-memory BFGS with a backtracking (Armijo) line search.
//!
//! The objective may refuse a point by returning `None`; the line search then treats
//! the trial step as infeasible and shrinks it. This keeps iterates inside an open
//! feasible set.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `‖∇f‖₂ ≤ grad_tol · (1 + |f|)`.
    pub grad_tol: f64,
    pub max_backtracks: usize,
    /// Armijo constant.
    pub c1: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 12, max_iter: 500, grad_tol: 1e-6, max_backtracks: 40, c1: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The line search found no acceptable step (feasible with sufficient decrease).
    pub stalled: bool,
    /// Objective value after every accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
}

impl LbfgsOutcome {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.gradient)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` from `x0`, which must be feasible.
///
/// `precondition` applies an approximation of the inverse Hessian; it seeds the
/// two-loop recursion and is rescaled by the latest curvature pair.
pub fn minimize<F, P>(mut f: F, x0: Vec<f64>, precondition: Option<P>, opts: &LbfgsOptions) -> Option<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let (mut value, mut grad) = f(&x0)?;
    let mut x = x0;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut history = vec![value];
    let apply_h0 = |v: &[f64]| match &precondition {
        Some(p) => p(v),
        None => v.to_vec(),
    };
    let mut iterations = 0;
    let mut stalled = false;
    let mut retried = false;

    while iterations < opts.max_iter {
        if norm(&grad) <= opts.grad_tol * (1.0 + value.abs()) {
            break;
        }
        // Two-loop recursion.
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        d = apply_h0(&d);
        if let Some((s, y, _)) = pairs.back() {
            let hy = apply_h0(y);
            let gamma = dot(s, y) / dot(y, &hy);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            // Lost descent; fall back to the preconditioned gradient.
            pairs.clear();
            d = apply_h0(&grad).iter().map(|g| -g).collect();
            slope = dot(&grad, &d);
        }

        let mut step = if pairs.is_empty() && precondition.is_none() { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            if let Some((fv, g)) = f(&trial) {
                if fv.is_finite() && fv <= value + opts.c1 * step * slope {
                    accepted = Some((trial, fv, g));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            if !retried && !pairs.is_empty() {
                // One restart from steepest descent before giving up.
                pairs.clear();
                retried = true;
                continue;
            }
            stalled = true;
            break;
        };
        retried = false;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * norm(&s) * norm(&y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        value = v_new;
        grad = g_new;
        history.push(value);
        iterations += 1;
    }
    let converged = norm(&grad) <= opts.grad_tol * (1.0 + value.abs());
    Some(LbfgsOutcome { x, value, gradient: grad, iterations, converged, stalled, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * x[i] * a - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        Some((f, g))
    }

    #[test]
    fn minimizes_rosenbrock() {
        let opts = LbfgsOptions { max_iter: 2000, grad_tol: 1e-10, ..Default::default() };
        let out = minimize(rosenbrock, vec![-1.2, 1.0, -1.2, 1.0], None::<fn(&[f64]) -> Vec<f64>>, &opts).unwrap();
        assert!(out.converged);
        assert!(out.x.iter().all(|v| (v - 1.0).abs() < 1e-6), "{:?}", out.x);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_feasible_set() {
        // Minimum of (x+1)² at −1 lies outside x > 0.
        let f = |x: &[f64]| (x[0] > 0.0).then(|| ((x[0] + 1.0).powi(2) + 1.0 / x[0] * 1e-3, vec![2.0 * (x[0] + 1.0) - 1e-3 / (x[0] * x[0])]));
        let out = minimize(f, vec![2.0], None::<fn(&[f64]) -> Vec<f64>>, &LbfgsOptions::default()).unwrap();
        assert!(out.x[0] > 0.0);
        assert!(out.value < 1.1);
    }

    #[test]
    fn diagonal_preconditioner_on_ill_conditioned_quadratic() {
        let w: Vec<f64> = (0..50).map(|i| 10f64.powi(i % 7)).collect();
        let f = |x: &[f64]| Some((x.iter().zip(&w).map(|(a, b)| 0.5 * b * a * a).sum(), x.iter().zip(&w).map(|(a, b)| a * b).collect()));
        let p = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a / b).collect::<Vec<_>>();
        let out = minimize(f, vec![1.0; 50], Some(p), &LbfgsOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let out = minimize(|_: &[f64]| None, vec![0.0], None::<fn(&[f64]) -> Vec<f64>>, &LbfgsOptions::default());
        assert!(out.is_none());
    }
}
