//! Limited-memory quasi-Newton minimization of smooth convex objectives.
//!
//! Used for the block of the augmented Lagrangian that has no closed form
//! (intercepts, thresholds and the coefficient matrix) and by the baselines.
//! Threshold vectors are optimized through a log-gap reparameterization so
//! every iterate keeps them strictly increasing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{MtclmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothSolveSettings {
    pub max_inner_iter: usize,
    /// Exit once the gradient sup-norm falls to this level.
    pub grad_tol: f64,
    /// Number of curvature pairs kept by L-BFGS.
    pub memory: usize,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for SmoothSolveSettings {
    fn default() -> Self {
        Self {
            max_inner_iter: 500,
            grad_tol: 1e-6,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

impl SmoothSolveSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_inner_iter == 0
            || !(self.grad_tol > 0.0)
            || self.memory == 0
            || !(self.armijo > 0.0 && self.armijo < 1.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
        {
            return Err(MtclmError::InvalidConfig(format!(
                "smooth solver settings out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// A differentiable objective: returns the value and fills `grad`.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapter turning a closure into a [`SmoothObjective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> SmoothObjective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Two-loop recursion: returns `-H g` for the current curvature memory.
fn lbfgs_direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `objective` from `start` with L-BFGS and monotone Armijo
/// backtracking. Returns the best iterate when the iteration budget runs out
/// or no further decrease can be found.
pub fn minimize_smooth<O: SmoothObjective + ?Sized>(
    objective: &O,
    start: &[f64],
    settings: &SmoothSolveSettings,
) -> Result<SmoothOutcome> {
    let dim = objective.dim();
    if start.len() != dim {
        return Err(MtclmError::DimensionMismatch(format!(
            "start has {} entries, objective expects {dim}",
            start.len()
        )));
    }
    let mut x = start.to_vec();
    let mut g = vec![0.0; dim];
    let mut f = objective.value_grad(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(MtclmError::NonFiniteStart);
    }
    let mut trace = vec![f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut x_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];
    let mut iterations = 0;

    while iterations < settings.max_inner_iter {
        let gnorm = sup_norm(&g);
        if gnorm <= settings.grad_tol {
            return Ok(SmoothOutcome {
                x,
                value: f,
                grad_norm: gnorm,
                iterations,
                converged: true,
                trace,
            });
        }
        let mut d = lbfgs_direction(&g, &mem);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if mem.is_empty() {
            (1.0 / sup_norm(&d)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            for i in 0..dim {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = objective.value_grad(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + settings.armijo * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= settings.backtrack;
        }

        let Some(f_new) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if mem.len() == settings.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        trace.push(f);
        iterations += 1;
    }

    let gnorm = sup_norm(&g);
    Ok(SmoothOutcome {
        x,
        value: f,
        grad_norm: gnorm,
        iterations,
        converged: gnorm <= settings.grad_tol,
        trace,
    })
}

/// Maps strictly increasing thresholds to `(z1, log(z2 - z1), ...)`.
pub fn thresholds_to_free(zeta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(zeta.len());
    if let Some(&first) = zeta.first() {
        out.push(first);
        out.extend(zeta.windows(2).map(|w| (w[1] - w[0]).ln()));
    }
    out
}

/// Inverse of [`thresholds_to_free`].
pub fn free_to_thresholds(free: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(free.len());
    let mut acc = 0.0;
    for (k, &r) in free.iter().enumerate() {
        acc = if k == 0 { r } else { acc + r.exp() };
        out.push(acc);
    }
    out
}

/// Chain rule from a threshold gradient to the gradient in free coordinates.
pub fn threshold_grad_to_free(free: &[f64], grad_zeta: &[f64], out: &mut [f64]) {
    // d zeta_j / d r_k = 1 for k = 0 and exp(r_k) for 1 <= k <= j
    let mut tail = 0.0;
    for k in (0..free.len()).rev() {
        tail += grad_zeta[k];
        out[k] = if k == 0 { tail } else { tail * free[k].exp() };
    }
}
