//! Comparator estimators fitted by proximal gradient (ISTA with backtracking).
//!
//! * `logistic-l1`: `logit P(Y = 0 | x) = alpha + x'beta` on the collapsed
//!   healthy/diseased outcome.
//! * `clm-l1`: one cumulative logit model over all levels,
//!   `logit P(Y <= k | x) = theta_k + x'beta` for `k = 0..K-1`.
//!
//! Both orient coefficients toward the lower categories, like the screening
//! part of the multi-task model. Thresholds are optimized in log-gap
//! coordinates, so they stay strictly increasing.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{MtclmError, Result};
use crate::likelihood::{sigmoid, Likelihood};
use crate::predict::CategoryProbabilities;
use crate::prox::soft_threshold_scalar;
use crate::smooth::{free_to_thresholds, threshold_grad_to_free, thresholds_to_free};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    LogisticL1,
    ClmL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IstaSettings {
    pub max_iter: usize,
    /// Exit once the sup-norm of the gradient mapping falls to this level.
    pub tol: f64,
    pub backtrack: f64,
    /// Slack allowed in the exit KKT check on zero coefficients.
    pub kkt_tol: f64,
}

impl Default for IstaSettings {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-7,
            backtrack: 0.5,
            kkt_tol: 1e-4,
        }
    }
}

impl IstaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0
            || !(self.tol > 0.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
        {
            return Err(MtclmError::InvalidConfig(format!(
                "proximal gradient settings out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub kind: BaselineKind,
    pub lambda: f64,
    /// `[alpha]` for logistic, `theta_0 < ... < theta_{K-1}` for the CLM.
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Penalized objective after every iteration, starting value first.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_satisfied: bool,
}

impl BaselineFit {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    /// Level probabilities: two columns (healthy, diseased) for logistic,
    /// `K + 1` columns for the CLM.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<CategoryProbabilities> {
        if x.ncols() != self.p() {
            return Err(MtclmError::DimensionMismatch(format!(
                "x has {} columns, model has {} coefficients",
                x.ncols(),
                self.p()
            )));
        }
        let eta = x.dot(&ArrayView1::from(&self.coefficients));
        let levels = self.intercepts.len() + 1;
        let mut out = Array2::zeros((x.nrows(), levels));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let mut prev = 0.0;
            for (k, &th) in self.intercepts.iter().enumerate() {
                let c = sigmoid(th + eta[i]);
                row[k] = (c - prev).max(0.0);
                prev = c;
            }
            row[levels - 1] = 1.0 - prev;
        }
        Ok(CategoryProbabilities(out))
    }

    /// `(1/m)` times the negative log-likelihood on held-out rows.
    pub fn heldout_nll(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        if x.ncols() != self.p() || x.nrows() != y.len() {
            return Err(MtclmError::DimensionMismatch(
                "held-out data do not match the model".into(),
            ));
        }
        let beta = ArrayView1::from(&self.coefficients);
        Ok(match self.kind {
            BaselineKind::LogisticL1 => {
                Likelihood::from_parts(x, y, 1).screening(self.intercepts[0], beta, None)
            }
            BaselineKind::ClmL1 => {
                let k_max = self.intercepts.len();
                if let Some(&bad) = y.iter().find(|&&l| l > k_max) {
                    return Err(MtclmError::LabelOutOfRange {
                        index: y.iter().position(|&l| l == bad).unwrap_or(0),
                        label: bad,
                        k_max,
                    });
                }
                let shifted: Vec<usize> = y.iter().map(|&l| l + 1).collect();
                Likelihood::from_parts(x, &shifted, k_max + 1).severity(
                    &self.intercepts,
                    beta,
                    None,
                )
            }
        })
    }
}

fn logit_clamped(count: usize, n: usize) -> f64 {
    let m = n as f64;
    let q = (count as f64 / m).clamp(0.5 / m, 1.0 - 0.5 / m);
    (q / (1.0 - q)).ln()
}

/// Intercept-only CLM thresholds: logits of cumulative level frequencies.
pub fn clm_intercepts(y: &[usize], k_max: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k_max + 1];
    y.iter().for_each(|&l| counts[l.min(k_max)] += 1);
    let mut out: Vec<f64> = Vec::with_capacity(k_max);
    let mut cum = 0;
    for &c in &counts[..k_max] {
        cum += c;
        let mut t = logit_clamped(cum, y.len());
        if let Some(&last) = out.last() {
            if t <= last {
                t = last + 1e-3;
            }
        }
        out.push(t);
    }
    out
}

fn check_inputs(
    x: ArrayView2<f64>,
    y: &[usize],
    lambda: f64,
    settings: &IstaSettings,
) -> Result<()> {
    settings.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(MtclmError::InvalidConfig(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if x.nrows() != y.len() {
        return Err(MtclmError::DimensionMismatch(format!(
            "x has {} rows, y has {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MtclmError::InvalidConfig("non-finite predictor".into()));
    }
    let healthy = y.iter().filter(|&&l| l == 0).count();
    if healthy == 0 || healthy == y.len() {
        return Err(MtclmError::InvalidConfig(
            "both healthy (0) and diseased (>= 1) observations are required".into(),
        ));
    }
    Ok(())
}

/// Minimizes `f(z) + lambda |z[penalized..]|_1` from `z`, where `f` writes
/// its gradient and returns its value.
fn ista<F: Fn(&[f64], &mut [f64]) -> f64>(
    f: F,
    mut z: Vec<f64>,
    penalized: usize,
    lambda: f64,
    settings: &IstaSettings,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize, bool) {
    let dim = z.len();
    let l1 = |z: &[f64]| lambda * z[penalized..].iter().map(|v| v.abs()).sum::<f64>();
    let mut g = vec![0.0; dim];
    let mut fz = f(&z, &mut g);
    let mut trace = vec![fz + l1(&z)];
    let mut z_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];
    let mut step: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        step = (step * 2.0).min(1e4);
        let mut accepted = None;
        for _ in 0..100 {
            for j in 0..dim {
                let w = z[j] - step * g[j];
                z_new[j] = if j >= penalized {
                    soft_threshold_scalar(w, step * lambda)
                } else {
                    w
                };
            }
            let f_new = f(&z_new, &mut g_new);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for j in 0..dim {
                let d = z_new[j] - z[j];
                lin += g[j] * d;
                quad += d * d;
            }
            if f_new.is_finite() && f_new <= fz + lin + quad / (2.0 * step) + 1e-15 * fz.abs() {
                accepted = Some((f_new, quad));
                break;
            }
            step *= settings.backtrack;
        }
        let Some((f_new, _)) = accepted else { break };
        let mapping = z_new
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / step;
        std::mem::swap(&mut z, &mut z_new);
        std::mem::swap(&mut g, &mut g_new);
        fz = f_new;
        trace.push(fz + l1(&z));
        iterations += 1;
        if mapping <= settings.tol {
            converged = true;
            break;
        }
    }
    (z, g, trace, iterations, converged)
}

fn kkt_zero_ok(grad: &[f64], coef: &[f64], lambda: f64, tol: f64) -> bool {
    grad.iter()
        .zip(coef)
        .all(|(g, c)| *c != 0.0 || g.abs() <= lambda + tol)
}

/// L1 logistic regression of `Y = 0` against `Y >= 1`.
pub fn fit_logistic_l1(
    x: ArrayView2<f64>,
    y: &[usize],
    lambda: f64,
    settings: &IstaSettings,
    init: Option<&BaselineFit>,
) -> Result<BaselineFit> {
    check_inputs(x, y, lambda, settings)?;
    let p = x.ncols();
    let lik = Likelihood::from_parts(x, y, 1);
    let healthy = y.iter().filter(|&&l| l == 0).count();
    let z0 = match init {
        Some(f) if f.kind == BaselineKind::LogisticL1 && f.p() == p => {
            [f.intercepts.clone(), f.coefficients.clone()].concat()
        }
        _ => {
            let mut z = vec![0.0; 1 + p];
            z[0] = logit_clamped(healthy, y.len());
            z
        }
    };
    let f = |z: &[f64], g: &mut [f64]| {
        let (ga, gb) = g.split_at_mut(1);
        lik.screening(z[0], ArrayView1::from(&z[1..]), Some((&mut ga[0], gb)))
    };
    let (z, g, trace, iterations, converged) = ista(f, z0, 1, lambda, settings);
    Ok(BaselineFit {
        kind: BaselineKind::LogisticL1,
        lambda,
        kkt_satisfied: kkt_zero_ok(&g[1..], &z[1..], lambda, settings.kkt_tol),
        intercepts: vec![z[0]],
        coefficients: z[1..].to_vec(),
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// L1 cumulative logit model over levels `0..=k_max`.
pub fn fit_clm_l1(
    x: ArrayView2<f64>,
    y: &[usize],
    k_max: usize,
    lambda: f64,
    settings: &IstaSettings,
    init: Option<&BaselineFit>,
) -> Result<BaselineFit> {
    check_inputs(x, y, lambda, settings)?;
    if k_max == 0 {
        return Err(MtclmError::InvalidConfig("k_max must be at least 1".into()));
    }
    if let Some(i) = y.iter().position(|&l| l > k_max) {
        return Err(MtclmError::LabelOutOfRange {
            index: i,
            label: y[i],
            k_max,
        });
    }
    let p = x.ncols();
    let shifted: Vec<usize> = y.iter().map(|&l| l + 1).collect();
    let lik = Likelihood::from_parts(x, &shifted, k_max + 1);
    let (theta0, beta0) = match init {
        Some(f) if f.kind == BaselineKind::ClmL1 && f.p() == p && f.intercepts.len() == k_max => {
            (f.intercepts.clone(), f.coefficients.clone())
        }
        _ => (clm_intercepts(y, k_max), vec![0.0; p]),
    };
    let z0 = [thresholds_to_free(&theta0), beta0].concat();
    let f = |z: &[f64], g: &mut [f64]| {
        let (free, beta) = z.split_at(k_max);
        let theta = free_to_thresholds(free);
        let (g_free, g_beta) = g.split_at_mut(k_max);
        let mut g_theta = vec![0.0; k_max];
        let v = lik.severity(&theta, ArrayView1::from(beta), Some((&mut g_theta, g_beta)));
        threshold_grad_to_free(free, &g_theta, g_free);
        v
    };
    let (z, g, trace, iterations, converged) = ista(f, z0, k_max, lambda, settings);
    Ok(BaselineFit {
        kind: BaselineKind::ClmL1,
        lambda,
        kkt_satisfied: kkt_zero_ok(&g[k_max..], &z[k_max..], lambda, settings.kkt_tol),
        intercepts: free_to_thresholds(&z[..k_max]),
        coefficients: z[k_max..].to_vec(),
        objective_trace: trace,
        iterations,
        converged,
    })
}
