//! ADMM for the penalized MtCLM objectives.
//!
//! The coefficient matrix `Theta = (beta gamma)` is split from its copies:
//! `B` carries the L1 (and, for the group variant, row-wise L2) penalty and
//! `a` carries the fused penalty on `beta - gamma`. Each outer iteration
//! minimizes the smooth block `(alpha, zeta, Theta)` with L-BFGS, applies the
//! closed-form thresholding updates, then takes dual ascent steps whose
//! length equals the penalty parameter of the constraint.
//!
//! Reported coefficients are read from `B`, so thresholded entries are exact zeros.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::OrdinalDataset;
use crate::error::{MtclmError, Result};
use crate::likelihood::Likelihood;
use crate::params::{AdmmSettings, FitResult, MtclmParams, PenaltyConfig};
use crate::prox::{group_soft_threshold_in_place, soft_threshold_scalar};
use crate::smooth::{
    free_to_thresholds, minimize_smooth, threshold_grad_to_free, thresholds_to_free,
    SmoothObjective, SmoothSolveSettings,
};

/// Which structural penalty the splitting handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    /// `lambda_f * sum |beta_j - gamma_j|` through the auxiliary vector `a`.
    Fused,
    /// `lambda_g * sum ||(beta_j, gamma_j)||_2` applied inside the `B` update.
    Group,
}

/// Primal, auxiliary and dual variables of the splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub alpha: f64,
    pub zeta: Vec<f64>,
    /// `p x 2`, columns `beta` and `gamma`.
    pub theta: Array2<f64>,
    /// Fused auxiliary, tracks `Theta d` with `d = (1, -1)`. Unused by the group variant.
    pub a: Array1<f64>,
    pub b: Array2<f64>,
    pub u: Array1<f64>,
    pub v: Array2<f64>,
}

impl AdmmState {
    /// Constraint-consistent start: `B = Theta`, `a = Theta d`, zero duals.
    pub fn from_params(params: &MtclmParams) -> Self {
        let p = params.p();
        let mut theta = Array2::zeros((p, 2));
        theta.column_mut(0).assign(&ArrayView1::from(&params.beta));
        theta.column_mut(1).assign(&ArrayView1::from(&params.gamma));
        let a = &theta.column(0) - &theta.column(1);
        Self {
            alpha: params.alpha,
            zeta: params.zeta.clone(),
            b: theta.clone(),
            theta,
            a,
            u: Array1::zeros(p),
            v: Array2::zeros((p, 2)),
        }
    }

    /// Intercepts from the smooth block, coefficients from `B`.
    pub fn params(&self) -> MtclmParams {
        MtclmParams {
            alpha: self.alpha,
            beta: self.b.column(0).to_vec(),
            zeta: self.zeta.clone(),
            gamma: self.b.column(1).to_vec(),
        }
    }

    fn p(&self) -> usize {
        self.theta.nrows()
    }
}

/// Stopping quantities following the usual combined absolute/relative rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
}

impl Residuals {
    pub fn converged(&self) -> bool {
        self.primal <= self.eps_pri && self.dual <= self.eps_dual
    }
}

fn norm2<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

/// Primal residual is the stacked constraint violation, dual residual the
/// penalty-weighted change of the auxiliary variables mapped back through the
/// constraint operator.
pub fn residuals(
    state: &AdmmState,
    prev: &AdmmState,
    settings: &AdmmSettings,
    structure: Structure,
) -> Residuals {
    let p = state.p();
    let (beta, gamma) = (state.theta.column(0), state.theta.column(1));
    let (b1, b2) = (state.b.column(0), state.b.column(1));
    let mu1 = settings.mu_1;
    match structure {
        Structure::Fused => {
            let muf = settings.mu_f;
            let mut r2 = 0.0;
            let mut s2 = 0.0;
            let mut ax2 = 0.0;
            let mut z2 = 0.0;
            let mut aty2 = 0.0;
            for j in 0..p {
                let diff = beta[j] - gamma[j];
                r2 += (diff - state.a[j]).powi(2)
                    + (beta[j] - b1[j]).powi(2)
                    + (gamma[j] - b2[j]).powi(2);
                let da = muf * (state.a[j] - prev.a[j]);
                let db1 = mu1 * (b1[j] - prev.b[[j, 0]]);
                let db2 = mu1 * (b2[j] - prev.b[[j, 1]]);
                s2 += (da + db1).powi(2) + (-da + db2).powi(2);
                ax2 += diff * diff + beta[j] * beta[j] + gamma[j] * gamma[j];
                z2 += state.a[j].powi(2) + b1[j] * b1[j] + b2[j] * b2[j];
                aty2 += (state.u[j] + state.v[[j, 0]]).powi(2)
                    + (-state.u[j] + state.v[[j, 1]]).powi(2);
            }
            Residuals {
                primal: r2.sqrt(),
                dual: s2.sqrt(),
                eps_pri: ((3 * p) as f64).sqrt() * settings.eps_abs
                    + settings.eps_rel * ax2.sqrt().max(z2.sqrt()),
                eps_dual: ((2 * p) as f64).sqrt() * settings.eps_abs
                    + settings.eps_rel * aty2.sqrt(),
            }
        }
        Structure::Group => {
            let primal = norm2((&state.theta - &state.b).iter());
            let dual = mu1 * norm2((&state.b - &prev.b).iter());
            let scale = norm2(state.theta.iter()).max(norm2(state.b.iter()));
            Residuals {
                primal,
                dual,
                eps_pri: ((2 * p) as f64).sqrt() * settings.eps_abs + settings.eps_rel * scale,
                eps_dual: ((2 * p) as f64).sqrt() * settings.eps_abs
                    + settings.eps_rel * norm2(state.v.iter()),
            }
        }
    }
}

/// Penalized objective: `(1/n) nll + lambda_f sum|beta - gamma|
/// + lambda_g sum sqrt(beta^2 + gamma^2) + lambda11 |beta|_1 + lambda12 |gamma|_1`.
pub fn objective_value(
    data: &OrdinalDataset,
    params: &MtclmParams,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    penalty.validate()?;
    let nll = crate::likelihood::total_nll(data, params)?.total_nll;
    Ok(nll + penalty_value(params, penalty))
}

pub(crate) fn penalty_value(params: &MtclmParams, penalty: &PenaltyConfig) -> f64 {
    let mut total = 0.0;
    for (b, g) in params.beta.iter().zip(&params.gamma) {
        total += penalty.lambda_f * (b - g).abs()
            + penalty.lambda_g * (b * b + g * g).sqrt()
            + penalty.lambda11 * b.abs()
            + penalty.lambda12 * g.abs();
    }
    total
}

/// Quadratic coupling terms added to the likelihood in the smooth block.
struct Coupling<'s> {
    structure: Structure,
    state: &'s AdmmState,
    mu_f: f64,
    mu_1: f64,
}

/// The smooth block over `z = (alpha, free thresholds, beta, gamma)`.
///
/// Without coupling this is the plain negative log-likelihood.
pub(crate) struct BlockObjective<'l, 'd, 's> {
    lik: &'l Likelihood<'d>,
    coupling: Option<Coupling<'s>>,
}

pub(crate) fn pack(
    alpha: f64,
    zeta: &[f64],
    beta: ArrayView1<f64>,
    gamma: ArrayView1<f64>,
) -> Vec<f64> {
    let mut z = Vec::with_capacity(1 + zeta.len() + 2 * beta.len());
    z.push(alpha);
    z.extend(thresholds_to_free(zeta));
    z.extend(beta.iter());
    z.extend(gamma.iter());
    z
}

pub(crate) fn unpack(z: &[f64], km1: usize, p: usize) -> (f64, Vec<f64>, &[f64], &[f64]) {
    let zeta = free_to_thresholds(&z[1..1 + km1]);
    let beta = &z[1 + km1..1 + km1 + p];
    let gamma = &z[1 + km1 + p..1 + km1 + 2 * p];
    (z[0], zeta, beta, gamma)
}

impl<'l, 'd, 's> BlockObjective<'l, 'd, 's> {
    pub(crate) fn likelihood_only(lik: &'l Likelihood<'d>) -> Self {
        Self {
            lik,
            coupling: None,
        }
    }
}

impl SmoothObjective for BlockObjective<'_, '_, '_> {
    fn dim(&self) -> usize {
        self.lik.k_max() + 2 * self.lik.p()
    }

    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.lik.p();
        let km1 = self.lik.k_max() - 1;
        let (alpha, zeta, beta, gamma) = unpack(z, km1, p);
        let (g_alpha, rest) = grad.split_at_mut(1);
        let (g_free, rest) = rest.split_at_mut(km1);
        let (g_beta, g_gamma) = rest.split_at_mut(p);

        let mut value = self.lik.screening(
            alpha,
            ArrayView1::from(beta),
            Some((&mut g_alpha[0], &mut *g_beta)),
        );
        let mut g_zeta = vec![0.0; km1];
        value += self.lik.severity(
            &zeta,
            ArrayView1::from(gamma),
            Some((&mut g_zeta, &mut *g_gamma)),
        );
        threshold_grad_to_free(&z[1..1 + km1], &g_zeta, g_free);

        if let Some(c) = &self.coupling {
            let st = c.state;
            if c.structure == Structure::Fused {
                for j in 0..p {
                    let r = beta[j] - gamma[j] - st.a[j];
                    value += st.u[j] * r + 0.5 * c.mu_f * r * r;
                    let d = st.u[j] + c.mu_f * r;
                    g_beta[j] += d;
                    g_gamma[j] -= d;
                }
            }
            for j in 0..p {
                let rb = beta[j] - st.b[[j, 0]];
                let rg = gamma[j] - st.b[[j, 1]];
                value += st.v[[j, 0]] * rb + st.v[[j, 1]] * rg + 0.5 * c.mu_1 * (rb * rb + rg * rg);
                g_beta[j] += st.v[[j, 0]] + c.mu_1 * rb;
                g_gamma[j] += st.v[[j, 1]] + c.mu_1 * rg;
            }
        }
        value
    }
}

/// Intercept-only maximum likelihood: `alpha = logit(n_0 / n)` and
/// `zeta_k = logit` of the cumulative level frequencies among patients.
///
/// Proportions are kept away from 0 and 1 by half an observation so the
/// result is finite even with empty levels.
pub fn intercept_only(data: &OrdinalDataset) -> (f64, Vec<f64>) {
    let counts = data.level_counts();
    let n = data.n() as f64;
    let logit = |q: f64| (q / (1.0 - q)).ln();
    let clamp = |q: f64, m: f64| q.clamp(0.5 / m, 1.0 - 0.5 / m);
    let alpha = logit(clamp(counts[0] as f64 / n, n));
    let patients: usize = counts[1..].iter().sum();
    let m = (patients as f64).max(1.0);
    let mut zeta = Vec::with_capacity(data.k_max() - 1);
    let mut cum = 0usize;
    for k in 1..data.k_max() {
        cum += counts[k];
        let mut z = logit(clamp(cum as f64 / m, m));
        if let Some(&last) = zeta.last() {
            if z <= last {
                z = last + 1e-3;
            }
        }
        zeta.push(z);
    }
    (alpha, zeta)
}

/// Intercept-only parameters with zero coefficients.
pub fn intercept_only_params(data: &OrdinalDataset) -> MtclmParams {
    let (alpha, zeta) = intercept_only(data);
    MtclmParams {
        alpha,
        beta: vec![0.0; data.p()],
        zeta,
        gamma: vec![0.0; data.p()],
    }
}

/// Unpenalized maximum likelihood by direct smooth minimization of the total
/// negative log-likelihood.
pub fn fit_mle(
    data: &OrdinalDataset,
    smooth: &SmoothSolveSettings,
    init: Option<&MtclmParams>,
) -> Result<MtclmParams> {
    let lik = Likelihood::new(data);
    let start = init.cloned().unwrap_or_else(|| intercept_only_params(data));
    start.validate()?;
    let obj = BlockObjective::likelihood_only(&lik);
    let z0 = pack(
        start.alpha,
        &start.zeta,
        ArrayView1::from(&start.beta),
        ArrayView1::from(&start.gamma),
    );
    let out = minimize_smooth(&obj, &z0, smooth)?;
    let (alpha, zeta, beta, gamma) = unpack(&out.x, data.k_max() - 1, data.p());
    Ok(MtclmParams {
        alpha,
        beta: beta.to_vec(),
        zeta,
        gamma: gamma.to_vec(),
    })
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub augmented_lagrangian: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl FitResult {
    pub fn trace_records(&self) -> Vec<TraceRecord> {
        (0..self.iterations)
            .map(|t| TraceRecord {
                iteration: t + 1,
                objective: self.objective_trace[t],
                augmented_lagrangian: self.augmented_lagrangian_trace[t],
                primal_residual: self.primal_residual_trace[t],
                dual_residual: self.dual_residual_trace[t],
            })
            .collect()
    }
}

pub fn write_trace_csv<W: Write>(writer: W, fit: &FitResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for rec in fit.trace_records() {
        wtr.serialize(rec).map_err(|e| MtclmError::Io(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Fused-lasso variant: `lambda_g` must be zero.
pub fn fit_fused(
    data: &OrdinalDataset,
    penalty: &PenaltyConfig,
    admm: &AdmmSettings,
    smooth: &SmoothSolveSettings,
    init: Option<&MtclmParams>,
) -> Result<FitResult> {
    if penalty.lambda_g != 0.0 {
        return Err(MtclmError::InvalidConfig(
            "fused fit requires lambda_g = 0".into(),
        ));
    }
    fit(data, penalty, Structure::Fused, admm, smooth, init)
}

/// Group-lasso variant: `lambda_f` must be zero.
pub fn fit_group(
    data: &OrdinalDataset,
    penalty: &PenaltyConfig,
    admm: &AdmmSettings,
    smooth: &SmoothSolveSettings,
    init: Option<&MtclmParams>,
) -> Result<FitResult> {
    if penalty.lambda_f != 0.0 {
        return Err(MtclmError::InvalidConfig(
            "group fit requires lambda_f = 0".into(),
        ));
    }
    fit(data, penalty, Structure::Group, admm, smooth, init)
}

/// Dispatches on the active structural penalty (fused when neither is active).
pub fn fit_auto(
    data: &OrdinalDataset,
    penalty: &PenaltyConfig,
    admm: &AdmmSettings,
    smooth: &SmoothSolveSettings,
    init: Option<&MtclmParams>,
) -> Result<FitResult> {
    if penalty.lambda_g > 0.0 {
        fit_group(data, penalty, admm, smooth, init)
    } else {
        fit_fused(data, penalty, admm, smooth, init)
    }
}

fn augmented_lagrangian(
    nll: f64,
    st: &AdmmState,
    penalty: &PenaltyConfig,
    admm: &AdmmSettings,
    structure: Structure,
) -> f64 {
    let mut value = nll;
    for j in 0..st.p() {
        let (beta, gamma) = (st.theta[[j, 0]], st.theta[[j, 1]]);
        let (b1, b2) = (st.b[[j, 0]], st.b[[j, 1]]);
        if structure == Structure::Fused {
            let r = beta - gamma - st.a[j];
            value += penalty.lambda_f * st.a[j].abs() + st.u[j] * r + 0.5 * admm.mu_f * r * r;
        } else {
            value += penalty.lambda_g * (b1 * b1 + b2 * b2).sqrt();
        }
        let (rb, rg) = (beta - b1, gamma - b2);
        value += penalty.lambda11 * b1.abs()
            + penalty.lambda12 * b2.abs()
            + st.v[[j, 0]] * rb
            + st.v[[j, 1]] * rg
            + 0.5 * admm.mu_1 * (rb * rb + rg * rg);
    }
    value
}

fn fit(
    data: &OrdinalDataset,
    penalty: &PenaltyConfig,
    structure: Structure,
    admm: &AdmmSettings,
    smooth: &SmoothSolveSettings,
    init: Option<&MtclmParams>,
) -> Result<FitResult> {
    data.validate()?;
    penalty.validate()?;
    admm.validate()?;
    smooth.validate()?;
    let p = data.p();
    let km1 = data.k_max() - 1;
    let start = match init {
        Some(params) => {
            params.validate()?;
            if params.p() != p || params.zeta.len() != km1 {
                return Err(MtclmError::DimensionMismatch(
                    "initial parameters do not match the dataset".into(),
                ));
            }
            params.clone()
        }
        None => intercept_only_params(data),
    };

    let lik = Likelihood::new(data);
    let mut state = AdmmState::from_params(&start);
    let mut z = pack(
        state.alpha,
        &state.zeta,
        state.theta.column(0),
        state.theta.column(1),
    );

    let mut objective_trace = Vec::new();
    let mut al_trace = Vec::new();
    let mut primal_trace = Vec::new();
    let mut dual_trace = Vec::new();
    let mut converged = false;
    let mut inner_tol = smooth.grad_tol.max(1e-4);

    let thr_f = penalty.lambda_f / admm.mu_f;
    let thr_11 = penalty.lambda11 / admm.mu_1;
    let thr_12 = penalty.lambda12 / admm.mu_1;
    let thr_g = std::f64::consts::SQRT_2 * penalty.lambda_g / admm.mu_1;

    for _ in 0..admm.max_iter {
        let prev = state.clone();

        // (alpha, zeta, Theta) block
        let inner = SmoothSolveSettings {
            grad_tol: inner_tol,
            ..*smooth
        };
        let obj = BlockObjective {
            lik: &lik,
            coupling: Some(Coupling {
                structure,
                state: &prev,
                mu_f: admm.mu_f,
                mu_1: admm.mu_1,
            }),
        };
        let out = minimize_smooth(&obj, &z, &inner)?;
        z = out.x;
        let (alpha, zeta, beta, gamma) = unpack(&z, km1, p);
        state.alpha = alpha;
        state.zeta = zeta;
        state.theta.column_mut(0).assign(&ArrayView1::from(beta));
        state.theta.column_mut(1).assign(&ArrayView1::from(gamma));

        // a block
        if structure == Structure::Fused {
            for j in 0..p {
                let arg = beta[j] - gamma[j] + prev.u[j] / admm.mu_f;
                state.a[j] = soft_threshold_scalar(arg, thr_f);
            }
        }

        // B block
        for j in 0..p {
            let mut row = [
                soft_threshold_scalar(beta[j] + prev.v[[j, 0]] / admm.mu_1, thr_11),
                soft_threshold_scalar(gamma[j] + prev.v[[j, 1]] / admm.mu_1, thr_12),
            ];
            if structure == Structure::Group {
                group_soft_threshold_in_place(&mut row, thr_g);
            }
            state.b[[j, 0]] = row[0];
            state.b[[j, 1]] = row[1];
        }

        // dual ascent
        if structure == Structure::Fused {
            for j in 0..p {
                state.u[j] += admm.mu_f * (beta[j] - gamma[j] - state.a[j]);
            }
        }
        for j in 0..p {
            state.v[[j, 0]] += admm.mu_1 * (beta[j] - state.b[[j, 0]]);
            state.v[[j, 1]] += admm.mu_1 * (gamma[j] - state.b[[j, 1]]);
        }

        let res = residuals(&state, &prev, admm, structure);
        let smooth_nll = lik.screening(state.alpha, state.theta.column(0), None)
            + lik.severity(&state.zeta, state.theta.column(1), None);
        let reported = state.params();
        let reported_nll = lik.evaluate(&reported).total_nll;
        objective_trace.push(reported_nll + penalty_value(&reported, penalty));
        al_trace.push(augmented_lagrangian(
            smooth_nll, &state, penalty, admm, structure,
        ));
        primal_trace.push(res.primal);
        dual_trace.push(res.dual);

        if res.converged() && out.converged {
            converged = true;
            break;
        }
        inner_tol =
            (0.1 * res.primal.max(res.dual)).clamp(smooth.grad_tol, smooth.grad_tol.max(1e-4));
    }

    let iterations = objective_trace.len();
    Ok(FitResult {
        params: state.params(),
        objective_trace,
        augmented_lagrangian_trace: al_trace,
        primal_residual_trace: primal_trace,
        dual_residual_trace: dual_trace,
        converged,
        iterations,
        penalty: *penalty,
        admm: *admm,
    })
}
