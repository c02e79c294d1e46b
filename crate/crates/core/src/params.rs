//! Model parameters, penalty and solver configuration, and fit results.

use serde::{Deserialize, Serialize};

use crate::error::{MtclmError, Result};

/// Screening intercept and coefficients `(alpha, beta)` plus severity
/// thresholds and coefficients `(zeta, gamma)`.
///
/// `zeta` holds the `K - 1` interior thresholds; the outer ones are the
/// implicit `-inf` and `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtclmParams {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl MtclmParams {
    /// All-zero coefficients with evenly spaced thresholds `0, 1, ..., K-2`.
    pub fn zeros(p: usize, k_max: usize) -> Self {
        Self {
            alpha: 0.0,
            beta: vec![0.0; p],
            zeta: (0..k_max.saturating_sub(1)).map(|k| k as f64).collect(),
            gamma: vec![0.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Highest severity level implied by the threshold count.
    pub fn k_max(&self) -> usize {
        self.zeta.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.gamma.len() {
            return Err(MtclmError::DimensionMismatch(format!(
                "beta has {} entries, gamma has {}",
                self.beta.len(),
                self.gamma.len()
            )));
        }
        if self.zeta.is_empty() {
            return Err(MtclmError::InvalidParams(
                "zeta must have at least one threshold".into(),
            ));
        }
        let finite = self.alpha.is_finite()
            && self
                .beta
                .iter()
                .chain(&self.zeta)
                .chain(&self.gamma)
                .all(|v| v.is_finite());
        if !finite {
            return Err(MtclmError::InvalidParams("non-finite parameter".into()));
        }
        validate_thresholds(&self.zeta)
    }
}

pub(crate) fn validate_thresholds(zeta: &[f64]) -> Result<()> {
    if let Some(k) = zeta.windows(2).position(|w| w[0] >= w[1]) {
        return Err(MtclmError::InvalidParams(format!(
            "thresholds must be strictly increasing: zeta[{k}] = {} >= zeta[{}] = {}",
            zeta[k],
            k + 1,
            zeta[k + 1]
        )));
    }
    Ok(())
}

/// Regularization strengths. At most one of the structural terms
/// (`lambda_f`, `lambda_g`) may be active.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda11: f64,
    pub lambda12: f64,
    pub lambda_f: f64,
    pub lambda_g: f64,
}

impl PenaltyConfig {
    pub fn l1(lambda11: f64, lambda12: f64) -> Self {
        Self {
            lambda11,
            lambda12,
            ..Self::default()
        }
    }

    pub fn fused(lambda11: f64, lambda12: f64, lambda_f: f64) -> Self {
        Self {
            lambda11,
            lambda12,
            lambda_f,
            lambda_g: 0.0,
        }
    }

    pub fn group(lambda11: f64, lambda12: f64, lambda_g: f64) -> Self {
        Self {
            lambda11,
            lambda12,
            lambda_f: 0.0,
            lambda_g,
        }
    }

    pub fn total(&self) -> f64 {
        self.lambda11 + self.lambda12 + self.lambda_f + self.lambda_g
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda11, self.lambda12, self.lambda_f, self.lambda_g];
        if all.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(MtclmError::InvalidConfig(format!(
                "penalties must be finite and nonnegative: {self:?}"
            )));
        }
        if self.lambda_f > 0.0 && self.lambda_g > 0.0 {
            return Err(MtclmError::InvalidConfig(
                "lambda_f and lambda_g cannot both be nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// ADMM penalty parameters and stopping tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmSettings {
    /// Penalty (and dual step) for the fused constraint `Theta d = a`.
    pub mu_f: f64,
    /// Penalty (and dual step) for the copy constraint `Theta = B`.
    pub mu_1: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            mu_f: 1.0,
            mu_1: 1.0,
            max_iter: 2000,
            eps_abs: 1e-6,
            eps_rel: 1e-5,
        }
    }
}

impl AdmmSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = self.mu_f > 0.0
            && self.mu_1 > 0.0
            && self.max_iter > 0
            && self.eps_abs > 0.0
            && self.eps_rel > 0.0;
        if !positive || self.eps_abs > 1.0 || self.eps_rel > 1.0 {
            return Err(MtclmError::InvalidConfig(format!(
                "ADMM settings out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Outcome of an ADMM fit, including per-iteration traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MtclmParams,
    /// Penalized objective at the reported parameters, one entry per outer iteration.
    pub objective_trace: Vec<f64>,
    pub augmented_lagrangian_trace: Vec<f64>,
    pub primal_residual_trace: Vec<f64>,
    pub dual_residual_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub penalty: PenaltyConfig,
    pub admm: AdmmSettings,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}
