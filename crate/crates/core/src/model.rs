//! Method selection, a common interface over fitted models, and the JSON
//! model artifact.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::admm::{fit_fused, fit_group};
use crate::baselines::{fit_clm_l1, fit_logistic_l1, BaselineFit, BaselineKind, IstaSettings};
use crate::data::{OrdinalDataset, ScalingRecord};
use crate::error::{MtclmError, Result};
use crate::likelihood::Likelihood;
use crate::params::{AdmmSettings, FitResult, MtclmParams, PenaltyConfig};
use crate::predict::{predict_proba, CategoryProbabilities};
use crate::smooth::SmoothSolveSettings;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MtclmL1,
    MtclmFused,
    MtclmGroup,
    LogisticL1,
    ClmL1,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MtclmL1,
        Method::MtclmFused,
        Method::MtclmGroup,
        Method::LogisticL1,
        Method::ClmL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MtclmL1 => "mtclm-l1",
            Method::MtclmFused => "mtclm-fused",
            Method::MtclmGroup => "mtclm-group",
            Method::LogisticL1 => "logistic-l1",
            Method::ClmL1 => "clm-l1",
        }
    }

    pub fn is_mtclm(self) -> bool {
        matches!(
            self,
            Method::MtclmL1 | Method::MtclmFused | Method::MtclmGroup
        )
    }

    /// Rejects penalty values the method has no use for. Baselines read their
    /// single lambda from `lambda11`.
    pub fn check_penalty(self, penalty: &PenaltyConfig) -> Result<()> {
        penalty.validate()?;
        let bad = match self {
            Method::MtclmL1 => (penalty.lambda_f != 0.0)
                .then_some("lambda_f")
                .or((penalty.lambda_g != 0.0).then_some("lambda_g")),
            Method::MtclmFused => (penalty.lambda_g != 0.0).then_some("lambda_g"),
            Method::MtclmGroup => (penalty.lambda_f != 0.0).then_some("lambda_f"),
            Method::LogisticL1 | Method::ClmL1 => (penalty.lambda12 != 0.0)
                .then_some("lambda12")
                .or((penalty.lambda_f != 0.0).then_some("lambda_f"))
                .or((penalty.lambda_g != 0.0).then_some("lambda_g")),
        };
        match bad {
            Some(name) => Err(MtclmError::InvalidConfig(format!(
                "method {} does not accept a nonzero {name}",
                self.name()
            ))),
            None => Ok(()),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = MtclmError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| MtclmError::InvalidConfig(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver settings for every method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitSettings {
    pub admm: AdmmSettings,
    pub smooth: SmoothSolveSettings,
    pub ista: IstaSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FittedModel {
    Mtclm { method: Method, fit: FitResult },
    Baseline(BaselineFit),
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Mtclm { method, .. } => *method,
            FittedModel::Baseline(b) => match b.kind {
                BaselineKind::LogisticL1 => Method::LogisticL1,
                BaselineKind::ClmL1 => Method::ClmL1,
            },
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            FittedModel::Mtclm { fit, .. } => fit.converged,
            FittedModel::Baseline(b) => b.converged,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            FittedModel::Mtclm { fit, .. } => fit.iterations,
            FittedModel::Baseline(b) => b.iterations,
        }
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<CategoryProbabilities> {
        match self {
            FittedModel::Mtclm { fit, .. } => predict_proba(&fit.params, x),
            FittedModel::Baseline(b) => b.predict_proba(x),
        }
    }

    /// `(1/m)` times the negative log-likelihood of `data`.
    pub fn heldout_nll(&self, data: &OrdinalDataset) -> Result<f64> {
        match self {
            FittedModel::Mtclm { fit, .. } => {
                Ok(Likelihood::new(data).evaluate(&fit.params).total_nll)
            }
            FittedModel::Baseline(b) => b.heldout_nll(data.x(), data.y()),
        }
    }

    /// Multi-task parameters, if this is a multi-task fit.
    pub fn mtclm_params(&self) -> Option<&MtclmParams> {
        match self {
            FittedModel::Mtclm { fit, .. } => Some(&fit.params),
            FittedModel::Baseline(_) => None,
        }
    }
}

/// Fits `method` with `penalty`, optionally warm-started from an earlier fit
/// of the same method.
pub fn fit_method(
    method: Method,
    data: &OrdinalDataset,
    penalty: &PenaltyConfig,
    settings: &FitSettings,
    init: Option<&FittedModel>,
) -> Result<FittedModel> {
    method.check_penalty(penalty)?;
    let warm_params = init.and_then(|m| m.mtclm_params());
    let warm_baseline = match init {
        Some(FittedModel::Baseline(b)) => Some(b),
        _ => None,
    };
    Ok(match method {
        Method::MtclmL1 | Method::MtclmGroup => FittedModel::Mtclm {
            method,
            fit: fit_group(data, penalty, &settings.admm, &settings.smooth, warm_params)?,
        },
        Method::MtclmFused => FittedModel::Mtclm {
            method,
            fit: fit_fused(data, penalty, &settings.admm, &settings.smooth, warm_params)?,
        },
        Method::LogisticL1 => FittedModel::Baseline(fit_logistic_l1(
            data.x(),
            data.y(),
            penalty.lambda11,
            &settings.ista,
            warm_baseline,
        )?),
        Method::ClmL1 => FittedModel::Baseline(fit_clm_l1(
            data.x(),
            data.y(),
            data.k_max(),
            penalty.lambda11,
            &settings.ista,
            warm_baseline,
        )?),
    })
}

/// Coefficients of one fitted model in a scale-independent layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelParams {
    Mtclm(MtclmParams),
    /// Logistic `[alpha]` or CLM thresholds, with one coefficient vector;
    /// `logit P(Y <= k | x) = intercepts[k] + x'coefficients`.
    Baseline {
        intercepts: Vec<f64>,
        coefficients: Vec<f64>,
    },
}

impl ModelParams {
    pub fn from_fitted(model: &FittedModel) -> Self {
        match model {
            FittedModel::Mtclm { fit, .. } => ModelParams::Mtclm(fit.params.clone()),
            FittedModel::Baseline(b) => ModelParams::Baseline {
                intercepts: b.intercepts.clone(),
                coefficients: b.coefficients.clone(),
            },
        }
    }

    fn to_original(&self, scaling: &ScalingRecord) -> Self {
        match self {
            ModelParams::Mtclm(p) => ModelParams::Mtclm(scaling.params_to_original(p)),
            ModelParams::Baseline {
                intercepts,
                coefficients,
            } => {
                let mut coef = Vec::new();
                let ints = intercepts
                    .iter()
                    .map(|&t| {
                        let (i, c) = scaling.coefficients_to_original(t, coefficients);
                        coef = c;
                        i
                    })
                    .collect();
                ModelParams::Baseline {
                    intercepts: ints,
                    coefficients: coef,
                }
            }
        }
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<CategoryProbabilities> {
        match self {
            ModelParams::Mtclm(p) => predict_proba(p, x),
            ModelParams::Baseline {
                intercepts,
                coefficients,
            } => BaselineFit {
                kind: if intercepts.len() == 1 {
                    BaselineKind::LogisticL1
                } else {
                    BaselineKind::ClmL1
                },
                lambda: 0.0,
                intercepts: intercepts.clone(),
                coefficients: coefficients.clone(),
                objective_trace: Vec::new(),
                iterations: 0,
                converged: true,
                kkt_satisfied: true,
            }
            .predict_proba(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_primal_residual: Option<f64>,
    pub final_dual_residual: Option<f64>,
    pub kkt_satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedVariable {
    pub name: String,
    /// `screening`, `severity`, or `shared` (nonzero in both tasks); `all`
    /// for single-coefficient baselines.
    pub task: String,
    /// Coefficients on the original predictor scale.
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub method: Method,
    pub predictor_names: Vec<String>,
    pub label: String,
    pub k_max: usize,
    pub penalty: PenaltyConfig,
    pub settings: FitSettings,
    pub standardized: bool,
    pub scaling: ScalingRecord,
    /// Parameters on the scale the model was fitted on.
    pub params_fitted_scale: ModelParams,
    pub params_original_scale: ModelParams,
    pub diagnostics: Diagnostics,
    pub selected: Vec<SelectedVariable>,
    /// Sign convention of the coefficients.
    pub orientation: String,
}

impl ModelArtifact {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &FittedModel,
        predictor_names: Vec<String>,
        label: &str,
        k_max: usize,
        penalty: PenaltyConfig,
        settings: FitSettings,
        standardized: bool,
        scaling: ScalingRecord,
    ) -> Self {
        let fitted = ModelParams::from_fitted(model);
        let original = fitted.to_original(&scaling);
        let diagnostics = match model {
            FittedModel::Mtclm { fit, .. } => Diagnostics {
                converged: fit.converged,
                iterations: fit.iterations,
                final_objective: fit.final_objective(),
                final_primal_residual: fit.primal_residual_trace.last().copied(),
                final_dual_residual: fit.dual_residual_trace.last().copied(),
                kkt_satisfied: None,
            },
            FittedModel::Baseline(b) => Diagnostics {
                converged: b.converged,
                iterations: b.iterations,
                final_objective: b.objective_trace.last().copied().unwrap_or(f64::NAN),
                final_primal_residual: None,
                final_dual_residual: None,
                kkt_satisfied: Some(b.kkt_satisfied),
            },
        };
        let selected = selected_variables(&original, &predictor_names);
        let orientation = match model {
            FittedModel::Mtclm { .. } => {
                "logit P(Y=0|x) = alpha + x'beta; logit P(Y<=k|Y>=1,x) = zeta_k + x'gamma"
            }
            FittedModel::Baseline(_) => "logit P(Y<=k|x) = intercepts[k] + x'coefficients",
        };
        Self {
            schema_version: SCHEMA_VERSION,
            method: model.method(),
            predictor_names,
            label: label.to_string(),
            k_max,
            penalty,
            settings,
            standardized,
            scaling,
            params_fitted_scale: fitted,
            params_original_scale: original,
            diagnostics,
            selected,
            orientation: orientation.to_string(),
        }
    }

    /// Predicts from raw (unscaled) predictors using the fitted-scale
    /// parameters, exactly as at fit time.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<CategoryProbabilities> {
        if x.ncols() != self.predictor_names.len() {
            return Err(MtclmError::DimensionMismatch(format!(
                "expected {} predictors, got {}",
                self.predictor_names.len(),
                x.ncols()
            )));
        }
        self.params_fitted_scale
            .predict_proba(self.scaling.apply(x).view())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let artifact: Self = serde_json::from_str(s)?;
        if artifact.schema_version != SCHEMA_VERSION {
            return Err(MtclmError::InvalidConfig(format!(
                "unsupported model schema version {}",
                artifact.schema_version
            )));
        }
        Ok(artifact)
    }
}

fn selected_variables(params: &ModelParams, names: &[String]) -> Vec<SelectedVariable> {
    match params {
        ModelParams::Mtclm(p) => names
            .iter()
            .enumerate()
            .filter_map(|(j, name)| {
                let (b, g) = (p.beta[j], p.gamma[j]);
                let task = match (b != 0.0, g != 0.0) {
                    (true, true) => "shared",
                    (true, false) => "screening",
                    (false, true) => "severity",
                    (false, false) => return None,
                };
                Some(SelectedVariable {
                    name: name.clone(),
                    task: task.into(),
                    beta: Some(b),
                    gamma: Some(g),
                })
            })
            .collect(),
        ModelParams::Baseline { coefficients, .. } => names
            .iter()
            .zip(coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(name, &c)| SelectedVariable {
                name: name.clone(),
                task: "all".into(),
                beta: Some(c),
                gamma: None,
            })
            .collect(),
    }
}

/// Screening scores `P(Y >= 1 | x)` for convenience.
pub fn disease_scores(probs: &CategoryProbabilities) -> Vec<f64> {
    probs.disease_scores()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, Scenario, ScenarioSpec};

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }

    #[test]
    fn incompatible_penalties_rejected() {
        assert!(Method::MtclmFused
            .check_penalty(&PenaltyConfig::group(0.1, 0.1, 0.1))
            .is_err());
        assert!(Method::MtclmGroup
            .check_penalty(&PenaltyConfig::fused(0.1, 0.1, 0.1))
            .is_err());
        assert!(Method::MtclmL1
            .check_penalty(&PenaltyConfig::fused(0.1, 0.1, 0.1))
            .is_err());
        assert!(Method::ClmL1
            .check_penalty(&PenaltyConfig::l1(0.1, 0.1))
            .is_err());
        assert!(Method::ClmL1
            .check_penalty(&PenaltyConfig::l1(0.1, 0.0))
            .is_ok());
    }

    #[test]
    fn artifact_json_roundtrip_is_bit_exact() {
        let (d, _) = generate(&ScenarioSpec::new(Scenario::Similar, 120, 20, 4)).unwrap();
        let (ds, scaling) = d.standardize();
        let names = crate::data::default_names(20);
        for (method, pen) in [
            (Method::MtclmFused, PenaltyConfig::fused(0.05, 0.05, 0.01)),
            (Method::ClmL1, PenaltyConfig::l1(0.05, 0.0)),
        ] {
            let model = fit_method(method, &ds, &pen, &FitSettings::default(), None).unwrap();
            let art = ModelArtifact::new(
                &model,
                names.clone(),
                "y",
                3,
                pen,
                FitSettings::default(),
                true,
                scaling.clone(),
            );
            let back = ModelArtifact::from_json(&art.to_json().unwrap()).unwrap();
            assert_eq!(art, back);
            let a = art.predict_proba(d.x()).unwrap();
            let b = back.predict_proba(d.x()).unwrap();
            assert_eq!(a, b);
            let direct = model.predict_proba(ds.x()).unwrap();
            assert_eq!(a, direct);
        }
    }

    #[test]
    fn original_scale_params_predict_the_same() {
        let (d, _) = generate(&ScenarioSpec::new(Scenario::Identical, 100, 20, 2)).unwrap();
        let (ds, scaling) = d.standardize();
        let model = fit_method(
            Method::MtclmGroup,
            &ds,
            &PenaltyConfig::group(0.02, 0.02, 0.01),
            &FitSettings::default(),
            None,
        )
        .unwrap();
        let art = ModelArtifact::new(
            &model,
            crate::data::default_names(20),
            "y",
            3,
            model_penalty(&model),
            FitSettings::default(),
            true,
            scaling,
        );
        let a = art.predict_proba(d.x()).unwrap();
        let b = art.params_original_scale.predict_proba(d.x()).unwrap();
        for (u, v) in a.0.iter().zip(b.0.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    fn model_penalty(m: &FittedModel) -> PenaltyConfig {
        match m {
            FittedModel::Mtclm { fit, .. } => fit.penalty,
            FittedModel::Baseline(b) => PenaltyConfig::l1(b.lambda, 0.0),
        }
    }
}
