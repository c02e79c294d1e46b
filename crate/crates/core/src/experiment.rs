//! Simulation benchmark and convergence-trace runs.
//!
//! Every `(scenario, replicate)` pair draws one training set and one
//! independent test set of the same size; all methods see the same pair.
//! Predictors are standardized with training statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::OrdinalDataset;
use crate::error::{MtclmError, Result};
use crate::metrics::{accuracy, f1_score, kendall_tau, mae, roc_auc, selection_metrics};
use crate::model::{FitSettings, FittedModel, Method};
use crate::params::{FitResult, PenaltyConfig};
use crate::predict::{class_from_proba, screen_from_proba};
use crate::simgen::{
    generate, generate_from_truth, CoefMagnitude, GroundTruth, Scenario, ScenarioSpec,
};
use crate::tuning::{default_grid, kfold_cv, CvSpec, GridKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub coef_magnitude: CoefMagnitude,
    pub seed: u64,
    pub folds: usize,
    /// Screening cut-off on `P(Y >= 1 | x)`.
    pub threshold: f64,
    pub settings: FitSettings,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenarios: Scenario::ALL.to_vec(),
            methods: vec![
                Method::MtclmL1,
                Method::MtclmFused,
                Method::MtclmGroup,
                Method::ClmL1,
            ],
            replicates: 10,
            n: 300,
            p: 75,
            rho: 0.0,
            coef_magnitude: CoefMagnitude::Uniform,
            seed: 2024,
            folds: 5,
            threshold: 0.5,
            settings: FitSettings::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(MtclmError::InvalidConfig(
                "replicates must be at least 1".into(),
            ));
        }
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return Err(MtclmError::InvalidConfig(
                "need at least one scenario and one method".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(MtclmError::InvalidConfig(
                "threshold must lie in (0, 1)".into(),
            ));
        }
        self.spec(Scenario::Identical, 0).validate()
    }

    fn spec(&self, scenario: Scenario, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            scenario,
            n: self.n,
            p: self.p,
            rho: self.rho,
            seed,
            coef_magnitude: self.coef_magnitude,
        }
    }
}

/// One tidy output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub method: String,
    pub replicate: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFailure {
    pub scenario: String,
    pub method: String,
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub failures: Vec<BenchFailure>,
}

impl BenchOutput {
    /// Values of one metric for `(scenario, method)`, indexed by replicate.
    pub fn values(&self, scenario: Scenario, method: Method, metric: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| {
                r.scenario == scenario.name() && r.method == method.name() && r.metric == metric
            })
            .map(|r| (r.replicate, r.value))
            .collect()
    }

    pub fn mean(&self, scenario: Scenario, method: Method, metric: &str) -> f64 {
        let v: Vec<f64> = self
            .values(scenario, method, metric)
            .into_iter()
            .map(|(_, v)| v)
            .filter(|v| v.is_finite())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Metric names emitted for a method, in output order.
pub fn metric_names(method: Method) -> &'static [&'static str] {
    match method {
        Method::LogisticL1 => &["auc", "f1"],
        Method::ClmL1 => &["auc", "f1", "accuracy", "mae", "kendall_tau"],
        _ => &[
            "auc",
            "f1",
            "accuracy",
            "mae",
            "kendall_tau",
            "power",
            "fdr",
        ],
    }
}

/// Test-set metrics of a fitted model, in [`metric_names`] order.
pub fn evaluate(
    model: &FittedModel,
    test: &OrdinalDataset,
    truth: &GroundTruth,
    threshold: f64,
) -> Result<Vec<(&'static str, f64)>> {
    let probs = model.predict_proba(test.x())?;
    let labels: Vec<u8> = test.y().iter().map(|&l| u8::from(l > 0)).collect();
    let mut out = vec![
        ("auc", roc_auc(&probs.disease_scores(), &labels)?),
        (
            "f1",
            f1_score(&screen_from_proba(&probs, threshold)?, &labels)?,
        ),
    ];
    if model.method() == Method::LogisticL1 {
        return Ok(out);
    }
    let classes = class_from_proba(&probs);
    out.push(("accuracy", accuracy(&classes, test.y())?));
    out.push(("mae", mae(&classes, test.y())?));
    out.push((
        "kendall_tau",
        kendall_tau(&classes, test.y()).unwrap_or(f64::NAN),
    ));
    if let Some(params) = model.mtclm_params() {
        let sel = selection_metrics(
            &params.beta,
            &params.gamma,
            &truth.model_beta(),
            &truth.model_gamma(),
        )?;
        out.push(("power", sel.power));
        out.push(("fdr", sel.fdr));
    }
    Ok(out)
}

struct Replicate {
    train: OrdinalDataset,
    test: OrdinalDataset,
    truth: GroundTruth,
}

fn make_replicate(cfg: &BenchConfig, scenario: Scenario, rep: usize) -> Result<Replicate> {
    let s = scenario as u64;
    let (train, truth) = generate(&cfg.spec(scenario, derive_seed(cfg.seed, &[s, rep as u64, 0])))?;
    let (test, _) = generate_from_truth(&truth, derive_seed(cfg.seed, &[s, rep as u64, 1]))?;
    let (train_std, scaling) = train.standardize();
    let test_std = OrdinalDataset::new(scaling.apply(test.x()), test.y().to_vec(), test.k_max())?;
    Ok(Replicate {
        train: train_std,
        test: test_std,
        truth,
    })
}

fn run_one(
    cfg: &BenchConfig,
    rep: &Replicate,
    scenario: Scenario,
    method: Method,
    r: usize,
) -> Result<Vec<(&'static str, f64)>> {
    let cv_seed = derive_seed(cfg.seed, &[scenario as u64, r as u64, 2]);
    let spec = CvSpec {
        folds: cfg.folds,
        grid: default_grid(GridKind::for_method(method)),
        seed: cv_seed,
        stratified: true,
    };
    let cv = kfold_cv(&rep.train, method, &spec, &cfg.settings)?;
    evaluate(&cv.refit, &rep.test, &rep.truth, cfg.threshold)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let pairs: Vec<(Scenario, usize)> = cfg
        .scenarios
        .iter()
        .flat_map(|&s| (0..cfg.replicates).map(move |r| (s, r)))
        .collect();
    let results: Vec<(
        Scenario,
        usize,
        Vec<(Method, Result<Vec<(&'static str, f64)>>)>,
    )> = pairs
        .par_iter()
        .map(|&(s, r)| {
            let per_method = match make_replicate(cfg, s, r) {
                Ok(rep) => cfg
                    .methods
                    .par_iter()
                    .map(|&m| (m, run_one(cfg, &rep, s, m, r)))
                    .collect(),
                Err(e) => {
                    let msg = e.to_string();
                    cfg.methods
                        .iter()
                        .map(|&m| (m, Err(MtclmError::InvalidConfig(msg.clone()))))
                        .collect()
                }
            };
            (s, r, per_method)
        })
        .collect();

    let mut out = BenchOutput::default();
    for (s, r, per_method) in results {
        for (m, res) in per_method {
            match res {
                Ok(metrics) => out
                    .rows
                    .extend(metrics.into_iter().map(|(name, value)| BenchRow {
                        scenario: s.name().into(),
                        method: m.name().into(),
                        replicate: r,
                        metric: name.into(),
                        value,
                    })),
                Err(e) => out.failures.push(BenchFailure {
                    scenario: s.name().into(),
                    method: m.name().into(),
                    replicate: r,
                    error: e.to_string(),
                }),
            }
        }
    }
    Ok(out)
}

pub fn write_bench_csv<W: std::io::Write>(writer: W, rows: &[BenchRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row).map_err(|e| MtclmError::Io(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Penalties of the convergence-trace experiment for a multi-task method.
pub fn trace_penalty(method: Method) -> Result<PenaltyConfig> {
    Ok(match method {
        Method::MtclmL1 => PenaltyConfig::l1(0.05, 0.05),
        Method::MtclmFused => PenaltyConfig::fused(0.05, 0.05, 0.01),
        Method::MtclmGroup => PenaltyConfig::group(0.05, 0.05, 0.01),
        _ => {
            return Err(MtclmError::InvalidConfig(format!(
                "trace is only defined for multi-task methods, got {method}"
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub settings: FitSettings,
}

impl TraceConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            n: 300,
            p: 75,
            seed,
            settings: FitSettings::default(),
        }
    }
}

/// Fits one multi-task model on standardized `Similar` data, unit ADMM
/// penalty parameters, and returns its per-iteration traces.
pub fn run_trace(cfg: &TraceConfig) -> Result<FitResult> {
    let penalty = trace_penalty(cfg.method)?;
    let (data, _) = generate(&ScenarioSpec::new(
        Scenario::Similar,
        cfg.n,
        cfg.p,
        cfg.seed,
    ))?;
    let (data, _) = data.standardize();
    match crate::model::fit_method(cfg.method, &data, &penalty, &cfg.settings, None)? {
        FittedModel::Mtclm { fit, .. } => Ok(fit),
        FittedModel::Baseline(_) => unreachable!("trace_penalty admits multi-task methods only"),
    }
}

/// Largest relative change of the augmented Lagrangian over the last
/// `window` iterations.
pub fn trailing_relative_change(trace: &[f64], window: usize) -> f64 {
    let m = trace.len();
    if m < 2 {
        return f64::NAN;
    }
    let start = m.saturating_sub(window).max(1);
    (start..m)
        .map(|i| ((trace[i] - trace[i - 1]) / trace[i - 1].abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max)
}
