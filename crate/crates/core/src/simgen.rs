//! Synthetic ordinal data with a known hierarchical structure.
//!
//! Two latent scores `Y* = X b + e*` and `Y** = X g + e**` (standard logistic
//! errors) are cut at empirical quantiles: the lower half of `Y*` is level 0,
//! the remaining rows are split into three equal groups by `Y**`. The
//! `Parallel` scenario uses `Y*` alone, cut at its 50, 66.7 and 83.3 percent
//! points.
//!
//! Larger latent scores mean more disease, so the fitted screening and
//! severity coefficients estimate the negated latent coefficients.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::OrdinalDataset;
use crate::error::{MtclmError, Result};

/// Smallest `p` that holds every scenario's signal indices.
pub const MIN_P: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Parallel,
    Identical,
    AlmostInverse,
    Similar,
    AlmostIndependent,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Parallel,
        Scenario::Identical,
        Scenario::AlmostInverse,
        Scenario::Similar,
        Scenario::AlmostIndependent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Parallel => "parallel",
            Scenario::Identical => "identical",
            Scenario::AlmostInverse => "almost-inverse",
            Scenario::Similar => "similar",
            Scenario::AlmostIndependent => "almost-independent",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = MtclmError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.to_ascii_lowercase())
            .ok_or_else(|| MtclmError::InvalidConfig(format!("unknown scenario '{s}'")))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How absolute values of the signal coefficients are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefMagnitude {
    /// Independent `U(0.75, 1.25)` draws for every signal of every task.
    Uniform,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    /// Toeplitz correlation `rho^|i-j|` between predictors.
    pub rho: f64,
    pub seed: u64,
    pub coef_magnitude: CoefMagnitude,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize, p: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            p,
            rho: 0.0,
            seed,
            coef_magnitude: CoefMagnitude::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < MIN_P {
            return Err(MtclmError::InvalidConfig(format!(
                "p must be at least {MIN_P}, got {}",
                self.p
            )));
        }
        if self.n < 4 {
            return Err(MtclmError::InvalidConfig(format!(
                "n must be at least 4, got {}",
                self.n
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(MtclmError::InvalidConfig(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if let CoefMagnitude::Fixed(m) = self.coef_magnitude {
            if !(m.is_finite() && m > 0.0) {
                return Err(MtclmError::InvalidConfig(format!(
                    "fixed magnitude must be positive, got {m}"
                )));
            }
        }
        Ok(())
    }
}

/// Signed support of one latent coefficient vector: `(0-based index, sign)`.
pub type SignedSupport = Vec<(usize, f64)>;

fn signed(pos: &[usize], neg: &[usize]) -> SignedSupport {
    // indices as written are 1-based
    let mut out: SignedSupport = pos
        .iter()
        .map(|&i| (i - 1, 1.0))
        .chain(neg.iter().map(|&i| (i - 1, -1.0)))
        .collect();
    out.sort_by_key(|e| e.0);
    out
}

/// Latent `(Y*, Y**)` supports and signs for a scenario.
pub fn scenario_support(scenario: Scenario, p: usize) -> Result<(SignedSupport, SignedSupport)> {
    if p < MIN_P {
        return Err(MtclmError::InvalidConfig(format!(
            "p must be at least {MIN_P}, got {p}"
        )));
    }
    let screen = signed(&[1, 2, 3, 4, 5], &[6, 7, 8, 9, 10]);
    let severity = match scenario {
        Scenario::Parallel | Scenario::Identical => screen.clone(),
        Scenario::AlmostInverse => signed(&[1, 7, 8, 9, 10], &[2, 3, 4, 5, 6]),
        Scenario::Similar => signed(&[1, 2, 3, 5, 11], &[6, 7, 8, 10, 12]),
        Scenario::AlmostIndependent => signed(&[1, 11, 12, 13, 14], &[6, 15, 16, 17, 18]),
    };
    Ok((screen, severity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: ScenarioSpec,
    /// Coefficients of `Y*`.
    pub beta_latent: Vec<f64>,
    /// Coefficients of `Y**` (equal to `beta_latent` for `Parallel`).
    pub gamma_latent: Vec<f64>,
    /// Realized cut points on `Y*` (one, or three for `Parallel`).
    pub screening_cuts: Vec<f64>,
    /// Realized cut points on `Y**` among diseased rows (empty for `Parallel`).
    pub severity_cuts: Vec<f64>,
}

impl GroundTruth {
    /// Coefficients on the fitted model's scale, `-beta_latent`.
    pub fn model_beta(&self) -> Vec<f64> {
        self.beta_latent.iter().map(|v| -v).collect()
    }

    pub fn model_gamma(&self) -> Vec<f64> {
        self.gamma_latent.iter().map(|v| -v).collect()
    }
}

/// Latent draws behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraws {
    pub y_star: Vec<f64>,
    /// Empty for `Parallel`.
    pub y_star2: Vec<f64>,
}

/// Lower Cholesky factor of the `p x p` Toeplitz matrix `rho^|i-j|`.
pub fn toeplitz_cholesky(p: usize, rho: f64) -> Array2<f64> {
    let mut a = Array2::from_shape_fn((p, p), |(i, j)| rho.powi(i.abs_diff(j) as i32));
    for j in 0..p {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        let d = d.max(0.0).sqrt();
        a[[j, j]] = d;
        for i in j + 1..p {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = if d > 0.0 { s / d } else { 0.0 };
        }
        for k in j + 1..p {
            a[[j, k]] = 0.0;
        }
    }
    a
}

fn logistic_noise(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.sample(Open01);
    (u / (1.0 - u)).ln()
}

fn draw_coefficients(
    support: &SignedSupport,
    p: usize,
    mag: CoefMagnitude,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for &(j, sign) in support {
        let m = match mag {
            CoefMagnitude::Uniform => rng.gen_range(0.75..1.25),
            CoefMagnitude::Fixed(m) => m,
        };
        out[j] = sign * m;
    }
    out
}

/// Indices of `values` in ascending order (ties by index).
fn ascending(values: &[f64], idx: &[usize]) -> Vec<usize> {
    let mut order = idx.to_vec();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Assigns levels `base, base + 1, ...` to the rows in `idx` ordered by
/// `values`, using cumulative counts `round(m c)` for each cumulative share
/// `c`. Returns the realized cut values (midpoints between neighbours).
fn quantile_split(
    values: &[f64],
    idx: &[usize],
    shares: &[f64],
    base: usize,
    y: &mut [usize],
) -> Vec<f64> {
    let order = ascending(values, idx);
    let m = order.len();
    let mut bounds: Vec<usize> = shares
        .iter()
        .map(|c| (m as f64 * c).round() as usize)
        .collect();
    bounds.push(m);
    let mut start = 0;
    let mut cuts = Vec::with_capacity(shares.len());
    for (level, &end) in bounds.iter().enumerate() {
        for &i in &order[start..end.max(start)] {
            y[i] = base + level;
        }
        if level < shares.len() && end > 0 && end < m {
            cuts.push(0.5 * (values[order[end - 1]] + values[order[end]]));
        }
        start = end.max(start);
    }
    cuts
}

pub fn generate(spec: &ScenarioSpec) -> Result<(OrdinalDataset, GroundTruth)> {
    generate_with_latent(spec).map(|(d, g, _)| (d, g))
}

/// Like [`generate`] but also returns the latent draws.
pub fn generate_with_latent(
    spec: &ScenarioSpec,
) -> Result<(OrdinalDataset, GroundTruth, LatentDraws)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (screen, severity) = scenario_support(spec.scenario, spec.p)?;
    let beta = draw_coefficients(&screen, spec.p, spec.coef_magnitude, &mut rng);
    let gamma = if spec.scenario == Scenario::Parallel {
        beta.clone()
    } else {
        draw_coefficients(&severity, spec.p, spec.coef_magnitude, &mut rng)
    };
    simulate(spec, beta, gamma, &mut rng)
}

/// A fresh dataset (new predictors and noise drawn from `seed`) under the
/// coefficients of an existing ground truth, e.g. an independent test set.
pub fn generate_from_truth(
    truth: &GroundTruth,
    seed: u64,
) -> Result<(OrdinalDataset, GroundTruth)> {
    let spec = ScenarioSpec { seed, ..truth.spec };
    spec.validate()?;
    if truth.beta_latent.len() != spec.p || truth.gamma_latent.len() != spec.p {
        return Err(MtclmError::DimensionMismatch(
            "ground truth does not match its spec".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate(
        &spec,
        truth.beta_latent.clone(),
        truth.gamma_latent.clone(),
        &mut rng,
    )
    .map(|(d, g, _)| (d, g))
}

fn simulate(
    spec: &ScenarioSpec,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<(OrdinalDataset, GroundTruth, LatentDraws)> {
    let (n, p) = (spec.n, spec.p);
    let z = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    let x = if spec.rho == 0.0 {
        z
    } else {
        z.dot(&toeplitz_cholesky(p, spec.rho).t())
    };

    let lin = |c: &[f64]| -> Vec<f64> { x.dot(&ndarray::ArrayView1::from(c)).to_vec() };
    let mut y_star = lin(&beta);
    y_star.iter_mut().for_each(|v| *v += logistic_noise(rng));

    let all: Vec<usize> = (0..n).collect();
    let mut y = vec![0usize; n];
    let (screening_cuts, severity_cuts, y_star2) = if spec.scenario == Scenario::Parallel {
        let cuts = quantile_split(&y_star, &all, &[0.5, 2.0 / 3.0, 5.0 / 6.0], 0, &mut y);
        (cuts, Vec::new(), Vec::new())
    } else {
        let mut y2 = lin(&gamma);
        y2.iter_mut().for_each(|v| *v += logistic_noise(rng));
        let screen_cut = quantile_split(&y_star, &all, &[0.5], 0, &mut y);
        let diseased: Vec<usize> = all.iter().copied().filter(|&i| y[i] >= 1).collect();
        let sev_cuts = quantile_split(&y2, &diseased, &[1.0 / 3.0, 2.0 / 3.0], 1, &mut y);
        (screen_cut, sev_cuts, y2)
    };

    let data = OrdinalDataset::new(x, y, 3)?;
    let truth = GroundTruth {
        spec: *spec,
        beta_latent: beta,
        gamma_latent: gamma,
        screening_cuts,
        severity_cuts,
    };
    Ok((data, truth, LatentDraws { y_star, y_star2 }))
}

/// Writes the ground truth as pretty JSON.
pub fn write_ground_truth<W: std::io::Write>(writer: W, truth: &GroundTruth) -> Result<()> {
    serde_json::to_writer_pretty(writer, truth)?;
    Ok(())
}
