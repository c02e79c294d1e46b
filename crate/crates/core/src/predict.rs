//! Category probabilities and class decisions from fitted parameters.
//!
//! `P(Y = 0 | x) = sigmoid(alpha + x'beta)` and, for `k >= 1`,
//! `P(Y = k | x) = (1 - P(Y = 0 | x)) (sigmoid(zeta_k + x'gamma) - sigmoid(zeta_{k-1} + x'gamma))`.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{MtclmError, Result};
use crate::likelihood::{log_interval_prob, sigmoid};
use crate::params::MtclmParams;

/// `n x (K + 1)` matrix of category probabilities, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryProbabilities(pub Array2<f64>);

impl CategoryProbabilities {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn levels(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    /// `P(Y >= 1 | x)` per row.
    pub fn disease_scores(&self) -> Vec<f64> {
        self.0.rows().into_iter().map(|r| 1.0 - r[0]).collect()
    }

    /// Cumulative probabilities `P(Y <= k | x)` per row.
    pub fn cumulative(&self) -> Array2<f64> {
        let mut out = self.0.clone();
        for mut row in out.rows_mut() {
            let mut acc = 0.0;
            for v in row.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        out
    }
}

/// Probabilities of levels `0..=K` for each row of `x`.
pub fn predict_proba(params: &MtclmParams, x: ArrayView2<f64>) -> Result<CategoryProbabilities> {
    params.validate()?;
    if x.ncols() != params.p() {
        return Err(MtclmError::DimensionMismatch(format!(
            "x has {} columns, model has {} coefficients",
            x.ncols(),
            params.p()
        )));
    }
    let k_max = params.k_max();
    let screen = x.dot(&ArrayView1::from(&params.beta));
    let sev = x.dot(&ArrayView1::from(&params.gamma));
    let mut probs = Array2::zeros((x.nrows(), k_max + 1));
    for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
        let p0 = sigmoid(params.alpha + screen[i]);
        row[0] = p0;
        let diseased = sigmoid(-(params.alpha + screen[i]));
        for k in 1..=k_max {
            let lo = if k == 1 {
                f64::NEG_INFINITY
            } else {
                params.zeta[k - 2]
            };
            let hi = if k == k_max {
                f64::INFINITY
            } else {
                params.zeta[k - 1]
            };
            let cond = log_interval_prob(lo + sev[i], hi + sev[i]).exp();
            row[k] = diseased * cond;
        }
    }
    Ok(CategoryProbabilities(probs))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MtclmError::InvalidConfig(format!(
            "screening threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(())
}

/// Screening decisions from precomputed probabilities: diseased (1) iff
/// `1 - P(Y = 0) >= threshold`.
pub fn screen_from_proba(probs: &CategoryProbabilities, threshold: f64) -> Result<Vec<u8>> {
    check_threshold(threshold)?;
    Ok(probs
        .disease_scores()
        .into_iter()
        .map(|s| u8::from(s >= threshold))
        .collect())
}

pub fn predict_screen(params: &MtclmParams, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
    check_threshold(threshold)?;
    screen_from_proba(&predict_proba(params, x)?, threshold)
}

/// Argmax level per row; ties go to the lower level.
pub fn class_from_proba(probs: &CategoryProbabilities) -> Vec<usize> {
    probs
        .0
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn predict_class(params: &MtclmParams, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    Ok(class_from_proba(&predict_proba(params, x)?))
}
