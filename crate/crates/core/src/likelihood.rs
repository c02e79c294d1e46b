//! Negative log-likelihood of the two sub-models and its analytic gradient.
//!
//! Both blocks are scaled by `1/n` with `n` the full number of observations,
//! so `total = screening + severity` is `-(1/n)` times the joint log-likelihood.
//! Interval probabilities `sigma(b) - sigma(a)` are evaluated in the log domain
//! and floored at `1e-300`.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::OrdinalDataset;
use crate::error::{MtclmError, Result};
use crate::params::{validate_thresholds, MtclmParams};

/// Smallest probability allowed inside a logarithm.
pub const PROB_FLOOR: f64 = 1e-300;

fn log_floor() -> f64 {
    PROB_FLOOR.ln()
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(t))`, exact for `t = +-inf`.
pub fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

/// `log(1 - exp(d))` for `d <= 0`.
fn log1m_exp(d: f64) -> f64 {
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// `log(sigmoid(hi) - sigmoid(lo))` for `lo < hi`, either end possibly infinite.
///
/// Uses `sigmoid(b) - sigmoid(a) = sigmoid(b) sigmoid(-a) (1 - exp(a - b))`.
pub fn log_interval_prob(lo: f64, hi: f64) -> f64 {
    let v = log_sigmoid(hi) + log_sigmoid(-lo) + log1m_exp(lo - hi);
    if v.is_nan() {
        log_floor()
    } else {
        v.max(log_floor())
    }
}

/// Logistic density `sigmoid(t) (1 - sigmoid(t))` in the log domain.
fn log_density(t: f64) -> f64 {
    log_sigmoid(t) + log_sigmoid(-t)
}

/// Lower and upper cut points for severity level `k >= 1`.
#[inline]
fn bounds(zeta: &[f64], k: usize) -> (f64, f64) {
    let lo = if k == 1 {
        f64::NEG_INFINITY
    } else {
        zeta[k - 2]
    };
    let hi = if k - 1 == zeta.len() {
        f64::INFINITY
    } else {
        zeta[k - 1]
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodValue {
    pub screening_nll: f64,
    pub severity_nll: f64,
    pub total_nll: f64,
}

/// Precomputed views for repeated likelihood evaluation on one dataset.
///
/// Severity terms only involve rows with `y >= 1`; those rows are copied out
/// once so each evaluation touches the patient rows only.
#[derive(Debug, Clone)]
pub struct Likelihood<'a> {
    x: ArrayView2<'a, f64>,
    healthy: Array1<f64>,
    x_sev: ndarray::Array2<f64>,
    y_sev: Vec<usize>,
    n: usize,
    k_max: usize,
}

impl<'a> Likelihood<'a> {
    pub fn new(data: &'a OrdinalDataset) -> Self {
        Self::from_parts(data.x(), data.y(), data.k_max())
    }

    /// Unvalidated constructor; `k_max` may be 1 for binary data.
    pub(crate) fn from_parts(x: ArrayView2<'a, f64>, y: &[usize], k_max: usize) -> Self {
        let healthy = y.iter().map(|&l| if l == 0 { 1.0 } else { 0.0 }).collect();
        let sev_rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] >= 1).collect();
        let x_sev = x.select(Axis(0), &sev_rows);
        let y_sev = sev_rows.iter().map(|&i| y[i]).collect();
        Self {
            x,
            healthy,
            x_sev,
            y_sev,
            n: y.len(),
            k_max,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Screening block value; when `grad` is given, writes `d/dalpha` and `d/dbeta`.
    pub fn screening(
        &self,
        alpha: f64,
        beta: ArrayView1<f64>,
        grad: Option<(&mut f64, &mut [f64])>,
    ) -> f64 {
        let eta = self.x.dot(&beta);
        let inv_n = 1.0 / self.n as f64;
        let mut value = 0.0;
        let mut resid = Array1::<f64>::zeros(self.n);
        for i in 0..self.n {
            let t = alpha + eta[i];
            let healthy = self.healthy[i];
            value -= if healthy > 0.0 {
                log_sigmoid(t)
            } else {
                log_sigmoid(-t)
            };
            resid[i] = sigmoid(t) - healthy;
        }
        if let Some((ga, gb)) = grad {
            *ga = resid.sum() * inv_n;
            let g = self.x.t().dot(&resid);
            for (dst, src) in gb.iter_mut().zip(g.iter()) {
                *dst = src * inv_n;
            }
        }
        value * inv_n
    }

    /// Severity block value; when `grad` is given, writes `d/dzeta` and `d/dgamma`.
    pub fn severity(
        &self,
        zeta: &[f64],
        gamma: ArrayView1<f64>,
        grad: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        let inv_n = 1.0 / self.n as f64;
        let m = self.y_sev.len();
        if m == 0 {
            if let Some((gz, gg)) = grad {
                gz.iter_mut().for_each(|v| *v = 0.0);
                gg.iter_mut().for_each(|v| *v = 0.0);
            }
            return 0.0;
        }
        let eta = self.x_sev.dot(&gamma);
        let mut value = 0.0;
        match grad {
            None => {
                for (i, &k) in self.y_sev.iter().enumerate() {
                    let (lo, hi) = bounds(zeta, k);
                    value -= log_interval_prob(lo + eta[i], hi + eta[i]);
                }
            }
            Some((gz, gg)) => {
                gz.iter_mut().for_each(|v| *v = 0.0);
                let mut d_eta = Array1::<f64>::zeros(m);
                for (i, &k) in self.y_sev.iter().enumerate() {
                    let (lo, hi) = bounds(zeta, k);
                    let (a, b) = (lo + eta[i], hi + eta[i]);
                    let log_p = log_interval_prob(a, b);
                    value -= log_p;
                    // d log p / db and d log p / da
                    let w_hi = (log_density(b) - log_p).exp();
                    let w_lo = -(log_density(a) - log_p).exp();
                    if k - 1 < zeta.len() {
                        gz[k - 1] -= w_hi;
                    }
                    if k >= 2 {
                        gz[k - 2] -= w_lo;
                    }
                    d_eta[i] = -(w_hi + w_lo);
                }
                gz.iter_mut().for_each(|v| *v *= inv_n);
                let g = self.x_sev.t().dot(&d_eta);
                for (dst, src) in gg.iter_mut().zip(g.iter()) {
                    *dst = src * inv_n;
                }
            }
        }
        value * inv_n
    }

    pub fn evaluate(&self, params: &MtclmParams) -> LikelihoodValue {
        let s = self.screening(params.alpha, ArrayView1::from(&params.beta), None);
        let v = self.severity(&params.zeta, ArrayView1::from(&params.gamma), None);
        LikelihoodValue {
            screening_nll: s,
            severity_nll: v,
            total_nll: s + v,
        }
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(MtclmError::DimensionMismatch(format!(
            "{name} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

fn check_severity(data: &OrdinalDataset, zeta: &[f64], gamma: &[f64]) -> Result<()> {
    check_len("gamma", gamma.len(), data.p())?;
    check_len("zeta", zeta.len(), data.k_max() - 1)?;
    validate_thresholds(zeta)
}

pub fn screening_nll(data: &OrdinalDataset, alpha: f64, beta: &[f64]) -> Result<f64> {
    check_len("beta", beta.len(), data.p())?;
    Ok(Likelihood::new(data).screening(alpha, ArrayView1::from(beta), None))
}

pub fn severity_nll(data: &OrdinalDataset, zeta: &[f64], gamma: &[f64]) -> Result<f64> {
    check_severity(data, zeta, gamma)?;
    Ok(Likelihood::new(data).severity(zeta, ArrayView1::from(gamma), None))
}

pub fn total_nll(data: &OrdinalDataset, params: &MtclmParams) -> Result<LikelihoodValue> {
    check_len("beta", params.beta.len(), data.p())?;
    check_severity(data, &params.zeta, &params.gamma)?;
    Ok(Likelihood::new(data).evaluate(params))
}

pub fn grad_screening(data: &OrdinalDataset, alpha: f64, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("beta", beta.len(), data.p())?;
    let mut ga = 0.0;
    let mut gb = vec![0.0; beta.len()];
    Likelihood::new(data).screening(alpha, ArrayView1::from(beta), Some((&mut ga, &mut gb)));
    Ok((ga, gb))
}

pub fn grad_severity(
    data: &OrdinalDataset,
    zeta: &[f64],
    gamma: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_severity(data, zeta, gamma)?;
    let mut gz = vec![0.0; zeta.len()];
    let mut gg = vec![0.0; gamma.len()];
    Likelihood::new(data).severity(zeta, ArrayView1::from(gamma), Some((&mut gz, &mut gg)));
    Ok((gz, gg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    fn one_row(y: usize, k_max: usize) -> OrdinalDataset {
        OrdinalDataset::new(array![[0.3]], vec![y], k_max).unwrap()
    }

    #[test]
    fn screening_at_zero_is_log_two() {
        let d = one_row(0, 3);
        assert_relative_eq!(
            screening_nll(&d, 0.0, &[0.0]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        let d = OrdinalDataset::new(array![[1.0], [2.0]], vec![0, 1], 3).unwrap();
        assert_relative_eq!(
            screening_nll(&d, 0.0, &[0.0]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn severity_lowest_level() {
        let d = one_row(1, 3);
        let v = severity_nll(&d, &[0.0, 1.0], &[0.0]).unwrap();
        assert_relative_eq!(v, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn severity_middle_level() {
        let d = one_row(2, 3);
        let v = severity_nll(&d, &[0.0, 1.0], &[0.0]).unwrap();
        let direct = -(1.0 / (1.0 + (-1f64).exp()) - 0.5f64).ln();
        assert_relative_eq!(v, direct, epsilon = 1e-14);
        assert_relative_eq!(v, 1.465084, epsilon = 1e-6);
    }

    #[test]
    fn healthy_only_has_zero_severity() {
        let d = one_row(0, 3);
        assert_eq!(severity_nll(&d, &[0.0, 1.0], &[2.0]).unwrap(), 0.0);
        let (gz, gg) = grad_severity(&d, &[0.0, 1.0], &[2.0]).unwrap();
        assert!(gz.iter().chain(&gg).all(|v| *v == 0.0));
    }

    #[test]
    fn screening_gradient_examples() {
        let (ga, _) = grad_screening(&one_row(0, 3), 0.0, &[0.0]).unwrap();
        assert_relative_eq!(ga, -0.5, epsilon = 1e-15);
        let d = OrdinalDataset::new(array![[1.0], [2.0]], vec![0, 1], 3).unwrap();
        let (ga, _) = grad_screening(&d, 0.0, &[0.0]).unwrap();
        assert_eq!(ga, 0.0);
    }

    #[test]
    fn severity_gradient_example() {
        let d = one_row(1, 2);
        let (gz, _) = grad_severity(&d, &[0.0], &[0.0]).unwrap();
        assert_relative_eq!(gz[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_increasing_thresholds() {
        let d = one_row(1, 3);
        assert!(severity_nll(&d, &[1.0, 1.0], &[0.0]).is_err());
        assert!(grad_severity(&d, &[2.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let d = one_row(1, 3);
        assert!(screening_nll(&d, 0.0, &[0.0, 1.0]).is_err());
        assert!(severity_nll(&d, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn finite_for_large_linear_predictors() {
        let x = Array2::from_shape_vec((4, 1), vec![500.0, -500.0, 500.0, -500.0]).unwrap();
        let d = OrdinalDataset::new(x, vec![0, 1, 3, 2], 3).unwrap();
        let p = MtclmParams {
            alpha: 0.0,
            beta: vec![1.0],
            zeta: vec![-1.0, 1.0],
            gamma: vec![1.0],
        };
        let v = total_nll(&d, &p).unwrap();
        assert!(v.total_nll.is_finite());
        let (gz, gg) = grad_severity(&d, &p.zeta, &p.gamma).unwrap();
        assert!(gz.iter().chain(&gg).all(|g| g.is_finite()));
    }

    #[test]
    fn interval_prob_matches_direct_difference() {
        for &(a, b) in &[(-2.0, 0.5), (0.0, 1.0), (3.0, 3.5), (-30.0, -29.0)] {
            let direct = (sigmoid(b) - sigmoid(a)).ln();
            assert_relative_eq!(log_interval_prob(a, b), direct, max_relative = 1e-9);
        }
        assert_relative_eq!(log_interval_prob(f64::NEG_INFINITY, 0.0), 0.5f64.ln());
        assert_eq!(log_interval_prob(f64::NEG_INFINITY, f64::INFINITY), 0.0);
    }
}
