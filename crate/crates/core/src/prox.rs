//! Soft-thresholding operators used by the auxiliary-variable updates.

use crate::error::{MtclmError, Result};

fn check_threshold(xi: f64) -> Result<()> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(MtclmError::InvalidConfig(format!(
            "threshold must be finite and nonnegative, got {xi}"
        )));
    }
    Ok(())
}

/// Scalar soft-thresholding `sign(z) (|z| - xi)_+`.
#[inline]
pub fn soft_threshold_scalar(z: f64, xi: f64) -> f64 {
    if z > xi {
        z - xi
    } else if z < -xi {
        z + xi
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding, the proximal map of `xi * ||.||_1`.
pub fn soft_threshold(z: &[f64], xi: f64) -> Result<Vec<f64>> {
    check_threshold(xi)?;
    Ok(z.iter().map(|&v| soft_threshold_scalar(v, xi)).collect())
}

/// Group soft-thresholding `(1 - xi / ||z||_2)_+ z`, the proximal map of
/// `xi * ||.||_2`. Returns zeros whenever `||z||_2 <= xi`.
pub fn group_soft_threshold(z: &[f64], xi: f64) -> Result<Vec<f64>> {
    check_threshold(xi)?;
    let mut out = z.to_vec();
    group_soft_threshold_in_place(&mut out, xi);
    Ok(out)
}

pub(crate) fn group_soft_threshold_in_place(z: &mut [f64], xi: f64) {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= xi {
        z.iter_mut().for_each(|v| *v = 0.0);
    } else if xi > 0.0 {
        let factor = 1.0 - xi / norm;
        z.iter_mut().for_each(|v| *v *= factor);
    }
}
