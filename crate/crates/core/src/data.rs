//! Ordinal datasets, validation, column standardization and CSV ingestion.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{MtclmError, Result};
use crate::params::MtclmParams;

/// Predictor matrix plus an ordinal response in `0..=k_max`.
///
/// Level 0 is the healthy class, levels `1..=k_max` are increasing severity.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalDataset {
    x: Array2<f64>,
    y: Vec<usize>,
    k_max: usize,
}

/// Checks the dataset invariants on raw parts, reporting the first violation.
pub fn validate_parts(x: ArrayView2<f64>, y: &[usize], k_max: usize) -> Result<()> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(MtclmError::EmptyData(format!("x is {n}x{p}")));
    }
    if y.len() != n {
        return Err(MtclmError::DimensionMismatch(format!(
            "x has {n} rows but y has {} entries",
            y.len()
        )));
    }
    if k_max < 2 {
        return Err(MtclmError::InvalidConfig(format!(
            "K = {k_max}: at least two severity levels are required"
        )));
    }
    if let Some((index, &label)) = y.iter().enumerate().find(|(_, &l)| l > k_max) {
        return Err(MtclmError::LabelOutOfRange {
            index,
            label,
            k_max,
        });
    }
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(MtclmError::NonFinitePredictor { row, col });
        }
    }
    Ok(())
}

impl OrdinalDataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, k_max: usize) -> Result<Self> {
        validate_parts(x.view(), &y, k_max)?;
        Ok(Self { x, y, k_max })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Re-checks every invariant. Always succeeds for values built through [`OrdinalDataset::new`].
    pub fn validate(&self) -> Result<()> {
        validate_parts(self.x.view(), &self.y, self.k_max)
    }

    /// Number of observations at each level `0..=k_max`.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k_max + 1];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }

    /// Rows selected by `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let x = self.x.select(Axis(0), indices);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y, self.k_max)
    }

    /// Centers every column and scales those with nonzero spread to unit
    /// (population) standard deviation.
    pub fn standardize(&self) -> (OrdinalDataset, ScalingRecord) {
        let record = ScalingRecord::fit(self.x.view());
        let x = record.apply(self.x.view());
        let data = OrdinalDataset {
            x,
            y: self.y.clone(),
            k_max: self.k_max,
        };
        (data, record)
    }
}

/// Per-column centering and scaling, enough to map coefficients back to the
/// original predictor scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ScalingRecord {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut center = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            center.push(mean);
            scale.push(if sd > 1e-12 * mean.abs().max(1.0) {
                sd
            } else {
                1.0
            });
        }
        Self { center, scale }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            center: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.center[j], self.scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    /// Coefficients `b` on the standardized scale correspond to `b / scale`
    /// on the original scale; the intercept absorbs the centering shift.
    pub fn coefficients_to_original(&self, intercept: f64, coef: &[f64]) -> (f64, Vec<f64>) {
        let orig: Vec<f64> = coef.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let shift: f64 = orig.iter().zip(&self.center).map(|(b, m)| b * m).sum();
        (intercept - shift, orig)
    }

    pub fn params_to_original(&self, params: &MtclmParams) -> MtclmParams {
        let (alpha, beta) = self.coefficients_to_original(params.alpha, &params.beta);
        let (shift, gamma) = self.coefficients_to_original(0.0, &params.gamma);
        let zeta = params.zeta.iter().map(|z| z + shift).collect();
        MtclmParams {
            alpha,
            beta,
            zeta,
            gamma,
        }
    }
}

/// Dataset read from CSV together with its predictor column names.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub data: OrdinalDataset,
    pub predictor_names: Vec<String>,
}

/// Reads a headed CSV; `label` names the response column, every other column
/// must be numeric. `k_max` defaults to the largest observed label.
pub fn read_csv<R: Read>(reader: R, label: &str, k_max: Option<usize>) -> Result<CsvDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    let label_idx = headers
        .iter()
        .position(|h| h == label)
        .ok_or_else(|| MtclmError::Parse {
            line: 1,
            message: format!("label column '{label}' not found in header"),
        })?;
    let predictor_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut y = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        if record.len() != headers.len() {
            return Err(MtclmError::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (i, field) in record.iter().enumerate() {
            let field = field.trim();
            if i == label_idx {
                let l: usize = field.parse().map_err(|_| MtclmError::Parse {
                    line,
                    message: format!("label '{field}' is not a nonnegative integer"),
                })?;
                y.push(l);
            } else {
                let v: f64 = field.parse().map_err(|_| MtclmError::Parse {
                    line,
                    message: format!("value '{field}' in column '{}' is not numeric", headers[i]),
                })?;
                values.push(v);
            }
        }
    }
    let n = y.len();
    let p = predictor_names.len();
    let x = Array2::from_shape_vec((n, p), values)
        .map_err(|e| MtclmError::DimensionMismatch(e.to_string()))?;
    let k_max = k_max.unwrap_or_else(|| y.iter().copied().max().unwrap_or(0));
    let data = OrdinalDataset::new(x, y, k_max)?;
    Ok(CsvDataset {
        data,
        predictor_names,
    })
}

/// Reads an unlabeled predictor matrix (for prediction); a column named
/// `label` is dropped when present.
pub fn read_predictors_csv<R: Read>(
    reader: R,
    label: Option<&str>,
) -> Result<(Array2<f64>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let skip = label.and_then(|l| headers.iter().position(|h| h == l));
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        for (i, field) in record.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| MtclmError::Parse {
                line,
                message: format!("value '{field}' in column '{}' is not numeric", headers[i]),
            })?;
            values.push(v);
        }
        n += 1;
    }
    let x = Array2::from_shape_vec((n, names.len()), values)
        .map_err(|e| MtclmError::DimensionMismatch(e.to_string()))?;
    Ok((x, names))
}

fn csv_error(e: csv::Error, fallback_line: usize) -> MtclmError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    MtclmError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Writes predictors followed by the label column `y`.
pub fn write_csv<W: Write>(writer: W, data: &OrdinalDataset, names: &[String]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("y");
    wtr.write_record(&header).map_err(|e| csv_error(e, 0))?;
    for (row, label) in data.x.rows().into_iter().zip(&data.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        wtr.write_record(&rec).map_err(|e| csv_error(e, 0))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Default predictor names `x1..xp`.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}
