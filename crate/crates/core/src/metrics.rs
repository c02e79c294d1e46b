//! Prediction and variable-selection measures.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{MtclmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub mae: f64,
    pub kendall_tau: f64,
    pub power: f64,
    pub fdr: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

fn check_binary(labels: &[u8]) -> Result<()> {
    if labels.iter().any(|&l| l > 1) {
        return Err(MtclmError::InvalidConfig(
            "binary labels must be 0 or 1".into(),
        ));
    }
    Ok(())
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(MtclmError::DimensionMismatch(format!(
            "length mismatch: {a} vs {b}"
        )));
    }
    Ok(())
}

/// Area under the ROC curve in its Mann-Whitney form; tied scores count 1/2.
///
/// Computed from mid-ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    check_binary(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MtclmError::InvalidConfig("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MtclmError::Undefined(
            "AUC undefined: both classes must be present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share their mean
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_block = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count();
        rank_sum_pos += mid_rank * pos_in_block as f64;
        start = end;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// `2 TP / (2 TP + FP + FN)`, zero when the denominator is zero.
pub fn f1_score(pred: &[u8], truth: &[u8]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    check_binary(pred)?;
    check_binary(truth)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    Ok(if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    })
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(MtclmError::EmptyData("no predictions".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Mean absolute difference of ordinal levels treated as integers.
pub fn mae(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(MtclmError::EmptyData("no predictions".into()));
    }
    let total: usize = pred.iter().zip(truth).map(|(&a, &b)| a.abs_diff(b)).sum();
    Ok(total as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TauVariant {
    /// `(C - D) / (n (n - 1) / 2)`.
    A,
    /// Tie-corrected `(C - D) / sqrt((n0 - n1)(n0 - n2))`.
    #[default]
    B,
}

/// Kendall rank correlation, tau-b by default.
pub fn kendall_tau<T: PartialOrd + Copy>(a: &[T], b: &[T]) -> Result<f64> {
    kendall_tau_variant(a, b, TauVariant::B)
}

/// Knight's `O(n log n)` algorithm: sort by `(a, b)`, then count the
/// exchanges a merge sort on `b` needs; each exchange is a discordant pair.
pub fn kendall_tau_variant<T: PartialOrd + Copy>(
    a: &[T],
    b: &[T],
    variant: TauVariant,
) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    let n = a.len();
    if n < 2 {
        return Err(MtclmError::Undefined(
            "tau undefined: need at least two observations".into(),
        ));
    }
    let cmp = |x: &T, y: &T| x.partial_cmp(y).unwrap_or(Ordering::Equal);
    let mut pairs: Vec<(T, T)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| cmp(&x.0, &y.0).then_with(|| cmp(&x.1, &y.1)));

    let run_pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let mut ties_a = 0u64;
    let mut ties_ab = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && cmp(&pairs[j].0, &pairs[i].0) == Ordering::Equal {
            j += 1;
        }
        ties_a += run_pairs((j - i) as u64);
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && cmp(&pairs[l].1, &pairs[k].1) == Ordering::Equal {
                l += 1;
            }
            ties_ab += run_pairs((l - k) as u64);
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let mut buf = ys.clone();
    let swaps = merge_count(&mut ys, &mut buf, &cmp);

    let mut ties_b = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && cmp(&ys[j], &ys[i]) == Ordering::Equal {
            j += 1;
        }
        ties_b += run_pairs((j - i) as u64);
        i = j;
    }

    let n0 = run_pairs(n as u64);
    if ties_a == n0 || ties_b == n0 {
        return Err(MtclmError::Undefined(
            "tau undefined: one of the vectors is constant".into(),
        ));
    }
    let numer = n0 as f64 - ties_a as f64 - ties_b as f64 + ties_ab as f64 - 2.0 * swaps as f64;
    Ok(match variant {
        TauVariant::A => numer / n0 as f64,
        TauVariant::B => numer / (((n0 - ties_a) as f64) * ((n0 - ties_b) as f64)).sqrt(),
    })
}

/// Stable merge sort returning the number of inversions (strictly greater
/// elements moved past smaller ones).
fn merge_count<T: Copy, F: Fn(&T, &T) -> Ordering>(v: &mut [T], buf: &mut [T], cmp: &F) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo, cmp) + merge_count(hi, bhi, cmp)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(&v[j], &v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub power: f64,
    pub fdr: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Selection measures for one coefficient vector; a coefficient is selected
/// iff it is not exactly zero.
pub fn selection_metrics_single(estimated: &[f64], truth: &[f64]) -> Result<SelectionMetrics> {
    selection_metrics_pooled(&[(estimated, truth)])
}

/// Selection measures over the pooled screening and severity positions.
pub fn selection_metrics(
    beta_hat: &[f64],
    gamma_hat: &[f64],
    beta_true: &[f64],
    gamma_true: &[f64],
) -> Result<SelectionMetrics> {
    selection_metrics_pooled(&[(beta_hat, beta_true), (gamma_hat, gamma_true)])
}

fn selection_metrics_pooled(blocks: &[(&[f64], &[f64])]) -> Result<SelectionMetrics> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (est, truth) in blocks {
        check_lengths(est.len(), truth.len())?;
        for (&e, &t) in est.iter().zip(truth.iter()) {
            match (e != 0.0, t != 0.0) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
    }
    let power = ratio(tp, tp + fn_);
    Ok(SelectionMetrics {
        power,
        fdr: ratio(fp, tp + fp),
        sensitivity: power,
        specificity: ratio(tn, tn + fp),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    })
}
