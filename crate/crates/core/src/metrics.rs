//! Estimation accuracy: normalized Frobenius error, support F1 and percentile
//! summaries.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::threshold_support;

/// `||truth - estimate||_F^2 / ||truth||_F^2`.
pub fn nfe(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Shape(format!("estimate {:?} vs truth {:?}", estimate.shape(), truth.shape())));
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((truth - estimate).norm_squared() / denom)
}

/// Which entries take part in support comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positions {
    /// Skip the diagonal (instantaneous weights).
    OffDiagonal,
    /// Every entry (lag coefficients, pooled over lags).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision, recall and F1 of the thresholded supports. Empty denominators
/// give 0.
pub fn support_f1(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, tau: f64, positions: Positions) -> Result<F1Score> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Shape(format!("estimate {:?} vs truth {:?}", estimate.shape(), truth.shape())));
    }
    let est = threshold_support(estimate, tau);
    let tru = threshold_support(truth, tau);
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for j in 0..est.ncols() {
        for i in 0..est.nrows() {
            if positions == Positions::OffDiagonal && i == j {
                continue;
            }
            match (est[(i, j)], tru[(i, j)]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(F1Score { f1, precision, recall })
}

/// Median with the 25th and 75th percentiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

/// Inclusive linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        median: percentile_sorted(&sorted, 0.5),
        p25: percentile_sorted(&sorted, 0.25),
        p75: percentile_sorted(&sorted, 0.75),
    })
}

/// Accuracy of one estimate against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `None` when the reference `W*` is zero.
    pub nfe_w: Option<f64>,
    /// `None` when the reference `A*` is zero or empty.
    pub nfe_a: Option<f64>,
    pub f1_w: f64,
    pub precision_w: f64,
    pub recall_w: f64,
    pub f1_a: f64,
    pub precision_a: f64,
    pub recall_a: f64,
}

impl MetricsReport {
    /// `a_hat` and `a_true` are the stacked `(n*p) x n` lag matrices.
    pub fn compute(
        w_hat: &DMatrix<f64>,
        a_hat: &DMatrix<f64>,
        w_true: &DMatrix<f64>,
        a_true: &DMatrix<f64>,
        tau: f64,
    ) -> Result<Self> {
        let optional = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::ZeroReference) => Ok(None),
            Err(e) => Err(e),
        };
        let fw = support_f1(w_hat, w_true, tau, Positions::OffDiagonal)?;
        let fa = support_f1(a_hat, a_true, tau, Positions::All)?;
        Ok(Self {
            nfe_w: optional(nfe(w_hat, w_true))?,
            nfe_a: optional(nfe(a_hat, a_true))?,
            f1_w: fw.f1,
            precision_w: fw.precision,
            recall_w: fw.recall,
            f1_a: fa.f1,
            precision_a: fa.precision,
            recall_a: fa.recall,
        })
    }

    /// `(name, value)` pairs in a fixed order; undefined NFEs are skipped.
    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::with_capacity(8);
        if let Some(v) = self.nfe_w {
            out.push(("nfe_w", v));
        }
        if let Some(v) = self.nfe_a {
            out.push(("nfe_a", v));
        }
        out.extend([
            ("f1_w", self.f1_w),
            ("precision_w", self.precision_w),
            ("recall_w", self.recall_w),
            ("f1_a", self.f1_a),
            ("precision_a", self.precision_a),
            ("recall_a", self.recall_a),
        ]);
        out
    }
}
