//! DYNOTEARS-style comparison method: the trace-exponential acyclicity
//! `tr(exp(W ∘ W)) - n` over signed weights, driven by the same multiplier
//! loop and inner solver as the log-det method.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::LaggedDesign;
use crate::solver::{run_multiplier_loop, AcyclicityConstraint, LoopParams, SolverConfig, SolverResult};

/// Solver settings for the baseline. Mirrors [`SolverConfig`] without the
/// spectral bound; weights may take either sign.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub alpha0: f64,
    pub c0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub max_outer: usize,
    pub h_tol: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub tau: f64,
    pub accelerate: bool,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self::from(&SolverConfig::default())
    }
}

impl From<&SolverConfig> for BaselineConfig {
    fn from(cfg: &SolverConfig) -> Self {
        Self {
            lambda_w: cfg.lambda_w,
            lambda_a: cfg.lambda_a,
            alpha0: cfg.alpha0,
            c0: cfg.c0,
            beta: cfg.beta,
            gamma: cfg.gamma,
            max_outer: cfg.max_outer,
            h_tol: cfg.h_tol,
            inner_tol: cfg.inner_tol,
            max_inner: cfg.max_inner,
            tau: cfg.tau,
            accelerate: cfg.accelerate,
            seed: cfg.seed,
        }
    }
}

impl BaselineConfig {
    fn loop_params(&self) -> LoopParams {
        LoopParams {
            lambda_w: self.lambda_w,
            lambda_a: self.lambda_a,
            alpha0: self.alpha0,
            c0: self.c0,
            beta: self.beta,
            gamma: self.gamma,
            max_outer: self.max_outer,
            h_tol: self.h_tol,
            inner_tol: self.inner_tol,
            max_inner: self.max_inner,
            tau: self.tau,
            signed_a: true,
            accelerate: self.accelerate,
        }
    }
}

/// `exp(M) - I` by scaling and squaring of a truncated Taylor series.
///
/// Working with `exp(M) - I` keeps full relative precision when `M` is close
/// to nilpotent, which is exactly the regime near a DAG.
pub fn expm_minus_identity(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert!(m.is_square(), "matrix exponential needs a square matrix");
    let norm = (0..n).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0i32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = m / 2f64.powi(squarings);

    // F = sum_{k>=1} S^k / k!
    let mut term = scaled.clone();
    let mut f = scaled.clone();
    for k in 2..=40 {
        term = (&term * &scaled) / k as f64;
        f += &term;
        if term.amax() <= 1e-18 * f.amax().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // (I + F)^2 - I = 2F + F^2
    for _ in 0..squarings {
        f = &f * 2.0 + &f * &f;
    }
    f
}

/// `tr(exp(W ∘ W)) - n`.
pub fn h_notears(w: &DMatrix<f64>) -> f64 {
    let sq = w.component_mul(w);
    expm_minus_identity(&sq).trace().max(0.0)
}

/// `exp(W ∘ W)ᵀ ∘ 2W`.
pub fn h_notears_gradient(w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut e = expm_minus_identity(&w.component_mul(w));
    for i in 0..e.nrows() {
        e[(i, i)] += 1.0;
    }
    e.transpose().component_mul(&(w * 2.0))
}

/// Trace-exponential constraint over signed `W`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NotearsConstraint;

impl AcyclicityConstraint for NotearsConstraint {
    /// `exp(W ∘ W)`.
    type Cache = DMatrix<f64>;

    fn nonnegative_w(&self) -> bool {
        false
    }

    fn value(&self, w: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
        let mut e = expm_minus_identity(&w.component_mul(w));
        let h = e.trace().max(0.0);
        if !h.is_finite() {
            return None;
        }
        for i in 0..e.nrows() {
            e[(i, i)] += 1.0;
        }
        Some((h, e))
    }

    fn gradient(&self, w: &DMatrix<f64>, cache: &DMatrix<f64>) -> DMatrix<f64> {
        cache.transpose().component_mul(&(w * 2.0))
    }
}

/// Multiplier loop with the trace-exponential constraint, signed weights and
/// l1 penalties. Thresholding and cycle breaking match [`crate::solver::learn`].
pub fn learn_baseline(design: &LaggedDesign, cfg: &BaselineConfig) -> Result<SolverResult> {
    run_multiplier_loop(design, &NotearsConstraint, &cfg.loop_params())
}
