//! Method of multipliers around a projected (proximal) gradient inner solver.
//!
//! The outer loop alternates a warm-started minimization of the augmented
//! Lagrangian, the multiplier ascent `alpha += c h(W)` and a conditional
//! penalty increase `c *= beta`. The inner solver works on the stacked
//! parameters `[W; A]` and is shared with the trace-exponential baseline through
//! [`AcyclicityConstraint`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acyclicity::MMatrixFactor;
use crate::error::{Error, Result};
use crate::model::{is_dag, threshold_support, LaggedDesign, LaggedWeights};
use crate::objective::{MultiplierState, Penalties, Problem};

/// Sufficient-decrease constant of the Armijo test.
const ARMIJO_SIGMA: f64 = 1e-4;
/// Backtracking shrink factor.
const STEP_SHRINK: f64 = 0.5;
/// Largest trial step.
const MAX_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-18;

/// Hyperparameters of the multiplier loop and the inner solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Spectral bound of the log-det acyclicity function.
    pub s: f64,
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub alpha0: f64,
    pub c0: f64,
    /// Penalty growth factor, `> 1`.
    pub beta: f64,
    /// Required violation decrease factor, in `(0, 1)`.
    pub gamma: f64,
    pub max_outer: usize,
    pub h_tol: f64,
    /// Relative decrease of the augmented Lagrangian that stops the inner solver.
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Support threshold applied to the final `W`.
    pub tau: f64,
    pub signed_a: bool,
    /// Nesterov extrapolation with monotone restarts in the inner solver.
    pub accelerate: bool,
    /// Seed for randomized warm starts ([`random_feasible_start`]).
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            s: 1.0,
            lambda_w: 0.01,
            lambda_a: 0.02,
            alpha0: 0.0,
            c0: 0.1,
            beta: 10.0,
            gamma: 0.25,
            max_outer: 50,
            h_tol: 1e-8,
            inner_tol: 1e-10,
            max_inner: 5000,
            tau: 0.05,
            signed_a: false,
            accelerate: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        self.loop_params().validate()
    }

    pub fn penalties(&self) -> Penalties {
        Penalties { lambda_w: self.lambda_w, lambda_a: self.lambda_a, signed_a: self.signed_a }
    }

    pub(crate) fn loop_params(&self) -> LoopParams {
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
            signed_a: self.signed_a,
            accelerate: self.accelerate,
        }
    }
}

/// Everything the multiplier loop needs apart from the constraint itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LoopParams {
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
    pub signed_a: bool,
    pub accelerate: bool,
}

impl LoopParams {
    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.beta > 1.0) {
            return bad(format!("beta must exceed 1, got {}", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.h_tol > 0.0 && self.inner_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.tau >= 0.0) {
            return bad(format!("tau must be non-negative, got {}", self.tau));
        }
        if !(self.c0 > 0.0) || !(self.alpha0 >= 0.0) {
            return bad(format!("need c0 > 0 and alpha0 >= 0, got c0 = {}, alpha0 = {}", self.c0, self.alpha0));
        }
        if self.max_inner == 0 {
            return bad("max_inner must be at least 1".into());
        }
        Penalties::new(self.lambda_w, self.lambda_a)?;
        Ok(())
    }

    fn penalties(&self) -> Penalties {
        Penalties { lambda_w: self.lambda_w, lambda_a: self.lambda_a, signed_a: self.signed_a }
    }
}

/// A smooth acyclicity penalty usable by the multiplier loop.
pub trait AcyclicityConstraint {
    /// Data kept from a value evaluation so the gradient can reuse it.
    type Cache;

    /// Whether `W` is restricted to the non-negative orthant.
    fn nonnegative_w(&self) -> bool;

    /// `h(W)`, or `None` outside the constraint's domain.
    fn value(&self, w: &DMatrix<f64>) -> Option<(f64, Self::Cache)>;

    fn gradient(&self, w: &DMatrix<f64>, cache: &Self::Cache) -> DMatrix<f64>;
}

/// The log-det function `N log s - log det(sI - W)` over `W >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct LogDetConstraint {
    pub s: f64,
}

impl AcyclicityConstraint for LogDetConstraint {
    type Cache = MMatrixFactor;

    fn nonnegative_w(&self) -> bool {
        true
    }

    fn value(&self, w: &DMatrix<f64>) -> Option<(f64, MMatrixFactor)> {
        let f = MMatrixFactor::factor_unchecked(w, self.s)?;
        Some((f.h(), f))
    }

    fn gradient(&self, _w: &DMatrix<f64>, cache: &MMatrixFactor) -> DMatrix<f64> {
        cache.inverse_transpose()
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxOuterReached,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxOuterReached => "max_outer_reached",
        }
    }
}

/// Diagnostics for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    /// Score (least squares plus l1) at the new iterate.
    pub score: f64,
    pub h: f64,
    /// Augmented Lagrangian value at the end of the inner solve.
    pub lagrangian: f64,
    /// Multiplier and penalty used by the inner solve.
    pub alpha: f64,
    pub c: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Thresholded instantaneous weights; the support is always acyclic.
    pub w_hat: DMatrix<f64>,
    pub a_hat: LaggedWeights,
    /// `W^(K)` before thresholding.
    pub w_raw: DMatrix<f64>,
    /// Acyclicity value of `W^(K)` before thresholding.
    pub h_final: f64,
    pub objective_trace: Vec<OuterRecord>,
    pub termination: Termination,
    /// Edges dropped after thresholding to break remaining cycles.
    pub removed_edges: Vec<(usize, usize)>,
}

impl SolverResult {
    pub fn outer_iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// Output of one inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub iterations: usize,
    /// Augmented Lagrangian at every accepted iterate, starting with the warm start.
    pub values: Vec<f64>,
}

impl InnerResult {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("values always holds the warm start")
    }
}

/// `alpha + c h_new`.
pub fn multiplier_update(alpha: f64, c: f64, h_new: f64) -> f64 {
    alpha + c * h_new
}

/// `beta c` when the violation did not shrink by `gamma`, otherwise `c`.
pub fn penalty_update(c: f64, h_new: f64, h_old: f64, beta: f64, gamma: f64) -> f64 {
    if h_new > gamma * h_old {
        beta * c
    } else {
        c
    }
}

/// Evaluated iterate of the inner solver.
struct Point<C> {
    theta: DMatrix<f64>,
    gtheta: DMatrix<f64>,
    h: f64,
    cache: C,
    /// Least squares plus acyclicity penalty.
    smooth: f64,
    /// l1 terms.
    nonsmooth: f64,
}

impl<C> Point<C> {
    fn total(&self) -> f64 {
        self.smooth + self.nonsmooth
    }
}

pub(crate) struct InnerSolver<'a, K: AcyclicityConstraint> {
    problem: &'a Problem,
    constraint: &'a K,
    pen: Penalties,
    mult: MultiplierState,
    tol: f64,
    max_iter: usize,
    accelerate: bool,
}

impl<'a, K: AcyclicityConstraint> InnerSolver<'a, K> {
    fn evaluate(&self, theta: DMatrix<f64>) -> Option<Point<K::Cache>> {
        let n = self.problem.n();
        let w = theta.rows(0, n).into_owned();
        let (h, cache) = self.constraint.value(&w)?;
        let gtheta = self.problem.gram_product(&theta);
        let smooth = self.problem.data_value_with(&theta, &gtheta) + self.mult.penalty(h).0;
        let nonsmooth = self.problem.l1_value(&theta, &self.pen);
        if !(smooth.is_finite() && nonsmooth.is_finite()) {
            return None;
        }
        Some(Point { theta, gtheta, h, cache, smooth, nonsmooth })
    }

    fn gradient(&self, pt: &Point<K::Cache>) -> DMatrix<f64> {
        let n = self.problem.n();
        let mut g = self.problem.data_gradient_with(&pt.gtheta);
        let scale = self.mult.penalty(pt.h).1;
        if scale != 0.0 {
            let w = pt.theta.rows(0, n).into_owned();
            let gh = self.constraint.gradient(&w, &pt.cache);
            let mut top = g.rows_mut(0, n);
            top.zip_apply(&gh, |gi, hi| *gi += scale * hi);
        }
        g
    }

    /// Proximal map of the l1 terms plus the sign constraints, with the
    /// diagonal of `W` pinned to zero.
    fn prox(&self, v: &mut DMatrix<f64>, step: f64) {
        let n = self.problem.n();
        let nonneg_w = self.constraint.nonnegative_w();
        let (tw, ta) = (step * self.pen.lambda_w, step * self.pen.lambda_a);
        let signed_a = self.pen.signed_a;
        for j in 0..n {
            for i in 0..v.nrows() {
                let x = v[(i, j)];
                v[(i, j)] = if i < n {
                    if i == j {
                        0.0
                    } else if nonneg_w {
                        (x - tw).max(0.0)
                    } else {
                        soft_threshold(x, tw)
                    }
                } else if signed_a {
                    soft_threshold(x, ta)
                } else {
                    (x - ta).max(0.0)
                };
            }
        }
    }

    fn project(&self, v: &mut DMatrix<f64>) {
        let n = self.problem.n();
        let nonneg_w = self.constraint.nonnegative_w();
        let signed_a = self.pen.signed_a;
        for j in 0..n {
            for i in 0..v.nrows() {
                let x = &mut v[(i, j)];
                if i < n {
                    if i == j {
                        *x = 0.0;
                    } else if nonneg_w {
                        *x = x.max(0.0);
                    }
                } else if !signed_a {
                    *x = x.max(0.0);
                }
            }
        }
    }

    /// Armijo backtracking from `base` along the proximal gradient path.
    fn backtrack(
        &self,
        base: &Point<K::Cache>,
        grad: &DMatrix<f64>,
        mut step: f64,
    ) -> Option<(Point<K::Cache>, f64)> {
        while step >= MIN_STEP {
            let mut trial = &base.theta - grad * step;
            self.prox(&mut trial, step);
            // trial points leaving the domain count as Armijo failures
            if let Some(pt) = self.evaluate(trial) {
                let decrease = grad.dot(&(&pt.theta - &base.theta)) + pt.nonsmooth - base.nonsmooth;
                if pt.total() <= base.total() + ARMIJO_SIGMA * decrease {
                    return Some((pt, step));
                }
            }
            step *= STEP_SHRINK;
        }
        None
    }

    fn run(&self, theta0: DMatrix<f64>) -> Result<(DMatrix<f64>, usize, Vec<f64>)> {
        let mut start = theta0;
        self.project(&mut start);
        let mut x = self
            .evaluate(start)
            .ok_or_else(|| Error::InfeasibleStart("warm start lies outside the acyclicity domain".into()))?;
        let mut x_grad = Some(self.gradient(&x));
        let mut x_prev = x.theta.clone();
        let mut values = vec![x.total()];
        let mut momentum = 1.0_f64;
        let mut step = MAX_STEP;
        let mut iterations = 0;

        while iterations < self.max_iter {
            iterations += 1;

            let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_momentum;
            let extrapolated = if self.accelerate && beta > 0.0 {
                let mut y = &x.theta + (&x.theta - &x_prev) * beta;
                self.project(&mut y);
                self.evaluate(y)
            } else {
                None
            };

            let trial_step = (2.0 * step).min(MAX_STEP);
            let mut from_extrapolation = false;
            let mut accepted = None;
            if let Some(y) = extrapolated {
                let gy = self.gradient(&y);
                if let Some((cand, t)) = self.backtrack(&y, &gy, trial_step) {
                    if cand.total() <= x.total() {
                        accepted = Some((cand, t));
                        from_extrapolation = true;
                    }
                }
            }
            if accepted.is_none() {
                // plain step from the current iterate; restarts the momentum
                momentum = 1.0;
                let gx = x_grad.take().unwrap_or_else(|| self.gradient(&x));
                accepted = self.backtrack(&x, &gx, trial_step);
            } else {
                momentum = next_momentum;
            }

            let Some((cand, t)) = accepted else {
                break;
            };
            step = t;
            let previous = x.total();
            let rel = (previous - cand.total()) / previous.abs().max(f64::MIN_POSITIVE);
            x_prev = std::mem::replace(&mut x, cand).theta;
            x_grad = None;
            values.push(x.total());

            if rel < self.tol {
                if from_extrapolation {
                    momentum = 1.0;
                } else {
                    break;
                }
            }
        }
        Ok((x.theta, iterations, values))
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub(crate) fn inner_minimize_with<K: AcyclicityConstraint>(
    problem: &Problem,
    constraint: &K,
    theta0: DMatrix<f64>,
    params: &LoopParams,
    mult: MultiplierState,
) -> Result<(DMatrix<f64>, usize, Vec<f64>)> {
    InnerSolver {
        problem,
        constraint,
        pen: params.penalties(),
        mult,
        tol: params.inner_tol,
        max_iter: params.max_inner,
        accelerate: params.accelerate,
    }
    .run(theta0)
}

/// Approximately minimizes the augmented Lagrangian over `W >= 0` (and `A >= 0`
/// unless `cfg.signed_a`) from the warm start `(w0, a0)`.
pub fn inner_minimize(
    w0: &DMatrix<f64>,
    a0: &DMatrix<f64>,
    design: &LaggedDesign,
    mult: &MultiplierState,
    cfg: &SolverConfig,
) -> Result<InnerResult> {
    cfg.validate()?;
    let problem = Problem::new(design);
    check_warm_start(&problem, w0, a0, cfg)?;
    let constraint = LogDetConstraint { s: cfg.s };
    let theta0 = problem.stack(w0, a0);
    let (theta, iterations, values) = inner_minimize_with(&problem, &constraint, theta0, &cfg.loop_params(), *mult)?;
    let (w, a) = problem.split(&theta);
    Ok(InnerResult { w, a, iterations, values })
}

fn check_warm_start(problem: &Problem, w0: &DMatrix<f64>, a0: &DMatrix<f64>, cfg: &SolverConfig) -> Result<()> {
    let n = problem.n();
    if w0.shape() != (n, n) || a0.shape() != (n * problem.p(), n) {
        return Err(Error::Shape(format!(
            "warm start shapes {:?} and {:?} do not match n = {n}, p = {}",
            w0.shape(),
            a0.shape(),
            problem.p()
        )));
    }
    if w0.iter().any(|&v| v < 0.0) || (!cfg.signed_a && a0.iter().any(|&v| v < 0.0)) {
        return Err(Error::InfeasibleStart("negative entries in warm start".into()));
    }
    if MMatrixFactor::factor_unchecked(w0, cfg.s).is_none() {
        return Err(Error::InfeasibleStart(format!("spectral radius of W0 not below s = {}", cfg.s)));
    }
    Ok(())
}

/// Runs the multiplier loop from `W = 0, A = 0` and returns thresholded estimates.
pub fn learn(design: &LaggedDesign, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    run_multiplier_loop(design, &LogDetConstraint { s: cfg.s }, &cfg.loop_params())
}

pub(crate) fn run_multiplier_loop<K: AcyclicityConstraint>(
    design: &LaggedDesign,
    constraint: &K,
    params: &LoopParams,
) -> Result<SolverResult> {
    params.validate()?;
    let problem = Problem::new(design);
    let (n, p) = (problem.n(), problem.p());
    let pen = params.penalties();

    let mut theta = DMatrix::zeros(n * (p + 1), n);
    let mut alpha = params.alpha0;
    let mut c = params.c0;
    let mut h_old = constraint.value(&DMatrix::zeros(n, n)).map(|(h, _)| h).unwrap_or(0.0);
    let mut trace = Vec::new();
    let mut termination = Termination::MaxOuterReached;

    for _ in 0..params.max_outer {
        let mult = MultiplierState { alpha, c };
        let (next, iterations, values) = inner_minimize_with(&problem, constraint, theta, params, mult)?;
        theta = next;
        let w = theta.rows(0, n).into_owned();
        let h_new = constraint
            .value(&w)
            .map(|(h, _)| h)
            .ok_or_else(|| Error::InfeasibleStart("inner solution left the domain".into()))?;
        let score = problem.data_value(&theta) + problem.l1_value(&theta, &pen);
        trace.push(OuterRecord {
            score,
            h: h_new,
            lagrangian: *values.last().unwrap(),
            alpha,
            c,
            inner_iterations: iterations,
        });
        alpha = multiplier_update(alpha, c, h_new);
        c = penalty_update(c, h_new, h_old, params.beta, params.gamma);
        h_old = h_new;
        if h_new <= params.h_tol {
            termination = Termination::Converged;
            break;
        }
    }

    let (w_raw, a_raw) = problem.split(&theta);
    let h_final = constraint.value(&w_raw).map(|(h, _)| h).unwrap_or(f64::INFINITY);
    let mut w_hat = w_raw.map(|v| if v.abs() > params.tau { v } else { 0.0 });
    let removed_edges = break_cycles(&mut w_hat);
    let a_hat = LaggedWeights::from_stacked(n, &a_raw)?;
    Ok(SolverResult { w_hat, a_hat, w_raw, h_final, objective_trace: trace, termination, removed_edges })
}

/// Removes the smallest-magnitude edge of some remaining cycle until the
/// support is acyclic. Returns the removed edges in order.
pub fn break_cycles(w: &mut DMatrix<f64>) -> Vec<(usize, usize)> {
    let mut removed = Vec::new();
    loop {
        let support = threshold_support(w, 0.0);
        if is_dag(&support) {
            return removed;
        }
        let cycle = find_cycle(&support).expect("non-DAG support has a cycle");
        let &(i, j) = cycle
            .iter()
            .min_by(|a, b| w[**a].abs().total_cmp(&w[**b].abs()).then(a.cmp(b)))
            .expect("cycles are non-empty");
        w[(i, j)] = 0.0;
        removed.push((i, j));
    }
}

/// Edges of one directed cycle, found by iterative depth-first search.
fn find_cycle(support: &DMatrix<bool>) -> Option<Vec<(usize, usize)>> {
    let n = support.nrows();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next == n {
                state[u] = 2;
                stack.pop();
                continue;
            }
            let v = *next;
            *next += 1;
            if !support[(u, v)] {
                continue;
            }
            match state[v] {
                0 => {
                    state[v] = 1;
                    parent[v] = u;
                    stack.push((v, 0));
                }
                1 => {
                    let mut edges = vec![(u, v)];
                    let mut cur = u;
                    while cur != v {
                        let pu = parent[cur];
                        edges.push((pu, cur));
                        cur = pu;
                    }
                    return Some(edges);
                }
                _ => {}
            }
        }
    }
    None
}

/// Random warm start with `W >= 0`, zero diagonal and `rho(W) < s / 2`.
pub fn random_feasible_start(n: usize, p: usize, cfg: &SolverConfig, scale: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random::<f64>() * scale });
    // row sums bound the spectral radius of a non-negative matrix
    let max_row = w.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    if max_row >= 0.5 * cfg.s {
        w *= 0.5 * cfg.s / max_row;
    }
    let a = DMatrix::from_fn(n * p, n, |_, _| {
        let v = rng.random::<f64>() * scale;
        if cfg.signed_a {
            v - 0.5 * scale
        } else {
            v
        }
    });
    (w, a)
}
