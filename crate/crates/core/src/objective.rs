//! Least-squares score with l1 penalties, the augmented Lagrangian and its
//! gradients.
//!
//! The free functions evaluate everything from the residual matrix and serve as
//! the reference route. [`Problem`] caches the second-moment matrices of the
//! design so that an evaluation costs `O((n(p+1))^2 n)` instead of `O(n^2 p m)`;
//! the solvers only use that path.

use nalgebra::DMatrix;

use crate::acyclicity::{self, MMatrixFactor};
use crate::error::{Error, Result};
use crate::model::LaggedDesign;

/// Sparsity weights for `W` and `A`, plus the sign regime of `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub lambda_w: f64,
    pub lambda_a: f64,
    /// Allow negative lag coefficients and penalize `sum |A_kl|`.
    pub signed_a: bool,
}

impl Penalties {
    pub fn new(lambda_w: f64, lambda_a: f64) -> Result<Self> {
        if !(lambda_w >= 0.0 && lambda_a >= 0.0) || !lambda_w.is_finite() || !lambda_a.is_finite() {
            return Err(Error::Config(format!(
                "penalties must be non-negative, got lambda_w = {lambda_w}, lambda_a = {lambda_a}"
            )));
        }
        Ok(Self { lambda_w, lambda_a, signed_a: false })
    }

    pub fn zero() -> Self {
        Self { lambda_w: 0.0, lambda_a: 0.0, signed_a: false }
    }

    pub fn with_signed_a(mut self, signed_a: bool) -> Self {
        self.signed_a = signed_a;
        self
    }
}

/// Lagrange multiplier `alpha` and quadratic penalty `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierState {
    pub alpha: f64,
    pub c: f64,
}

impl MultiplierState {
    pub fn new(alpha: f64, c: f64) -> Result<Self> {
        if !(alpha >= 0.0 && c >= 0.0) || !alpha.is_finite() || !c.is_finite() {
            return Err(Error::Config(format!("need alpha >= 0 and c >= 0, got alpha = {alpha}, c = {c}")));
        }
        Ok(Self { alpha, c })
    }

    /// Value of `alpha h + (c/2) h^2` and its derivative in `h`.
    pub fn penalty(&self, h: f64) -> (f64, f64) {
        (self.alpha * h + 0.5 * self.c * h * h, self.alpha + self.c * h)
    }
}

fn check_shapes(w: &DMatrix<f64>, a: &DMatrix<f64>, design: &LaggedDesign) -> Result<()> {
    let (n, p) = (design.n(), design.p());
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Shape(format!("W is {}x{}, expected {n}x{n}", w.nrows(), w.ncols())));
    }
    if a.nrows() != n * p || a.ncols() != n {
        return Err(Error::Shape(format!("A is {}x{}, expected {}x{n}", a.nrows(), a.ncols(), n * p)));
    }
    Ok(())
}

/// `R = X_eff - Wᵀ X_eff - Aᵀ Y`.
pub fn residual(w: &DMatrix<f64>, a: &DMatrix<f64>, design: &LaggedDesign) -> Result<DMatrix<f64>> {
    check_shapes(w, a, design)?;
    let x = design.x_eff();
    let mut r = x - w.tr_mul(x);
    if design.p() > 0 {
        r -= a.tr_mul(design.y());
    }
    Ok(r)
}

fn l1_terms(w: &DMatrix<f64>, a: &DMatrix<f64>, pen: &Penalties) -> f64 {
    let a_sum: f64 = if pen.signed_a { a.iter().map(|v| v.abs()).sum() } else { a.sum() };
    pen.lambda_w * w.sum() + pen.lambda_a * a_sum
}

/// `(1/(2m)) ||R||_F^2 + lambda_w sum W + lambda_a sum A` (or `sum |A|` in signed mode).
pub fn score(w: &DMatrix<f64>, a: &DMatrix<f64>, design: &LaggedDesign, pen: &Penalties) -> Result<f64> {
    let r = residual(w, a, design)?;
    let m = design.m() as f64;
    Ok(r.norm_squared() / (2.0 * m) + l1_terms(w, a, pen))
}

/// `score + alpha h(W) + (c/2) h(W)^2`.
pub fn lagrangian_value(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    design: &LaggedDesign,
    pen: &Penalties,
    mult: &MultiplierState,
    s: f64,
) -> Result<f64> {
    let h = acyclicity::h_value(w, s)?;
    Ok(score(w, a, design, pen)? + mult.penalty(h).0)
}

/// Gradients of [`lagrangian_value`] with respect to `W` and the stacked `A`.
///
/// In signed mode the `A` penalty contributes `lambda_a sign(A)` with 0 at 0.
pub fn lagrangian_gradients(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    design: &LaggedDesign,
    pen: &Penalties,
    mult: &MultiplierState,
    s: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (h, grad_h) = acyclicity::h_value_and_gradient(w, s)?;
    let r = residual(w, a, design)?;
    let m = design.m() as f64;
    let mut gw = -(design.x_eff() * r.transpose()) / m;
    gw.add_scalar_mut(pen.lambda_w);
    gw += grad_h * mult.penalty(h).1;
    let mut ga = -(design.y() * r.transpose()) / m;
    if pen.signed_a {
        ga.zip_apply(a, |g, v| *g += pen.lambda_a * sign0(v));
    } else {
        ga.add_scalar_mut(pen.lambda_a);
    }
    Ok((gw, ga))
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Cached second moments of a design for the smooth least-squares term.
///
/// Parameters are handled as one stacked matrix `Θ = [W; A]` of shape
/// `(n(p+1)) x n` paired with `Z = [X_eff; Y]`, so that `R = X_eff - Θᵀ Z`.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    p: usize,
    m: usize,
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    half_trace: f64,
}

impl Problem {
    pub fn new(design: &LaggedDesign) -> Self {
        let (n, p, m) = (design.n(), design.p(), design.m());
        let mut z = DMatrix::zeros(n * (p + 1), m);
        z.rows_mut(0, n).copy_from(design.x_eff());
        if p > 0 {
            z.rows_mut(n, n * p).copy_from(design.y());
        }
        let mf = m as f64;
        let gram = (&z * z.transpose()) / mf;
        let cross = gram.columns(0, n).into_owned();
        let half_trace = 0.5 * design.x_eff().norm_squared() / mf;
        Self { n, p, m, gram, cross, half_trace }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn stack(&self, w: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut theta = DMatrix::zeros(n * (self.p + 1), n);
        theta.rows_mut(0, n).copy_from(w);
        if self.p > 0 {
            theta.rows_mut(n, n * self.p).copy_from(a);
        }
        theta
    }

    pub fn split(&self, theta: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        (theta.rows(0, n).into_owned(), theta.rows(n, n * self.p).into_owned())
    }

    /// `G Θ`, reused by both the value and the gradient.
    pub fn gram_product(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gram * theta
    }

    /// `(1/(2m)) ||X_eff - Θᵀ Z||_F^2` given `gtheta = G Θ`.
    pub fn data_value_with(&self, theta: &DMatrix<f64>, gtheta: &DMatrix<f64>) -> f64 {
        let quad = theta.dot(gtheta);
        let lin = theta.dot(&self.cross);
        (self.half_trace - lin + 0.5 * quad).max(0.0)
    }

    pub fn data_value(&self, theta: &DMatrix<f64>) -> f64 {
        self.data_value_with(theta, &self.gram_product(theta))
    }

    /// `G Θ - C`, given `gtheta = G Θ`.
    pub fn data_gradient_with(&self, gtheta: &DMatrix<f64>) -> DMatrix<f64> {
        gtheta - &self.cross
    }

    /// l1 terms on the stacked parameters.
    pub fn l1_value(&self, theta: &DMatrix<f64>, pen: &Penalties) -> f64 {
        let n = self.n;
        let w_part: f64 = theta.rows(0, n).iter().map(|v| v.abs()).sum();
        let a_part: f64 = theta.rows(n, n * self.p).iter().map(|v| v.abs()).sum();
        pen.lambda_w * w_part + pen.lambda_a * a_part
    }

    /// Full augmented Lagrangian through the cached moments; `None` outside the domain.
    pub fn lagrangian(&self, theta: &DMatrix<f64>, pen: &Penalties, mult: &MultiplierState, s: f64) -> Option<f64> {
        let w = theta.rows(0, self.n).into_owned();
        let h = MMatrixFactor::factor_unchecked(&w, s)?.h();
        Some(self.data_value(theta) + self.l1_value(theta, pen) + mult.penalty(h).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lagged_design, TimeSeries};
    use approx::assert_relative_eq;

    fn design(n: usize, t: usize, p: usize) -> LaggedDesign {
        let x = DMatrix::from_fn(n, t, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0 + 0.1 * i as f64);
        build_lagged_design(&TimeSeries::new(x).unwrap(), p).unwrap()
    }

    #[test]
    fn residual_at_zero_is_data() {
        let d = design(3, 10, 2);
        let r = residual(&DMatrix::zeros(3, 3), &DMatrix::zeros(6, 3), &d).unwrap();
        assert_eq!(&r, d.x_eff());
        let single = build_lagged_design(&TimeSeries::new(DMatrix::from_element(1, 1, 2.0)).unwrap(), 0).unwrap();
        let r = residual(&DMatrix::zeros(1, 1), &DMatrix::zeros(0, 1), &single).unwrap();
        assert_eq!(r[(0, 0)], 2.0);
    }

    #[test]
    fn shape_mismatch() {
        let d = design(3, 10, 1);
        assert!(matches!(residual(&DMatrix::zeros(2, 2), &DMatrix::zeros(3, 3), &d), Err(Error::Shape(_))));
        assert!(matches!(residual(&DMatrix::zeros(3, 3), &DMatrix::zeros(6, 3), &d), Err(Error::Shape(_))));
    }

    #[test]
    fn score_at_zero() {
        let d = design(3, 12, 1);
        let sc = score(&DMatrix::zeros(3, 3), &DMatrix::zeros(3, 3), &d, &Penalties::zero()).unwrap();
        assert_relative_eq!(sc, d.x_eff().norm_squared() / (2.0 * d.m() as f64), epsilon = 1e-14);
    }

    #[test]
    fn score_l1_increment_on_zero_data() {
        // two nodes, zero data: the residual stays zero so the only change is lambda_w * 1
        let x = DMatrix::zeros(2, 4);
        let d = build_lagged_design(&TimeSeries::new(x).unwrap(), 0).unwrap();
        let pen = Penalties::new(1.0, 0.0).unwrap();
        let base = score(&DMatrix::zeros(2, 2), &DMatrix::zeros(0, 2), &d, &pen).unwrap();
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.0;
        let bumped = score(&w, &DMatrix::zeros(0, 2), &d, &pen).unwrap();
        assert_eq!(bumped - base, 1.0);

        // nonzero data: hand expansion of (1/2m)||x - Wᵀx||^2 with x = (1, 2) constant
        let x = DMatrix::from_fn(2, 4, |i, _| (i + 1) as f64);
        let d = build_lagged_design(&TimeSeries::new(x).unwrap(), 0).unwrap();
        let base = score(&DMatrix::zeros(2, 2), &DMatrix::zeros(0, 2), &d, &pen).unwrap();
        assert_relative_eq!(base, (1.0 + 4.0) / 2.0, epsilon = 1e-15);
        // residual node 1 becomes 2 - 1*1 = 1 -> data term (1 + 1)/2 = 1, plus lambda 1
        let bumped = score(&w, &DMatrix::zeros(0, 2), &d, &pen).unwrap();
        assert_relative_eq!(bumped, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn lagrangian_adds_penalty() {
        let mult = MultiplierState::new(1.0, 2.0).unwrap();
        assert_eq!(mult.penalty(0.5).0, 0.75);
        let d = design(3, 10, 1);
        let w = DMatrix::from_fn(3, 3, |i, j| if i > j { 0.2 } else { 0.0 });
        let a = DMatrix::from_element(3, 3, 0.1);
        let pen = Penalties::new(0.1, 0.2).unwrap();
        let l = lagrangian_value(&w, &a, &d, &pen, &mult, 1.0).unwrap();
        assert_eq!(l, score(&w, &a, &d, &pen).unwrap());
    }

    #[test]
    fn gradient_hand_expansion_at_zero() {
        let d = design(3, 15, 0);
        let mult = MultiplierState::new(1.0, 0.0).unwrap();
        let (gw, ga) =
            lagrangian_gradients(&DMatrix::zeros(3, 3), &DMatrix::zeros(0, 3), &d, &Penalties::zero(), &mult, 1.0)
                .unwrap();
        let expected = -(d.x_eff() * d.x_eff().transpose()) / d.m() as f64 + DMatrix::identity(3, 3);
        assert_relative_eq!(gw, expected, epsilon = 1e-13);
        assert_eq!(ga.nrows(), 0);
    }

    #[test]
    fn cached_moments_agree_with_residual_route() {
        let d = design(4, 40, 2);
        let prob = Problem::new(&d);
        let w = DMatrix::from_fn(4, 4, |i, j| if i != j { 0.05 * (i + 2 * j) as f64 } else { 0.0 });
        let a = DMatrix::from_fn(8, 4, |i, j| 0.01 * (i as f64 - j as f64));
        let pen = Penalties::new(0.1, 0.3).unwrap().with_signed_a(true);
        let theta = prob.stack(&w, &a);
        let fast = prob.data_value(&theta) + prob.l1_value(&theta, &pen);
        assert_relative_eq!(fast, score(&w, &a, &d, &pen).unwrap(), epsilon = 1e-12);
        let mult = MultiplierState::new(0.5, 3.0).unwrap();
        assert_relative_eq!(
            prob.lagrangian(&theta, &pen, &mult, 1.5).unwrap(),
            lagrangian_value(&w, &a, &d, &pen, &mult, 1.5).unwrap(),
            epsilon = 1e-12
        );
        let (gw, ga) = lagrangian_gradients(&w, &a, &d, &Penalties::zero(), &MultiplierState::new(0.0, 0.0).unwrap(), 1.0)
            .unwrap();
        let g = prob.data_gradient_with(&prob.gram_product(&theta));
        let (fw, fa) = prob.split(&g);
        assert_relative_eq!(fw, gw, epsilon = 1e-12);
        assert_relative_eq!(fa, ga, epsilon = 1e-12);
    }
}
