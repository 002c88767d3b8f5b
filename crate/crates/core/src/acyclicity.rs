//! Log-det acyclicity for non-negative weight matrices.
//!
//! For `W >= 0` the matrix `sI - W` is a Z-matrix, and it is a nonsingular
//! M-matrix exactly when `rho(W) < s`. A Z-matrix is a nonsingular M-matrix iff
//! Gaussian elimination without row exchanges runs to completion with strictly
//! positive pivots, so one unpivoted LU pass gives the domain test, the
//! log-determinant and the factors needed for the gradient.
//!
//! In that factorization every multiplier and every off-diagonal of `U` is
//! non-positive, so the triangular solves below only ever add non-negative
//! terms and the computed inverse is entrywise non-negative.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Spectral bound `s` of the log-det acyclicity function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcyclicityParams {
    s: f64,
}

impl AcyclicityParams {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("spectral bound s must be positive, got {s}")));
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

impl Default for AcyclicityParams {
    fn default() -> Self {
        Self { s: 1.0 }
    }
}

/// Unpivoted LU factors of `sI - W`, available only inside the domain.
#[derive(Debug, Clone)]
pub struct MMatrixFactor {
    // unit lower part below the diagonal, U on and above it
    lu: DMatrix<f64>,
    s: f64,
}

impl MMatrixFactor {
    /// Factors `sI - W`. Returns `Ok(None)` when some pivot is not positive,
    /// i.e. when `rho(W) >= s`.
    pub fn new(w: &DMatrix<f64>, s: f64) -> Result<Option<Self>> {
        check_nonnegative(w)?;
        Ok(Self::factor_unchecked(w, s))
    }

    /// Same as [`MMatrixFactor::new`] without the sign scan. Callers must
    /// guarantee `w >= 0`.
    pub(crate) fn factor_unchecked(w: &DMatrix<f64>, s: f64) -> Option<Self> {
        let n = w.nrows();
        let mut a = -w;
        for i in 0..n {
            a[(i, i)] += s;
        }
        for k in 0..n {
            let pivot = a[(k, k)];
            if !(pivot > 0.0 && pivot.is_finite()) {
                return None;
            }
            for i in k + 1..n {
                a[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = a[(k, j)];
                if ukj == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    let lik = a[(i, k)];
                    a[(i, j)] -= lik * ukj;
                }
            }
        }
        Some(Self { lu: a, s })
    }

    pub fn n(&self) -> usize {
        self.lu.nrows()
    }

    /// `N log s - log det(sI - W)`, accumulated as `-sum log(u_kk / s)`.
    pub fn h(&self) -> f64 {
        let s = self.s;
        let h: f64 = -(0..self.n()).map(|k| (self.lu[(k, k)] / s).ln()).sum::<f64>();
        h.max(0.0)
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n()).map(|k| self.lu[(k, k)].ln()).sum()
    }

    /// `(sI - W)^{-T}`.
    pub fn inverse_transpose(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut inv = DMatrix::identity(n, n);
        for mut col in inv.column_iter_mut() {
            // forward: L y = e
            for i in 0..n {
                let mut v = col[i];
                for k in 0..i {
                    v -= self.lu[(i, k)] * col[k];
                }
                col[i] = v;
            }
            // backward: U x = y
            for i in (0..n).rev() {
                let mut v = col[i];
                for j in i + 1..n {
                    v -= self.lu[(i, j)] * col[j];
                }
                col[i] = v / self.lu[(i, i)];
            }
        }
        inv.transpose()
    }
}

fn check_nonnegative(w: &DMatrix<f64>) -> Result<()> {
    if !w.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", w.nrows(), w.ncols())));
    }
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let v = w[(i, j)];
            if v < 0.0 || v.is_nan() {
                return Err(Error::NegativeWeight { row: i, col: j, value: v });
            }
        }
    }
    Ok(())
}

/// `true` iff `rho(w) < s`.
pub fn in_domain(w: &DMatrix<f64>, s: f64) -> Result<bool> {
    Ok(MMatrixFactor::new(w, s)?.is_some())
}

fn factor_in_domain(w: &DMatrix<f64>, s: f64) -> Result<MMatrixFactor> {
    MMatrixFactor::new(w, s)?.ok_or(Error::OutOfDomain { s })
}

/// `h(W) = N log s - log det(sI - W)`.
pub fn h_value(w: &DMatrix<f64>, s: f64) -> Result<f64> {
    Ok(factor_in_domain(w, s)?.h())
}

/// `grad h(W) = (sI - W)^{-T}`.
pub fn h_gradient(w: &DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    Ok(factor_in_domain(w, s)?.inverse_transpose())
}

/// Value and gradient from a single factorization.
pub fn h_value_and_gradient(w: &DMatrix<f64>, s: f64) -> Result<(f64, DMatrix<f64>)> {
    let f = factor_in_domain(w, s)?;
    Ok((f.h(), f.inverse_transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m2(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, a, b, 0.0])
    }

    #[test]
    fn zero_matrix_is_inside() {
        assert!(in_domain(&DMatrix::zeros(3, 3), 1.0).unwrap());
        assert!(in_domain(&DMatrix::zeros(3, 3), 1e-3).unwrap());
        assert_eq!(h_value(&DMatrix::zeros(3, 3), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_domain() {
        // eigenvalues of [[0,a],[b,0]] are +-sqrt(ab)
        assert!(!in_domain(&m2(1.5, 1.0), 1.0).unwrap());
        assert!(in_domain(&m2(0.5, 0.5), 1.0).unwrap());
        assert!(matches!(h_value(&m2(1.5, 1.0), 1.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(h_gradient(&m2(1.5, 1.0), 1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn negative_entry_rejected() {
        let err = in_domain(&m2(-0.1, 0.0), 1.0).unwrap_err();
        assert!(err.to_string().contains("domain requires non-negative weights"));
    }

    #[test]
    fn two_cycle_value() {
        // det(sI - W) = s^2 - ab
        let h = h_value(&m2(0.5, 0.5), 1.0).unwrap();
        assert_relative_eq!(h, -(0.75f64).ln(), epsilon = 1e-15);
        assert_relative_eq!(h, 0.287_682_072_451_780_9, epsilon = 1e-12);
        let h2 = h_value(&m2(0.5, 0.5), 2.0).unwrap();
        assert_relative_eq!(h2, -(1.0 - 0.25 / 4.0f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn triangular_is_zero() {
        let w = DMatrix::from_fn(5, 5, |i, j| if i > j { 0.1 + 0.05 * (i + j) as f64 } else { 0.0 });
        for s in [0.5, 1.0, 3.0] {
            assert_eq!(h_value(&w, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn gradient_closed_forms() {
        let g0 = h_gradient(&DMatrix::zeros(3, 3), 1.0).unwrap();
        assert_eq!(g0, DMatrix::identity(3, 3));
        let g = h_gradient(&m2(0.5, 0.5), 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]) / 0.75;
        assert_relative_eq!(g, expected, epsilon = 1e-14);
        // asymmetric case: (sI - W)^{-T} for W = [[0,a],[b,0]] is [[1,b],[a,1]]/(1-ab)
        let g = h_gradient(&m2(0.6, 0.2), 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.6, 1.0]) / (1.0 - 0.12);
        assert_relative_eq!(g, expected, epsilon = 1e-14);
    }

    #[test]
    fn dag_gradient_is_not_zero() {
        let w = DMatrix::from_fn(4, 4, |i, j| if i > j { 0.3 } else { 0.0 });
        for s in [0.5, 1.0, 2.0] {
            let g = h_gradient(&w, s).unwrap();
            assert!(g.amax() >= 1.0 / s - 1e-15);
            assert!(g.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn log_det_matches_nalgebra() {
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.1, 0.3, 0.0, 0.25, 0.05, 0.4, 0.0]);
        let f = MMatrixFactor::new(&w, 1.5).unwrap().unwrap();
        let m = DMatrix::identity(3, 3) * 1.5 - &w;
        assert_relative_eq!(f.log_det(), m.determinant().ln(), epsilon = 1e-13);
        let inv = m.try_inverse().unwrap();
        assert_relative_eq!(f.inverse_transpose(), inv.transpose(), epsilon = 1e-13);
    }
}
