//! Core matrix types, lag-aligned design construction and an exact DAG check.
//!
//! Weight matrices follow the convention that `W[(i, j)]` is the weight of the
//! directed edge `i -> j`, so the instantaneous model reads `x_t = Wᵀ x_t + ...`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Boolean adjacency pattern.
pub type Support = DMatrix<bool>;

/// Non-negative instantaneous weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DagWeights {
    w: DMatrix<f64>,
}

impl DagWeights {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::Shape(format!(
                "weight matrix must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        for j in 0..w.ncols() {
            for i in 0..w.nrows() {
                let v = w[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidWeights(format!("non-finite entry at ({i}, {j})")));
                }
                if v < 0.0 {
                    return Err(Error::NegativeWeight { row: i, col: j, value: v });
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidWeights(format!("non-zero diagonal at node {i}")));
                }
            }
        }
        Ok(Self { w })
    }

    pub fn zeros(n: usize) -> Self {
        Self { w: DMatrix::zeros(n, n) }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.w
    }

    pub fn support(&self, tau: f64) -> Support {
        threshold_support(&self.w, tau)
    }
}

/// Ordered lag matrices `A_1..A_p`, each `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedWeights {
    n: usize,
    mats: Vec<DMatrix<f64>>,
}

impl LaggedWeights {
    pub fn new(n: usize, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        for (q, a) in mats.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Shape(format!(
                    "lag {} matrix is {}x{}, expected {n}x{n}",
                    q + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidWeights(format!("non-finite entry in lag {}", q + 1)));
            }
        }
        Ok(Self { n, mats })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { n, mats: vec![DMatrix::zeros(n, n); p] }
    }

    /// Splits a stacked `(n*p) x n` matrix into its lag blocks.
    pub fn from_stacked(n: usize, stacked: &DMatrix<f64>) -> Result<Self> {
        if stacked.ncols() != n || (n > 0 && !stacked.nrows().is_multiple_of(n)) {
            return Err(Error::Shape(format!(
                "stacked lag matrix is {}x{}, expected (n*p)x{n}",
                stacked.nrows(),
                stacked.ncols()
            )));
        }
        let p = stacked.nrows().checked_div(n).unwrap_or(0);
        let mats = (0..p).map(|q| stacked.rows(q * n, n).into_owned()).collect();
        Self::new(n, mats)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.mats.len()
    }

    pub fn lags(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    /// Vertical concatenation `[A_1; ...; A_p]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n * self.p(), self.n);
        for (q, a) in self.mats.iter().enumerate() {
            out.rows_mut(q * self.n, self.n).copy_from(a);
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.mats.iter().all(|a| a.iter().all(|&v| v >= 0.0))
    }
}

/// Raw observations: column `t` holds the signal at time index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    x: DMatrix<f64>,
}

impl TimeSeries {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::Shape("time series needs at least one sample".into()));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (i, t) = (pos % x.nrows(), pos / x.nrows());
            return Err(Error::InvalidWeights(format!("non-finite sample at node {i}, time {t}")));
        }
        Ok(Self { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn t(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.x
    }
}

/// Lag-aligned pair `(X_eff, Y)` with `m = t - p` effective samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    x_eff: DMatrix<f64>,
    y: DMatrix<f64>,
    p: usize,
}

impl LaggedDesign {
    pub fn n(&self) -> usize {
        self.x_eff.nrows()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.x_eff.ncols()
    }

    pub fn x_eff(&self) -> &DMatrix<f64> {
        &self.x_eff
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }
}

/// Builds `X_eff` (columns `p..t` of `X`) and the stacked lag block `Y`, where
/// block `q` holds `X` shifted by `q + 1` samples. The first `p` columns are trimmed.
pub fn build_lagged_design(x: &TimeSeries, p: usize) -> Result<LaggedDesign> {
    let (n, t) = (x.n(), x.t());
    if t <= p {
        return Err(Error::InsufficientSamples { samples: t, lags: p });
    }
    let m = t - p;
    let src = x.matrix();
    let x_eff = src.columns(p, m).into_owned();
    let mut y = DMatrix::zeros(n * p, m);
    for q in 0..p {
        // column j of block q is X[:, p + j - (q + 1)]
        y.rows_mut(q * n, n).copy_from(&src.columns(p - q - 1, m));
    }
    Ok(LaggedDesign { x_eff, y, p })
}

/// Exact acyclicity check by Kahn's algorithm. `support[(i, j)]` is the edge `i -> j`.
pub fn is_dag(support: &Support) -> bool {
    assert!(support.is_square(), "support must be square");
    topological_order(support).is_some()
}

pub(crate) fn topological_order(support: &Support) -> Option<Vec<usize>> {
    let n = support.nrows();
    let mut indeg: Vec<usize> = (0..n)
        .map(|j| (0..n).filter(|&i| support[(i, j)]).count())
        .collect();
    let mut queue: Vec<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop() {
        order.push(i);
        for j in 0..n {
            if support[(i, j)] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push(j);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// `true` where `|w_ij| > tau`.
pub fn threshold_support(w: &DMatrix<f64>, tau: f64) -> Support {
    w.map(|v| v.abs() > tau)
}
