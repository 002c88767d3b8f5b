//! Synthetic ground truth and forward simulation of the structural VAR
//! `x_t = Wᵀ x_t + sum_q A_qᵀ x_{t-q} + z_t`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{DagWeights, LaggedWeights, TimeSeries};

/// Companion spectral radius at or above which a draw is rejected.
pub const STABILITY_LIMIT: f64 = 0.99;
/// Topology draws attempted before giving up.
pub const MAX_STABILITY_ATTEMPTS: usize = 20;

/// Recipe for a synthetic benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SvarmSpec {
    pub n: usize,
    pub p: usize,
    pub avg_degree_w: f64,
    pub avg_degree_a: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    /// Lag `q` weights are scaled by `exp(-decay_rate * q)`.
    pub decay_rate: f64,
    pub noise_sigma: f64,
    pub t: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SvarmSpec {
    pub fn new(n: usize, p: usize, t: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            avg_degree_w: 4.0,
            avg_degree_a: 1.0,
            weight_low: 0.1,
            weight_high: 0.5,
            decay_rate: 1.5,
            noise_sigma: 1.0,
            t,
            burn_in: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.n));
        }
        if !(self.weight_low > 0.0 && self.weight_low <= self.weight_high && self.weight_high.is_finite()) {
            return bad(format!("need 0 < weight_low <= weight_high, got [{}, {}]", self.weight_low, self.weight_high));
        }
        if self.t < self.p + 1 {
            return bad(format!("need t >= p + 1, got t = {}, p = {}", self.t, self.p));
        }
        if !(self.noise_sigma >= 0.0) || !(self.decay_rate >= 0.0) || !(self.avg_degree_a >= 0.0) {
            return bad("noise_sigma, decay_rate and avg_degree_a must be non-negative".into());
        }
        if !(self.avg_degree_w >= 0.0) || self.avg_degree_w > (self.n - 1) as f64 {
            return Err(Error::DegreeTooLarge { degree: self.avg_degree_w, nodes: self.n });
        }
        Ok(())
    }
}

/// Sampled parameters and the observed series they generate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub w_true: DagWeights,
    pub a_true: LaggedWeights,
    pub x: TimeSeries,
    /// Innovations aligned with the columns of `x`.
    pub noise: DMatrix<f64>,
    /// Spectral radius of the reduced-form companion matrix.
    pub companion_radius: f64,
}

/// Erdős-Rényi DAG: strictly lower-triangular entries kept with probability
/// `d / (n - 1)`, uniform weights, then one shared random relabeling of rows
/// and columns.
pub fn gen_er_dag<R: Rng + ?Sized>(
    n: usize,
    avg_degree: f64,
    weight_range: (f64, f64),
    rng: &mut R,
) -> Result<DagWeights> {
    if !(avg_degree >= 0.0) || (avg_degree > 0.0 && avg_degree > n.saturating_sub(1) as f64) {
        return Err(Error::DegreeTooLarge { degree: avg_degree, nodes: n });
    }
    let prob = if avg_degree == 0.0 { 0.0 } else { avg_degree / (n - 1) as f64 };
    let (low, high) = weight_range;
    let mut lower = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if rng.random::<f64>() < prob {
                lower[(i, j)] = rng.random_range(low..=high);
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    DagWeights::new(DMatrix::from_fn(n, n, |i, j| lower[(perm[i], perm[j])]))
}

/// Lag matrices with every entry (self-lags included) kept with probability
/// `d / (2n)`, uniform weights and decay `exp(-decay_rate * q)` on lag `q`.
pub fn gen_lagged<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    avg_degree: f64,
    weight_range: (f64, f64),
    decay_rate: f64,
    rng: &mut R,
) -> Result<LaggedWeights> {
    let prob = if n == 0 { 0.0 } else { (avg_degree / (2.0 * n as f64)).clamp(0.0, 1.0) };
    let (low, high) = weight_range;
    let mats = (1..=p)
        .map(|q| {
            let decay = (-decay_rate * q as f64).exp();
            let mut a = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    if rng.random::<f64>() < prob {
                        a[(i, j)] = rng.random_range(low..=high) * decay;
                    }
                }
            }
            a
        })
        .collect();
    LaggedWeights::new(n, mats)
}

/// Spectral radius of the companion matrix of `x_t = sum_q B_q x_{t-q}` with
/// `B_q = (I - Wᵀ)^{-1} A_qᵀ`.
pub fn companion_radius(w: &DMatrix<f64>, a: &LaggedWeights) -> Result<f64> {
    let (n, p) = (w.nrows(), a.p());
    if p == 0 {
        return Ok(0.0);
    }
    let lu = (DMatrix::identity(n, n) - w.transpose()).lu();
    let mut comp = DMatrix::zeros(n * p, n * p);
    for (q, aq) in a.lags().iter().enumerate() {
        let bq = lu
            .solve(&aq.transpose())
            .ok_or_else(|| Error::InvalidWeights("I - Wᵀ is singular".into()))?;
        comp.view_mut((0, q * n), (n, n)).copy_from(&bq);
    }
    for k in 0..n * (p - 1) {
        comp[(n + k, k)] = 1.0;
    }
    Ok(comp.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Draws `(W, A)` until the process is stable, then runs the recursion from a
/// zero state, discarding `burn_in` leading samples.
pub fn simulate_svarm(spec: &SvarmSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let range = (spec.weight_low, spec.weight_high);
    let (n, p) = (spec.n, spec.p);

    let mut last_radius = f64::INFINITY;
    let mut drawn = None;
    for _ in 0..MAX_STABILITY_ATTEMPTS {
        let w = gen_er_dag(n, spec.avg_degree_w, range, &mut rng)?;
        let a = gen_lagged(n, p, spec.avg_degree_a, range, spec.decay_rate, &mut rng)?;
        let radius = companion_radius(w.matrix(), &a)?;
        if radius < STABILITY_LIMIT {
            drawn = Some((w, a, radius));
            break;
        }
        last_radius = radius;
    }
    let (w_true, a_true, radius) =
        drawn.ok_or(Error::Unstable { attempts: MAX_STABILITY_ATTEMPTS, radius: last_radius })?;

    let total = spec.burn_in + spec.t;
    let lu = (DMatrix::identity(n, n) - w_true.matrix().transpose()).lu();
    let a_t: Vec<DMatrix<f64>> = a_true.lags().iter().map(|a| a.transpose()).collect();
    let mut x = DMatrix::zeros(n, total);
    let mut z = DMatrix::zeros(n, total);
    for t in 0..total {
        let mut rhs = DMatrix::from_fn(n, 1, |_, _| spec.noise_sigma * rng.sample::<f64, _>(StandardNormal));
        z.set_column(t, &rhs.column(0));
        for (q, aq_t) in a_t.iter().enumerate() {
            let lag = q + 1;
            if t >= lag {
                rhs += aq_t * x.column(t - lag);
            }
        }
        let xt = lu.solve(&rhs).ok_or_else(|| Error::InvalidWeights("I - Wᵀ is singular".into()))?;
        x.set_column(t, &xt.column(0));
    }
    let x = x.columns(spec.burn_in, spec.t).into_owned();
    let noise = z.columns(spec.burn_in, spec.t).into_owned();
    Ok(GroundTruth { w_true, a_true, x: TimeSeries::new(x)?, noise, companion_radius: radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lagged_design, is_dag};
    use crate::objective::residual;

    #[test]
    fn zero_degree_dag() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = gen_er_dag(6, 0.0, (0.1, 0.5), &mut rng).unwrap();
        assert!(w.matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degree_too_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(gen_er_dag(4, 3.5, (0.1, 0.5), &mut rng), Err(Error::DegreeTooLarge { .. })));
    }

    #[test]
    fn dags_and_weight_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let w = gen_er_dag(12, 4.0, (0.1, 0.5), &mut rng).unwrap();
            assert!(is_dag(&w.support(0.0)));
            assert!(w.matrix().iter().all(|&v| v == 0.0 || (0.1..=0.5).contains(&v)));
        }
    }

    #[test]
    fn lag_decay_and_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(gen_lagged(5, 0, 1.0, (0.1, 0.5), 1.5, &mut rng).unwrap().p(), 0);
        let a = gen_lagged(20, 3, 4.0, (0.1, 0.5), 1.5, &mut rng).unwrap();
        assert!(a.lags()[1].max() <= (-3.0f64).exp() * 0.5);
        assert!(a.lags()[2].max() <= (-4.5f64).exp() * 0.5);
    }

    #[test]
    fn white_noise_when_no_edges() {
        let spec = SvarmSpec { avg_degree_w: 0.0, avg_degree_a: 0.0, ..SvarmSpec::new(4, 2, 50, 9) };
        let gt = simulate_svarm(&spec).unwrap();
        assert_eq!(gt.x.matrix(), &gt.noise);
    }

    #[test]
    fn noiseless_is_zero() {
        let spec = SvarmSpec { noise_sigma: 0.0, ..SvarmSpec::new(6, 2, 40, 2) };
        let gt = simulate_svarm(&spec).unwrap();
        assert!(gt.x.matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_recovers_noise() {
        let spec = SvarmSpec::new(8, 2, 300, 11);
        let gt = simulate_svarm(&spec).unwrap();
        let design = build_lagged_design(&gt.x, 2).unwrap();
        let r = residual(gt.w_true.matrix(), &gt.a_true.stacked(), &design).unwrap();
        let z_eff = gt.noise.columns(2, 298);
        assert!((r - z_eff).amax() < 1e-10);
    }

    #[test]
    fn reproducible() {
        let spec = SvarmSpec::new(6, 1, 100, 5);
        assert_eq!(simulate_svarm(&spec).unwrap(), simulate_svarm(&spec).unwrap());
        let other = SvarmSpec { seed: 6, ..spec };
        assert_ne!(simulate_svarm(&other).unwrap().x, simulate_svarm(&SvarmSpec::new(6, 1, 100, 5)).unwrap().x);
    }

    #[test]
    fn unstable_spec_fails() {
        // heavy lag weights on a dense graph cannot be stabilized by resampling
        let spec = SvarmSpec {
            avg_degree_w: 2.0,
            avg_degree_a: 6.0,
            weight_low: 2.0,
            weight_high: 3.0,
            decay_rate: 0.0,
            ..SvarmSpec::new(4, 1, 50, 0)
        };
        let res = simulate_svarm(&spec);
        assert!(matches!(res, Err(Error::Unstable { .. })), "{res:?}");
    }

    #[test]
    fn companion_of_scalar_ar() {
        let w = DMatrix::zeros(1, 1);
        let a = LaggedWeights::new(1, vec![DMatrix::from_element(1, 1, 0.5)]).unwrap();
        assert!((companion_radius(&w, &a).unwrap() - 0.5).abs() < 1e-12);
        // AR(2) x_t = 0.5 x_{t-1} + 0.3 x_{t-2}: roots of z^2 - 0.5 z - 0.3
        let a = LaggedWeights::new(1, vec![DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.3)])
            .unwrap();
        let root = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert!((companion_radius(&w, &a).unwrap() - root).abs() < 1e-12);
    }
}
