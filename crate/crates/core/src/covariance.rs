//! Matérn correlation under the practical-range parameterization.
//!
//! For smoothness ν ∈ {1/2, 3/2, 5/2, ∞} and `u = d / φ` the correlation is
//!
//! ```text
//! ν = 1/2 : exp(−cu)
//! ν = 3/2 : (1 + cu) exp(−cu)
//! ν = 5/2 : (1 + cu + (cu)²/3) exp(−cu)
//! ν = ∞   : exp(−(cu)²)
//! ```
//!
//! where each scaling constant `c_ν` is found once by bisection so that
//! `ρ(φ) = 0.05`: the practical range φ is the distance at which correlation
//! falls to 5%.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::CovarianceError;
use crate::metricspace::DistanceMatrix;

/// Correlation reached at the practical range.
pub const PRACTICAL_RANGE_CORRELATION: f64 = 0.05;

/// Diagonal jitter values tried, in order, when a correlation matrix fails to
/// factor.
pub const JITTER_SCHEDULE: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
    Infinite,
}

impl Smoothness {
    pub const ALL: [Smoothness; 4] = [
        Smoothness::Half,
        Smoothness::ThreeHalves,
        Smoothness::FiveHalves,
        Smoothness::Infinite,
    ];

    pub fn nu(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
            Smoothness::Infinite => f64::INFINITY,
        }
    }

    /// Correlation as a function of the scaled distance `t = c·u`.
    #[inline]
    pub fn shape(self, t: f64) -> f64 {
        match self {
            Smoothness::Half => (-t).exp(),
            Smoothness::ThreeHalves => (1.0 + t) * (-t).exp(),
            Smoothness::FiveHalves => (1.0 + t + t * t / 3.0) * (-t).exp(),
            Smoothness::Infinite => (-t * t).exp(),
        }
    }

    /// Constant `c_ν` with `shape(c_ν) = 0.05`.
    pub fn scale(self) -> f64 {
        static SCALES: OnceLock<[f64; 4]> = OnceLock::new();
        let scales = SCALES.get_or_init(|| Smoothness::ALL.map(|s| s.solve_scale()));
        scales[self as usize]
    }

    fn solve_scale(self) -> f64 {
        // every shape is 1 at 0 and strictly decreasing to 0
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while self.shape(hi) > PRACTICAL_RANGE_CORRELATION {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.shape(mid) > PRACTICAL_RANGE_CORRELATION {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn label(self) -> &'static str {
        match self {
            Smoothness::Half => "exp",
            Smoothness::ThreeHalves => "m32",
            Smoothness::FiveHalves => "m52",
            Smoothness::Infinite => "gauss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationModel {
    pub smoothness: Smoothness,
    /// Practical range.
    pub phi: f64,
}

impl CorrelationModel {
    pub fn new(smoothness: Smoothness, phi: f64) -> Result<Self, CovarianceError> {
        if !(phi.is_finite() && phi > 0.0) {
            return Err(CovarianceError::InvalidRange(phi));
        }
        Ok(Self { smoothness, phi })
    }

    /// Correlation at distance `d`, without argument checks.
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        self.smoothness.shape(self.smoothness.scale() * d / self.phi)
    }
}

pub fn rho(model: &CorrelationModel, d: f64) -> Result<f64, CovarianceError> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(CovarianceError::InvalidDistance(d));
    }
    Ok(model.eval(d))
}

pub fn correlation_matrix(model: &CorrelationModel, d: &DistanceMatrix) -> DMatrix<f64> {
    let n = d.n();
    let mut r = DMatrix::from_fn(n, n, |i, j| model.eval(d.get(i, j)));
    for i in 0..n {
        r[(i, i)] = 1.0;
    }
    r
}

/// Elementwise correlation for an arbitrary (possibly rectangular) matrix of
/// distances.
pub fn correlation_from_distances(model: &CorrelationModel, d: &DMatrix<f64>) -> DMatrix<f64> {
    d.map(|x| model.eval(x))
}

/// Cholesky factor of `R + jitter·I` together with the jitter that was needed.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }
}

/// Factors `r + j·I` for the first `j` in [`JITTER_SCHEDULE`] that succeeds.
pub fn chol_with_jitter(r: &DMatrix<f64>) -> Result<JitteredCholesky, CovarianceError> {
    chol_with_schedule(r, &JITTER_SCHEDULE)
}

pub fn chol_with_schedule(
    r: &DMatrix<f64>,
    schedule: &[f64],
) -> Result<JitteredCholesky, CovarianceError> {
    if !r.is_square() {
        return Err(CovarianceError::Dimension {
            expected: r.nrows(),
            found: r.ncols(),
        });
    }
    for &jitter in schedule {
        let mut m = r.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(factor) = Cholesky::new(m) {
            if factor.l_dirty().diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
                if jitter > 0.0 {
                    log::debug!("correlation matrix factored with jitter {jitter:e}");
                }
                return Ok(JitteredCholesky { factor, jitter });
            }
        }
    }
    Err(CovarianceError::NotPositiveDefinite {
        min_eigenvalue: min_eigenvalue(r),
    })
}

pub fn min_eigenvalue(r: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (r + r.transpose());
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Marginal Gaussian-process covariance `τ⁻¹R + jitter·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub model: CorrelationModel,
    /// Marginal precision.
    pub tau: f64,
    pub jitter: f64,
}

/// Log density of `y` under `N(mean, τ⁻¹R + jitter·I)`, via a Cholesky factor.
pub fn gp_loglik(
    y: &DVector<f64>,
    mean: &DVector<f64>,
    spec: &CovarianceSpec,
    r: &DMatrix<f64>,
) -> Result<f64, CovarianceError> {
    let n = y.len();
    for found in [mean.len(), r.nrows(), r.ncols()] {
        if found != n {
            return Err(CovarianceError::Dimension { expected: n, found });
        }
    }
    // τ⁻¹R + jI = τ⁻¹(R + τj·I)
    let mut scaled = r.clone();
    for i in 0..n {
        scaled[(i, i)] += spec.tau * spec.jitter;
    }
    let chol = chol_with_jitter(&scaled)?;
    let resid = y - mean;
    let quad = spec.tau * resid.dot(&chol.solve(&resid));
    let log_det = chol.log_det() - n as f64 * spec.tau.ln();
    Ok(-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}
