//! Latent-field priors at a fixed value of their structure parameter.
//!
//! Every supported effect is Gaussian with precision `τ·S(h)` (pseudo-inverse
//! covariance `τ⁻¹·K(h)`), where `h` is the practical range for the HGP and
//! the mixing weight for BYM2 and Leroux.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::arealbaselines::{icar_structure, IcarStructure};
use crate::covariance::{chol_with_jitter, correlation_from_distances, CorrelationModel, Smoothness};
use crate::error::{CovarianceError, InferenceError};
use crate::geometry::AdjacencyMatrix;

pub(crate) enum LatentBase {
    None,
    Hgp {
        smoothness: Smoothness,
        distances: DMatrix<f64>,
    },
    Icar(IcarStructure),
    /// Eigendecomposition of the scaled ICAR structure `Q*`.
    Bym2 {
        vectors: DMatrix<f64>,
        values: DVector<f64>,
    },
    /// Unscaled `D − W` and its eigendecomposition.
    Leroux {
        q: DMatrix<f64>,
        vectors: DMatrix<f64>,
        values: DVector<f64>,
    },
}

/// `S(h)` with its (pseudo) log-determinant and rank.
pub(crate) struct Precision {
    pub s: DMatrix<f64>,
    pub log_det: f64,
    pub rank: usize,
    pub jitter: f64,
}

impl LatentBase {
    pub fn icar(w: &AdjacencyMatrix) -> Result<Self, InferenceError> {
        Ok(LatentBase::Icar(icar_structure(w)?))
    }

    pub fn bym2(w: &AdjacencyMatrix) -> Result<Self, InferenceError> {
        let s = icar_structure(w)?;
        Ok(LatentBase::Bym2 {
            vectors: s.eigenvectors,
            values: s.eigenvalues,
        })
    }

    pub fn leroux(w: &AdjacencyMatrix) -> Result<Self, InferenceError> {
        let q = icar_structure(w)?.q;
        let eig = SymmetricEigen::new(q.clone());
        let values = eig.eigenvalues.map(|l| l.max(0.0));
        Ok(LatentBase::Leroux {
            q,
            vectors: eig.eigenvectors,
            values,
        })
    }

    /// Components on which a sum-to-zero penalty is imposed.
    pub fn constrained_components(&self) -> Vec<Vec<usize>> {
        match self {
            LatentBase::Icar(s) => s.components.clone(),
            _ => Vec::new(),
        }
    }

    pub fn precision(&self, h: f64) -> Result<Precision, CovarianceError> {
        match self {
            LatentBase::None => unreachable!("no latent field"),
            LatentBase::Hgp {
                smoothness,
                distances,
            } => {
                let r = correlation_from_distances(&CorrelationModel::new(*smoothness, h)?, distances);
                let chol = chol_with_jitter(&r)?;
                Ok(Precision {
                    log_det: -chol.log_det(),
                    rank: r.nrows(),
                    jitter: chol.jitter,
                    s: chol.inverse(),
                })
            }
            LatentBase::Icar(s) => Ok(Precision {
                s: s.q_star.clone(),
                log_det: s.log_pdet(),
                rank: s.rank(),
                jitter: 0.0,
            }),
            LatentBase::Bym2 { vectors, values } => {
                let c = bym2_spectrum(values, h);
                Ok(Precision {
                    s: spectral(vectors, &c.map(|v| 1.0 / v)),
                    log_det: -c.iter().map(|v| v.ln()).sum::<f64>(),
                    rank: c.len(),
                    jitter: 0.0,
                })
            }
            LatentBase::Leroux { q, values, .. } => {
                let n = q.nrows();
                Ok(Precision {
                    s: q * h + DMatrix::identity(n, n) * (1.0 - h),
                    log_det: values.iter().map(|l| (h * l + 1.0 - h).ln()).sum(),
                    rank: n,
                    jitter: 0.0,
                })
            }
        }
    }

    /// `K(h)`: the latent covariance times `τ`.
    pub fn covariance(&self, h: f64) -> Result<DMatrix<f64>, CovarianceError> {
        match self {
            LatentBase::None => unreachable!("no latent field"),
            LatentBase::Hgp {
                smoothness,
                distances,
            } => Ok(correlation_from_distances(
                &CorrelationModel::new(*smoothness, h)?,
                distances,
            )),
            LatentBase::Icar(s) => Ok(s.q_star_ginv.clone()),
            LatentBase::Bym2 { vectors, values } => Ok(spectral(vectors, &bym2_spectrum(values, h))),
            LatentBase::Leroux {
                vectors, values, ..
            } => Ok(spectral(vectors, &values.map(|l| 1.0 / (h * l + 1.0 - h)))),
        }
    }
}

/// Eigenvalues of `(1 − ψ)I + ψQ*⁻` given those of `Q*`.
fn bym2_spectrum(values: &DVector<f64>, psi: f64) -> DVector<f64> {
    values.map(|l| if l > 0.0 { 1.0 - psi + psi / l } else { 1.0 - psi })
}

/// `V diag(d) Vᵀ`.
pub(crate) fn spectral(v: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= d[j];
    }
    let mut m = vd * v.transpose();
    m = 0.5 * (&m + m.transpose());
    m
}
