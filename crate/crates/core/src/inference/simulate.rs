use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{Likelihood, RandomEffect};
use crate::covariance::{chol_with_jitter, correlation_matrix, CorrelationModel};
use crate::error::InferenceError;
use crate::metricspace::DistanceMatrix;

/// True parameters of a synthetic data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub likelihood: Likelihood,
    /// Must be one of the HGP effects.
    pub random_effect: RandomEffect,
    pub phi: f64,
    pub tau: f64,
    pub alpha: f64,
    #[serde(default)]
    pub beta: Vec<f64>,
    /// Precision of independent Gaussian noise added to the response.
    #[serde(default)]
    pub nugget_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub jitter: f64,
}

/// Draws `s ~ N(0, τ⁻¹R(φ))` on the sites of `d`, then responses
/// `y ~ Poisson(E·exp(α + xβ + s))` or `y = α + xβ + s (+ noise)`.
pub fn simulate(
    spec: &SimulationSpec,
    d: &DistanceMatrix,
    covariates: &DMatrix<f64>,
    offset: Option<&[f64]>,
    seed: u64,
) -> Result<Simulation, InferenceError> {
    let RandomEffect::Hgp(smoothness) = spec.random_effect else {
        return Err(InferenceError::InvalidModel(
            "simulation supports the hgp random effects only".into(),
        ));
    };
    let n = d.n();
    if covariates.nrows() != n || covariates.ncols() != spec.beta.len() {
        return Err(InferenceError::InvalidModel(format!(
            "covariates must be {n}×{}",
            spec.beta.len()
        )));
    }
    if !(spec.tau.is_finite() && spec.tau > 0.0) {
        return Err(InferenceError::InvalidModel(format!("tau must be positive, got {}", spec.tau)));
    }
    let r = correlation_matrix(&CorrelationModel::new(smoothness, spec.phi)?, d);
    let chol = chol_with_jitter(&r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
    let s = (chol.l() * z) / spec.tau.sqrt();
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let eta = spec.alpha
            + (0..spec.beta.len()).map(|j| covariates[(i, j)] * spec.beta[j]).sum::<f64>()
            + s[i];
        y.push(match spec.likelihood {
            Likelihood::PoissonOffset => {
                let e = offset.ok_or_else(|| {
                    InferenceError::InvalidModel("poisson simulation needs an offset".into())
                })?[i];
                if !(e > 0.0) {
                    return Err(InferenceError::NonPositiveOffset {
                        site: d.ids()[i].clone(),
                        value: e,
                    });
                }
                let mu = e * eta.exp();
                if mu > 0.0 {
                    Poisson::new(mu)
                        .map_err(|err| InferenceError::InvalidModel(err.to_string()))?
                        .sample(&mut rng)
                } else {
                    0.0
                }
            }
            Likelihood::Gaussian => match spec.nugget_precision {
                Some(p) => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    eta + e / p.sqrt()
                }
                None => eta,
            },
        });
    }
    Ok(Simulation {
        s: s.as_slice().to_vec(),
        y,
        jitter: chol.jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::Smoothness;
    use crate::metricspace::DistanceKind;

    fn line(n: usize) -> DistanceMatrix {
        let ids = (0..n).map(|i| i.to_string()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| (i as f64 - j as f64).abs());
        DistanceMatrix::from_matrix(ids, m, DistanceKind::Hausdorff, 0.0, None).unwrap()
    }

    fn spec(tau: f64) -> SimulationSpec {
        SimulationSpec {
            likelihood: Likelihood::Gaussian,
            random_effect: RandomEffect::Hgp(Smoothness::Half),
            phi: 3.0,
            tau,
            alpha: 1.0,
            beta: vec![],
            nugget_precision: None,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = line(6);
        let x = DMatrix::zeros(6, 0);
        let a = simulate(&spec(1.0), &d, &x, None, 3).unwrap();
        assert_eq!(a, simulate(&spec(1.0), &d, &x, None, 3).unwrap());
        assert_ne!(a, simulate(&spec(1.0), &d, &x, None, 4).unwrap());
    }

    #[test]
    fn huge_precision_removes_latent() {
        let d = line(5);
        let x = DMatrix::zeros(5, 0);
        let sim = simulate(&spec(1e12), &d, &x, None, 1).unwrap();
        assert!(sim.y.iter().all(|y| (y - 1.0).abs() < 1e-4));
    }

    #[test]
    fn marginal_variance_matches_tau() {
        let d = line(4);
        let x = DMatrix::zeros(4, 0);
        let reps = 1000;
        let draws: Vec<f64> = (0..reps)
            .map(|r| simulate(&spec(4.0), &d, &x, None, r).unwrap().s[2])
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.1, "{var}");
    }
}
