//! Bayesian fitting of spatial generalized linear mixed models.
//!
//! Observations follow a Poisson likelihood with offset or a Gaussian one,
//! with linear predictor `α + xβ + s`. The latent field `s` is a
//! Hausdorff-Gaussian process, a scaled ICAR, BYM2 or Leroux effect, or
//! absent. Fitting uses adaptive Metropolis chains that stop once the
//! log-likelihood trace reaches a target effective sample size.

mod compare;
mod diagnostics;
mod latent;
mod model;
mod predict;
mod sampler;
mod simulate;

pub use compare::{compare, WaicRow};
pub use diagnostics::{ess, hpd, waic, Ess, Hpd, Waic, MIN_ESS_DRAWS, MIN_HPD_SAMPLES};
pub use model::{Likelihood, McmcSettings, ModelData, ModelSpec, PriorSet, RandomEffect};
pub use predict::{conditional_gaussian, predict, SitePrediction};
pub use sampler::{adaptive_metropolis, fit, SUM_TO_ZERO_PRECISION};
pub use simulate::{simulate, Simulation, SimulationSpec};

use crate::error::InferenceError;
use crate::geometry::{derive_adjacency, AdjacencyMatrix, GeometrySet};
use crate::metricspace::{distance_matrix, DistanceMatrix, DistanceOptions};

/// The spatial information a random effect is built from.
#[derive(Debug, Clone)]
pub enum SpatialInput {
    Distances(DistanceMatrix),
    Adjacency(AdjacencyMatrix),
    None,
}

impl SpatialInput {
    /// Computes whatever `effect` needs from the geometries.
    pub fn for_effect(
        effect: RandomEffect,
        gs: &GeometrySet,
        distance: &DistanceOptions,
        adjacency_tolerance: f64,
    ) -> Result<Self, InferenceError> {
        Ok(if effect.is_hgp() {
            SpatialInput::Distances(distance_matrix(gs, distance)?)
        } else if effect.is_areal() {
            SpatialInput::Adjacency(derive_adjacency(gs, adjacency_tolerance)?)
        } else {
            SpatialInput::None
        })
    }
}

/// Bounds `(a, b)` of the uniform prior on the practical range: `a` is the
/// smallest positive distance between two sites and `b` half the largest.
pub fn derive_phi_prior(d: &DistanceMatrix) -> Result<(f64, f64), InferenceError> {
    let mut a = f64::INFINITY;
    let mut max = 0.0f64;
    for v in d.off_diagonal() {
        if v > 0.0 {
            a = a.min(v);
        }
        max = max.max(v);
    }
    if !a.is_finite() {
        return Err(InferenceError::PhiPrior(
            "all pairwise distances are zero; set explicit phi prior bounds".into(),
        ));
    }
    let b = max / 2.0;
    if a >= b {
        return Err(InferenceError::PhiPrior(format!(
            "smallest distance {a} is not below half the largest ({b}); set explicit phi prior bounds"
        )));
    }
    Ok((a, b))
}

/// Retained draws of one chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainSamples {
    pub chain: usize,
    /// Sampler iteration (1-based) at which each draw was taken.
    pub iterations: Vec<usize>,
    /// One row per draw, ordered as [`PosteriorSamples::param_names`].
    pub params: Vec<Vec<f64>>,
    /// Latent field per draw, in site order.
    pub latent: Vec<Vec<f64>>,
    /// Log density of each observed response per draw.
    pub pointwise: Vec<Vec<f64>>,
    pub loglik: Vec<f64>,
    pub acceptance: Vec<(String, f64)>,
    pub max_jitter: f64,
    pub jittered_factorizations: usize,
    /// Proposals rejected because their covariance failed to factor.
    pub rejected_non_pd: usize,
    pub stop_iteration: usize,
    pub converged: bool,
    pub ess_loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub ess: f64,
    pub hpd_excludes_median: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub label: String,
    /// The fitted model, with derived prior bounds filled in.
    pub spec: ModelSpec,
    pub param_names: Vec<String>,
    pub site_ids: Vec<String>,
    /// Indices of sites with an observed response.
    pub observed: Vec<usize>,
    pub fingerprint: String,
    pub chains: Vec<ChainSamples>,
}

impl PosteriorSamples {
    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.params.len()).sum()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|p| p == name)
    }

    /// Draws of one parameter pooled over chains.
    pub fn param(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.param_index(name)?;
        Some(self.chains.iter().flat_map(|c| c.params.iter().map(move |r| r[k])).collect())
    }

    pub fn pointwise(&self) -> Vec<Vec<f64>> {
        self.chains.iter().flat_map(|c| c.pointwise.iter().cloned()).collect()
    }

    pub fn latent_mean(&self) -> Vec<f64> {
        let n = self.site_ids.len();
        let mut mean = vec![0.0; n];
        let total = self.n_draws() as f64;
        for row in self.chains.iter().flat_map(|c| &c.latent) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / total;
            }
        }
        mean
    }

    pub fn waic(&self) -> Result<Waic, InferenceError> {
        waic(&self.pointwise())
    }

    pub fn waic_row(&self) -> Result<WaicRow, InferenceError> {
        let w = self.waic()?;
        Ok(WaicRow {
            label: self.label.clone(),
            waic: w.waic,
            lppd: w.lppd,
            p_waic: w.p_waic,
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// Posterior mean, 95% HPD interval and ESS (summed over chains) for
    /// every parameter.
    pub fn summary(&self) -> Result<Vec<ParamSummary>, InferenceError> {
        self.param_names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let pooled = self.param(name).unwrap_or_default();
                let h = hpd(&pooled, 0.95)?;
                let mut e = 0.0;
                for c in &self.chains {
                    let trace: Vec<f64> = c.params.iter().map(|r| r[k]).collect();
                    e += ess(&trace)?.ess;
                }
                Ok(ParamSummary {
                    name: name.clone(),
                    mean: pooled.iter().sum::<f64>() / pooled.len() as f64,
                    hpd_lo: h.lo,
                    hpd_hi: h.hi,
                    ess: e,
                    hpd_excludes_median: h.excludes_median,
                })
            })
            .collect()
    }
}
