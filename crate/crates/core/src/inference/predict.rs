//! Posterior predictive distribution of the latent field and the response at
//! new geometries (points, polygons, or another partition of the region).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::diagnostics::hpd;
use super::model::{Likelihood, RandomEffect};
use super::PosteriorSamples;
use crate::covariance::{chol_with_jitter, correlation_from_distances, CorrelationModel};
use crate::error::InferenceError;
use crate::geometry::GeometrySet;
use crate::metricspace::{cross_distances, default_densify, distance_matrix, DistanceOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SitePrediction {
    pub id: String,
    pub s_mean: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// Predictive relative risk `λ` (Poisson) or response (Gaussian).
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Conditional mean and variance of `s_new | s_obs` when
/// `(s_obs, s_new) ~ N(0, τ⁻¹[[R_oo, R_on], [R_no, R_nn]])`.
///
/// `r_no` is `m × n`; only the diagonal of `R_nn` is needed.
pub fn conditional_gaussian(
    r_oo: &DMatrix<f64>,
    r_no: &DMatrix<f64>,
    r_nn_diag: &[f64],
    s_obs: &DVector<f64>,
    tau: f64,
) -> Result<(Vec<f64>, Vec<f64>), InferenceError> {
    let chol = chol_with_jitter(r_oo)?;
    let a = chol.factor.solve(&r_no.transpose());
    let mean = a.transpose() * s_obs;
    let var = (0..r_no.nrows())
        .map(|j| ((r_nn_diag[j] - r_no.row(j).dot(&a.column(j).transpose())) / tau).max(0.0))
        .collect();
    Ok((mean.as_slice().to_vec(), var))
}

/// Predicts at `gs_new` from an HGP fit on `gs_obs`.
///
/// For each posterior draw the latent value at every new site is drawn from
/// its conditional Gaussian given the fitted latent field; distances to the
/// observed sites are Hausdorff distances computed with `distance`.
/// Adjacency-based effects have no covariance off the observed partition
/// and are refused.
pub fn predict(
    ps: &PosteriorSamples,
    gs_obs: &GeometrySet,
    gs_new: &GeometrySet,
    new_covariates: &DMatrix<f64>,
    distance: &DistanceOptions,
    seed: u64,
) -> Result<Vec<SitePrediction>, InferenceError> {
    let RandomEffect::Hgp(smoothness) = ps.spec.random_effect else {
        return Err(InferenceError::UnsupportedPrediction(
            ps.spec.random_effect.label().to_string(),
        ));
    };
    let m = gs_new.len();
    if gs_obs.ids() != ps.site_ids.as_slice() {
        return Err(InferenceError::InvalidModel(
            "observed geometries do not match the fitted sites".into(),
        ));
    }
    let p = ps.param_names.iter().filter(|n| n.starts_with("beta_")).count();
    if new_covariates.nrows() != m || new_covariates.ncols() != p {
        return Err(InferenceError::InvalidModel(format!(
            "expected a {m}×{p} covariate matrix for the new sites, got {}×{}",
            new_covariates.nrows(),
            new_covariates.ncols()
        )));
    }
    let densify = distance.densify.unwrap_or_else(|| default_densify(gs_obs));
    let opts = DistanceOptions {
        densify: Some(densify),
        ..*distance
    };
    let d_oo = distance_matrix(gs_obs, &opts)?;
    let d_no = cross_distances(gs_new, gs_obs, &opts, densify)?;

    let idx = |name: &str| ps.param_index(name);
    let (ia, it, ip) = (idx("alpha").unwrap(), idx("tau").unwrap(), idx("phi").unwrap());
    let inug = idx("tau_nugget");
    let beta_idx: Vec<usize> = (0..ps.param_names.len())
        .filter(|&k| ps.param_names[k].starts_with("beta_"))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = ps.n_draws();
    let mut s_draws = vec![Vec::with_capacity(total); m];
    let mut y_draws = vec![Vec::with_capacity(total); m];
    let mut cached: Option<(u64, DMatrix<f64>, Vec<f64>)> = None;
    for chain in &ps.chains {
        for (row, latent) in chain.params.iter().zip(&chain.latent) {
            let phi = row[ip];
            if cached.as_ref().is_none_or(|c| c.0 != phi.to_bits()) {
                let model = CorrelationModel::new(smoothness, phi)?;
                let r_oo = correlation_from_distances(&model, d_oo.matrix());
                let r_no = correlation_from_distances(&model, &d_no);
                let chol = chol_with_jitter(&r_oo)?;
                let a = chol.factor.solve(&r_no.transpose());
                let resid: Vec<f64> = (0..m)
                    .map(|j| (1.0 - r_no.row(j).dot(&a.column(j).transpose())).max(0.0))
                    .collect();
                cached = Some((phi.to_bits(), a, resid));
            }
            let (_, a, resid) = cached.as_ref().unwrap();
            let tau = row[it];
            let s_obs = DVector::from_column_slice(latent);
            let mean = a.transpose() * &s_obs;
            for j in 0..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                let s = mean[j] + (resid[j] / tau).sqrt() * z;
                let fixed = row[ia]
                    + beta_idx
                        .iter()
                        .enumerate()
                        .map(|(c, &k)| row[k] * new_covariates[(j, c)])
                        .sum::<f64>();
                let y = match ps.spec.likelihood {
                    Likelihood::PoissonOffset => (fixed + s).exp(),
                    Likelihood::Gaussian => match inug {
                        Some(k) => {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            fixed + s + e / row[k].sqrt()
                        }
                        None => fixed + s,
                    },
                };
                s_draws[j].push(s);
                y_draws[j].push(y);
            }
        }
    }
    gs_new
        .ids()
        .iter()
        .enumerate()
        .map(|(j, id)| {
            let sh = hpd(&s_draws[j], 0.95)?;
            let yh = hpd(&y_draws[j], 0.95)?;
            Ok(SitePrediction {
                id: id.clone(),
                s_mean: s_draws[j].iter().sum::<f64>() / total as f64,
                s_lo: sh.lo,
                s_hi: sh.hi,
                mean: y_draws[j].iter().sum::<f64>() / total as f64,
                lo: yh.lo,
                hi: yh.hi,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bivariate_conditioning_by_hand() {
        let r_oo = DMatrix::from_element(1, 1, 1.0);
        let r_no = DMatrix::from_element(1, 1, 0.5);
        let (mean, var) =
            conditional_gaussian(&r_oo, &r_no, &[1.0], &DVector::from_element(1, 2.0), 1.0).unwrap();
        assert!((mean[0] - 1.0).abs() < 1e-15);
        assert!((var[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_site_keeps_prior_marginal() {
        let r_oo = DMatrix::identity(2, 2);
        let r_no = DMatrix::zeros(1, 2);
        let s = DVector::from_vec(vec![3.0, -1.0]);
        let (mean, var) = conditional_gaussian(&r_oo, &r_no, &[1.0], &s, 4.0).unwrap();
        assert_eq!(mean[0], 0.0);
        assert_eq!(var[0], 0.25);
    }
}
