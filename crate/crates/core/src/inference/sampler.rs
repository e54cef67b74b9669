//! Adaptive componentwise random-walk Metropolis.
//!
//! Each scalar coordinate has its own Gaussian proposal whose scale is tuned
//! during burn-in toward the target acceptance rate and frozen afterwards.
//! Positive parameters move on the log scale and bounded ones on the logit
//! scale. The intercept is sampled against centred covariates, which removes
//! most of its posterior correlation with the slopes; an extra move shifts
//! the intercept and the whole latent field in opposite directions, leaving
//! the linear predictor unchanged.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use rayon::prelude::*;

use super::diagnostics::{ess, MIN_ESS_DRAWS};
use super::latent::{LatentBase, Precision};
use super::model::{Likelihood, McmcSettings, ModelData, ModelSpec, RandomEffect};
use super::{derive_phi_prior, ChainSamples, PosteriorSamples, SpatialInput};
use crate::covariance::{chol_with_jitter, JitteredCholesky};
use crate::error::{CovarianceError, InferenceError};

/// Precision of the penalty `−½·k·(Σ_c s_i)²` tying each connected component
/// of an ICAR field to sum (approximately) to zero.
pub const SUM_TO_ZERO_PRECISION: f64 = 100.0;

const INIT_ATTEMPTS: usize = 100;

/// Iterations between exact recomputations of cached quadratic forms.
const REFRESH_INTERVAL: usize = 100;

#[derive(Debug, Clone)]
struct Proposal {
    log_scale: f64,
    batch_accepted: usize,
    batch_tried: usize,
    batches: usize,
    accepted: usize,
    tried: usize,
}

impl Proposal {
    fn new(scale: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            batch_accepted: 0,
            batch_tried: 0,
            batches: 0,
            accepted: 0,
            tried: 0,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        z * self.log_scale.exp()
    }

    fn record(&mut self, accepted: bool) {
        self.batch_tried += 1;
        self.tried += 1;
        if accepted {
            self.batch_accepted += 1;
            self.accepted += 1;
        }
    }

    fn adapt(&mut self, target: f64) {
        if self.batch_tried == 0 {
            return;
        }
        self.batches += 1;
        let rate = self.batch_accepted as f64 / self.batch_tried as f64;
        let step = (1.0 / (self.batches as f64).sqrt()).min(0.5);
        self.log_scale += if rate > target { step } else { -step };
        self.batch_accepted = 0;
        self.batch_tried = 0;
    }

    /// Drops the burn-in counts so reported rates cover retained sampling.
    fn reset_counts(&mut self) {
        self.accepted = 0;
        self.tried = 0;
        self.batch_accepted = 0;
        self.batch_tried = 0;
    }

    fn rate(&self) -> f64 {
        if self.tried == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

fn accept<R: Rng>(rng: &mut R, log_ratio: f64) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Componentwise adaptive random-walk Metropolis on an arbitrary log density.
///
/// Runs `burn_in · max_iterations` adaptation sweeps, then returns every
/// `thin`-th state of the remaining sweeps.
pub fn adaptive_metropolis<F>(
    log_density: F,
    init: &[f64],
    settings: &McmcSettings,
) -> Result<Vec<Vec<f64>>, InferenceError>
where
    F: Fn(&[f64]) -> f64,
{
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x = init.to_vec();
    let mut lp = log_density(&x);
    if !lp.is_finite() {
        return Err(InferenceError::Initialization { attempts: 1 });
    }
    let mut props = vec![Proposal::new(1.0); x.len()];
    let burn = settings.burn_iterations();
    let mut out = Vec::new();
    for it in 0..settings.max_iterations {
        for k in 0..x.len() {
            let old = x[k];
            x[k] = old + props[k].draw(&mut rng);
            let cand = log_density(&x);
            let ok = cand.is_finite() && accept(&mut rng, cand - lp);
            if ok {
                lp = cand;
            } else {
                x[k] = old;
            }
            props[k].record(ok);
        }
        if it < burn {
            if (it + 1) % settings.adapt_interval == 0 {
                props.iter_mut().for_each(|p| p.adapt(settings.target_acceptance));
            }
        } else if (it - burn).is_multiple_of(settings.thin) {
            out.push(x.clone());
        }
    }
    Ok(out)
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Positions of each sampled coordinate in the unconstrained parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    p: usize,
    tau: Option<usize>,
    hyper: Option<usize>,
    nugget: Option<usize>,
    len: usize,
}

/// Everything that stays fixed across iterations and chains.
pub(crate) struct Prepared {
    spec: ModelSpec,
    n: usize,
    obs: Vec<usize>,
    is_obs: Vec<bool>,
    y: Vec<f64>,
    log_offset: Vec<f64>,
    log_factorial: Vec<f64>,
    /// Covariates minus their column means.
    xc: DMatrix<f64>,
    x_mean: Vec<f64>,
    base: LatentBase,
    soft: Vec<Vec<usize>>,
    layout: Layout,
    phi_bounds: Option<(f64, f64)>,
    collapsed: bool,
    init_precision: f64,
    pub param_names: Vec<String>,
}

impl Prepared {
    pub fn new(
        spec: &ModelSpec,
        data: &ModelData,
        spatial: &SpatialInput,
    ) -> Result<Self, InferenceError> {
        spec.validate()?;
        let n = data.n();
        let re = spec.random_effect;
        let mut phi_bounds = None;
        let base = match (re, spatial) {
            (RandomEffect::None, _) => LatentBase::None,
            (RandomEffect::Hgp(smoothness), SpatialInput::Distances(d)) => {
                check_sites(data, d.ids())?;
                let bounds = match spec.priors.phi {
                    Some(b) => b,
                    None => derive_phi_prior(d)?,
                };
                phi_bounds = Some(bounds);
                LatentBase::Hgp {
                    smoothness,
                    distances: d.matrix().clone(),
                }
            }
            (RandomEffect::Icar, SpatialInput::Adjacency(w)) => {
                check_sites(data, w.ids())?;
                LatentBase::icar(w)?
            }
            (RandomEffect::Bym2, SpatialInput::Adjacency(w)) => {
                check_sites(data, w.ids())?;
                LatentBase::bym2(w)?
            }
            (RandomEffect::Leroux, SpatialInput::Adjacency(w)) => {
                check_sites(data, w.ids())?;
                LatentBase::leroux(w)?
            }
            (re, _) => {
                return Err(InferenceError::InvalidModel(format!(
                    "the `{re}` random effect needs {}",
                    if re.is_hgp() {
                        "a distance matrix"
                    } else {
                        "an adjacency matrix"
                    }
                )))
            }
        };

        let mut y = vec![f64::NAN; n];
        let mut is_obs = vec![false; n];
        for (i, v) in data.response.iter().enumerate() {
            if let Some(v) = *v {
                if !v.is_finite() {
                    return Err(InferenceError::InvalidModel(format!(
                        "site `{}`: response is not finite",
                        data.ids[i]
                    )));
                }
                y[i] = v;
                is_obs[i] = true;
            }
        }
        let obs: Vec<usize> = (0..n).filter(|&i| is_obs[i]).collect();

        let mut log_offset = vec![0.0; n];
        let mut log_factorial = vec![0.0; n];
        if spec.likelihood == Likelihood::PoissonOffset {
            let e = data.offset.as_ref().ok_or_else(|| {
                InferenceError::InvalidModel("the poisson likelihood needs an offset column".into())
            })?;
            for i in 0..n {
                if !(e[i].is_finite() && e[i] > 0.0) {
                    return Err(InferenceError::NonPositiveOffset {
                        site: data.ids[i].clone(),
                        value: e[i],
                    });
                }
                log_offset[i] = e[i].ln();
            }
            for &i in &obs {
                if y[i] < 0.0 || y[i].fract() != 0.0 {
                    return Err(InferenceError::InvalidModel(format!(
                        "site `{}`: poisson response must be a nonnegative integer, got {}",
                        data.ids[i], y[i]
                    )));
                }
                log_factorial[i] = (2..=(y[i] as u64)).map(|k| (k as f64).ln()).sum();
            }
        }

        let p = data.covariates.ncols();
        let x_mean: Vec<f64> = (0..p)
            .map(|j| data.covariates.column(j).sum() / n as f64)
            .collect();
        let xc = DMatrix::from_fn(n, p, |i, j| data.covariates[(i, j)] - x_mean[j]);

        let has_latent = re != RandomEffect::None;
        let mut len = 1 + p;
        let mut take = |cond: bool| {
            cond.then(|| {
                len += 1;
                len - 1
            })
        };
        let tau = take(has_latent);
        let hyper = take(re.hyper_name().is_some());
        let nugget = take(spec.nugget);
        let layout = Layout {
            p,
            tau,
            hyper,
            nugget,
            len,
        };

        let mut param_names = vec!["alpha".to_string()];
        param_names.extend(data.covariate_names.iter().map(|c| format!("beta_{c}")));
        if has_latent {
            param_names.push("tau".into());
        }
        if let Some(h) = re.hyper_name() {
            param_names.push(h.into());
        }
        if spec.nugget {
            param_names.push("tau_nugget".into());
        }

        let init_precision = working_precision(spec.likelihood, &y, &log_offset, &obs);
        let collapsed = spec.likelihood == Likelihood::Gaussian && spec.mcmc.collapse && has_latent;
        Ok(Self {
            spec: spec.clone(),
            n,
            obs,
            is_obs,
            y,
            log_offset,
            log_factorial,
            xc,
            x_mean,
            soft: base.constrained_components(),
            base,
            layout,
            phi_bounds,
            collapsed,
            init_precision,
            param_names,
        })
    }

    pub fn phi_bounds(&self) -> Option<(f64, f64)> {
        self.phi_bounds
    }

    fn hyper_value(&self, z: f64) -> f64 {
        match self.phi_bounds {
            Some((a, b)) => a + (b - a) * sigmoid(z),
            None => sigmoid(z),
        }
    }

    fn hyper_of(&self, theta: &[f64]) -> f64 {
        self.layout.hyper.map_or(f64::NAN, |k| self.hyper_value(theta[k]))
    }

    fn tau_of(&self, theta: &[f64]) -> f64 {
        self.layout.tau.map_or(f64::INFINITY, |k| theta[k].exp())
    }

    fn nugget_of(&self, theta: &[f64]) -> f64 {
        self.layout.nugget.map_or(f64::INFINITY, |k| theta[k].exp())
    }

    /// Intercept on the original covariate scale.
    fn alpha_of(&self, theta: &[f64]) -> f64 {
        theta[0] - (0..self.layout.p).map(|j| self.x_mean[j] * theta[1 + j]).sum::<f64>()
    }

    /// Log prior density of the unconstrained coordinates, Jacobians included.
    fn log_prior(&self, theta: &[f64]) -> f64 {
        let pr = &self.spec.priors;
        let l = &self.layout;
        let normal = |x: f64, sd: f64| -0.5 * (x / sd).powi(2);
        let mut lp = normal(self.alpha_of(theta), pr.alpha_sd);
        for j in 0..l.p {
            lp += normal(theta[1 + j], pr.beta_sd);
        }
        // Gamma(a, b) on exp(z), times the Jacobian exp(z)
        let log_gamma = |z: f64, a: f64, b: f64| a * z - b * z.exp();
        if let Some(k) = l.tau {
            lp += log_gamma(theta[k], pr.tau_shape, pr.tau_rate);
        }
        if let Some(k) = l.nugget {
            lp += log_gamma(theta[k], pr.nugget_shape, pr.nugget_rate);
        }
        if let Some(k) = l.hyper {
            lp += log_sigmoid(theta[k]) + log_sigmoid(-theta[k]);
        }
        lp
    }

    fn fixed_effect(&self, theta: &[f64], i: usize) -> f64 {
        theta[0] + (0..self.layout.p).map(|j| self.xc[(i, j)] * theta[1 + j]).sum::<f64>()
    }

    /// Log density of observation `i` given its full linear predictor.
    #[inline]
    fn site_loglik(&self, i: usize, eta: f64, nugget: f64) -> f64 {
        match self.spec.likelihood {
            Likelihood::PoissonOffset => self.y[i] * eta - eta.exp() - self.log_factorial[i],
            Likelihood::Gaussian => {
                0.5 * (nugget / (2.0 * PI)).ln() - 0.5 * nugget * (self.y[i] - eta).powi(2)
            }
        }
    }

    fn draw_from_prior<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let pr = &self.spec.priors;
        let l = &self.layout;
        let mut theta = vec![0.0; l.len];
        let normal = |sd: f64, rng: &mut R| Normal::new(0.0, sd).unwrap().sample(rng);
        for j in 0..l.p {
            theta[1 + j] = normal(pr.beta_sd, rng);
        }
        let alpha = normal(pr.alpha_sd, rng);
        theta[0] = alpha + (0..l.p).map(|j| self.x_mean[j] * theta[1 + j]).sum::<f64>();
        let gamma = |a: f64, b: f64, rng: &mut R| {
            Gamma::new(a, 1.0 / b).unwrap().sample(rng).max(f64::MIN_POSITIVE).ln()
        };
        if let Some(k) = l.tau {
            theta[k] = gamma(pr.tau_shape, pr.tau_rate, rng);
        }
        if let Some(k) = l.nugget {
            theta[k] = gamma(pr.nugget_shape, pr.nugget_rate, rng);
        }
        if let Some(k) = l.hyper {
            let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            theta[k] = logit(u);
        }
        theta
    }

    fn default_init(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut theta = vec![0.0; l.len];
        if let Some(k) = l.tau {
            theta[k] = self.init_precision.ln();
        }
        if let Some(k) = l.nugget {
            theta[k] = self.init_precision.ln();
        }
        theta
    }

    fn output_row(&self, theta: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut row = vec![self.alpha_of(theta)];
        row.extend_from_slice(&theta[1..1 + l.p]);
        if l.tau.is_some() {
            row.push(self.tau_of(theta));
        }
        if l.hyper.is_some() {
            row.push(self.hyper_of(theta));
        }
        if l.nugget.is_some() {
            row.push(self.nugget_of(theta));
        }
        row
    }
}

fn check_sites(data: &ModelData, ids: &[String]) -> Result<(), InferenceError> {
    if data.ids != ids {
        return Err(InferenceError::InvalidModel(
            "spatial input and data disagree on the site order".into(),
        ));
    }
    Ok(())
}

/// `1 / var` of the working residuals, or 1 when that is undefined.
fn working_precision(lik: Likelihood, y: &[f64], log_offset: &[f64], obs: &[usize]) -> f64 {
    let z: Vec<f64> = obs
        .iter()
        .map(|&i| match lik {
            Likelihood::PoissonOffset => ((y[i] + 0.5).ln()) - log_offset[i],
            Likelihood::Gaussian => y[i],
        })
        .collect();
    if z.len() < 2 {
        return 1.0;
    }
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    if var.is_finite() && var > 1e-12 {
        1.0 / var
    } else {
        1.0
    }
}

/// Running jitter statistics for one chain.
#[derive(Debug, Clone, Copy, Default)]
struct JitterLedger {
    max: f64,
    count: usize,
    non_pd: usize,
}

impl JitterLedger {
    fn note(&mut self, jitter: f64) {
        if jitter > 0.0 {
            self.count += 1;
            self.max = self.max.max(jitter);
        }
    }
}

/// Latent-field state for the componentwise sampler.
struct LatentState {
    s: DVector<f64>,
    prec: Precision,
    /// `S·s`.
    ss: DVector<f64>,
    /// `sᵀS s`.
    quad: f64,
    /// `S·1` and `1ᵀS1`, for the intercept shift move.
    s1: DVector<f64>,
    one_s_one: f64,
    comp_sums: Vec<f64>,
}

impl LatentState {
    fn new(s: DVector<f64>, prec: Precision, soft: &[Vec<usize>]) -> Self {
        let n = s.len();
        let ss = &prec.s * &s;
        let quad = s.dot(&ss);
        let s1 = &prec.s * DVector::from_element(n, 1.0);
        let one_s_one = s1.sum();
        let comp_sums = soft.iter().map(|c| c.iter().map(|&i| s[i]).sum()).collect();
        Self {
            s,
            prec,
            ss,
            quad,
            s1,
            one_s_one,
            comp_sums,
        }
    }

    fn refresh(&mut self, soft: &[Vec<usize>]) {
        let s = std::mem::replace(&mut self.s, DVector::zeros(0));
        let prec = std::mem::replace(
            &mut self.prec,
            Precision {
                s: DMatrix::zeros(0, 0),
                log_det: 0.0,
                rank: 0,
                jitter: 0.0,
            },
        );
        *self = LatentState::new(s, prec, soft);
    }

    fn soft_penalty(&self) -> f64 {
        -0.5 * SUM_TO_ZERO_PRECISION * self.comp_sums.iter().map(|c| c * c).sum::<f64>()
    }

    /// `log p(s | τ, h)` up to a constant.
    fn log_density(&self, tau: f64) -> f64 {
        0.5 * self.prec.rank as f64 * tau.ln() + 0.5 * self.prec.log_det - 0.5 * tau * self.quad
            + self.soft_penalty()
    }
}

struct CollapsedFactor {
    key: (u64, u64),
    k: DMatrix<f64>,
    chol: JitteredCholesky,
}

struct Chain<'a> {
    m: &'a Prepared,
    rng: ChaCha8Rng,
    theta: Vec<f64>,
    /// Full linear predictor per site (componentwise mode).
    eta: Vec<f64>,
    site_ll: Vec<f64>,
    ll: f64,
    latent: Option<LatentState>,
    factors: Vec<CollapsedFactor>,
    props: Vec<Proposal>,
    site_props: Vec<Proposal>,
    shift_prop: Proposal,
    jitter: JitterLedger,
}

impl<'a> Chain<'a> {
    fn new(m: &'a Prepared, chain: usize) -> Result<Self, InferenceError> {
        let seed = m.spec.mcmc.seed.wrapping_add(chain as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = m.default_init();
        let mut last_err = None;
        for attempt in 0..=INIT_ATTEMPTS {
            if attempt > 0 {
                theta = m.draw_from_prior(&mut rng);
            }
            let mut chain = Chain {
                m,
                rng: ChaCha8Rng::seed_from_u64(0),
                theta: theta.clone(),
                eta: vec![0.0; m.n],
                site_ll: vec![0.0; m.n],
                ll: 0.0,
                latent: None,
                factors: Vec::new(),
                props: Vec::new(),
                site_props: Vec::new(),
                shift_prop: Proposal::new(0.1),
                jitter: JitterLedger::default(),
            };
            match chain.initialize() {
                Ok(lp) if lp.is_finite() => {
                    chain.rng = rng;
                    return Ok(chain);
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        match last_err {
            Some(e @ InferenceError::Covariance(_)) => Err(e),
            _ => Err(InferenceError::Initialization {
                attempts: INIT_ATTEMPTS,
            }),
        }
    }

    /// Builds caches for the current `theta` and returns the log posterior.
    fn initialize(&mut self) -> Result<f64, InferenceError> {
        let m = self.m;
        let l = &m.layout;
        let mut props = vec![Proposal::new(0.1); l.len];
        for j in 0..l.p {
            let sd = m.xc.column(j).norm() / (m.n as f64).sqrt();
            props[1 + j] = Proposal::new(if sd > 0.0 { 0.1 / sd } else { 0.1 });
        }
        if let Some(k) = l.tau {
            props[k] = Proposal::new(0.3);
        }
        if let Some(k) = l.hyper {
            props[k] = Proposal::new(0.5);
        }
        if let Some(k) = l.nugget {
            props[k] = Proposal::new(0.3);
        }
        self.props = props;

        if m.collapsed {
            let ll = self.collapsed_loglik(&self.theta.clone())?;
            self.ll = ll;
            return Ok(ll + m.log_prior(&self.theta));
        }
        if l.tau.is_some() {
            let prec = m.base.precision(m.hyper_of(&self.theta))?;
            self.jitter.note(prec.jitter);
            self.latent = Some(LatentState::new(DVector::zeros(m.n), prec, &m.soft));
            self.site_props = vec![Proposal::new(0.1); m.n];
        }
        self.recompute_eta();
        let tau = m.tau_of(&self.theta);
        let prior_s = self.latent.as_ref().map_or(0.0, |ls| ls.log_density(tau));
        Ok(self.ll + prior_s + m.log_prior(&self.theta))
    }

    fn recompute_eta(&mut self) {
        let m = self.m;
        let nug = m.nugget_of(&self.theta);
        self.ll = 0.0;
        for i in 0..m.n {
            let s = self.latent.as_ref().map_or(0.0, |ls| ls.s[i]);
            self.eta[i] = m.log_offset[i] + m.fixed_effect(&self.theta, i) + s;
            self.site_ll[i] = if m.is_obs[i] {
                m.site_loglik(i, self.eta[i], nug)
            } else {
                0.0
            };
            self.ll += self.site_ll[i];
        }
    }

    fn step(&mut self) {
        if self.m.collapsed {
            self.step_collapsed();
        } else {
            self.step_componentwise();
        }
    }

    fn step_componentwise(&mut self) {
        let m = self.m;
        let l = m.layout.clone();
        let nug = m.nugget_of(&self.theta);

        // intercept and slopes: every observation moves
        for k in 0..=l.p {
            let delta = self.props[k].draw(&mut self.rng);
            let mut cand = self.theta.clone();
            cand[k] += delta;
            let new_ll: f64 = m
                .obs
                .iter()
                .map(|&i| {
                    let dx = if k == 0 { delta } else { delta * m.xc[(i, k - 1)] };
                    m.site_loglik(i, self.eta[i] + dx, nug)
                })
                .sum();
            let ratio = new_ll - self.ll + m.log_prior(&cand) - m.log_prior(&self.theta);
            let ok = ratio.is_finite() && accept(&mut self.rng, ratio);
            if ok {
                for i in 0..m.n {
                    self.eta[i] += if k == 0 { delta } else { delta * m.xc[(i, k - 1)] };
                    if m.is_obs[i] {
                        self.site_ll[i] = m.site_loglik(i, self.eta[i], nug);
                    }
                }
                self.ll = self.site_ll.iter().sum();
                self.theta = cand;
            }
            self.props[k].record(ok);
        }

        if let Some(k) = l.nugget {
            let mut cand = self.theta.clone();
            cand[k] += self.props[k].draw(&mut self.rng);
            let nug_new = cand[k].exp();
            let new_ll: f64 = m
                .obs
                .iter()
                .map(|&i| m.site_loglik(i, self.eta[i], nug_new))
                .sum();
            let ratio = new_ll - self.ll + m.log_prior(&cand) - m.log_prior(&self.theta);
            let ok = ratio.is_finite() && accept(&mut self.rng, ratio);
            if ok {
                self.theta = cand;
                for &i in &m.obs {
                    self.site_ll[i] = m.site_loglik(i, self.eta[i], nug_new);
                }
                self.ll = new_ll;
            }
            self.props[k].record(ok);
        }

        let Some(tk) = l.tau else { return };
        let nug = m.nugget_of(&self.theta);

        // precision
        {
            let ls = self.latent.as_ref().unwrap();
            let mut cand = self.theta.clone();
            cand[tk] += self.props[tk].draw(&mut self.rng);
            let (t0, t1) = (self.theta[tk].exp(), cand[tk].exp());
            let ratio = 0.5 * ls.prec.rank as f64 * (cand[tk] - self.theta[tk])
                - 0.5 * (t1 - t0) * ls.quad
                + m.log_prior(&cand)
                - m.log_prior(&self.theta);
            let ok = ratio.is_finite() && accept(&mut self.rng, ratio);
            if ok {
                self.theta = cand;
            }
            self.props[tk].record(ok);
        }
        let tau = self.theta[tk].exp();

        // structure parameter
        if let Some(hk) = l.hyper {
            let mut cand = self.theta.clone();
            cand[hk] += self.props[hk].draw(&mut self.rng);
            let ok = match m.base.precision(m.hyper_value(cand[hk])) {
                Ok(prec) => {
                    self.jitter.note(prec.jitter);
                    let ls = self.latent.as_ref().unwrap();
                    let quad = ls.s.dot(&(&prec.s * &ls.s));
                    let ratio = 0.5 * (prec.log_det - ls.prec.log_det) - 0.5 * tau * (quad - ls.quad)
                        + m.log_prior(&cand)
                        - m.log_prior(&self.theta);
                    let ok = ratio.is_finite() && accept(&mut self.rng, ratio);
                    if ok {
                        let s = ls.s.clone();
                        self.latent = Some(LatentState::new(s, prec, &m.soft));
                        self.theta = cand;
                    }
                    ok
                }
                Err(_) => {
                    self.jitter.non_pd += 1;
                    false
                }
            };
            self.props[hk].record(ok);
        }

        // latent sites
        let ls = self.latent.as_mut().unwrap();
        let comp_of = component_index(&m.soft, m.n);
        #[allow(clippy::needless_range_loop)]
        for k in 0..m.n {
            let delta = self.site_props[k].draw(&mut self.rng);
            let new_site = if m.is_obs[k] {
                m.site_loglik(k, self.eta[k] + delta, nug)
            } else {
                0.0
            };
            let skk = ls.prec.s[(k, k)];
            let mut ratio = new_site - self.site_ll[k] - 0.5 * tau * (2.0 * delta * ls.ss[k] + delta * delta * skk);
            if let Some(c) = comp_of[k] {
                let old = ls.comp_sums[c];
                ratio -= 0.5 * SUM_TO_ZERO_PRECISION * ((old + delta).powi(2) - old * old);
            }
            let ok = ratio.is_finite() && accept(&mut self.rng, ratio);
            if ok {
                ls.quad += 2.0 * delta * ls.ss[k] + delta * delta * skk;
                ls.ss.axpy(delta, &ls.prec.s.column(k), 1.0);
                ls.s[k] += delta;
                if let Some(c) = comp_of[k] {
                    ls.comp_sums[c] += delta;
                }
                self.eta[k] += delta;
                self.ll += new_site - self.site_ll[k];
                self.site_ll[k] = new_site;
            }
            self.site_props[k].record(ok);
        }

        // intercept shift against the field: η is unchanged
        let delta = self.shift_prop.draw(&mut self.rng);
        let mut cand = self.theta.clone();
        cand[0] += delta;
        let new_quad = ls.quad - 2.0 * delta * ls.ss.sum() + delta * delta * ls.one_s_one;
        let new_soft: Vec<f64> = m
            .soft
            .iter()
            .zip(&ls.comp_sums)
            .map(|(c, s)| s - delta * c.len() as f64)
            .collect();
        let soft_old = ls.soft_penalty();
        let soft_new = -0.5 * SUM_TO_ZERO_PRECISION * new_soft.iter().map(|c| c * c).sum::<f64>();
        let ratio = -0.5 * tau * (new_quad - ls.quad) + soft_new - soft_old + m.log_prior(&cand)
            - m.log_prior(&self.theta);
        let ok = ratio.is_finite() && accept(&mut self.rng, ratio);
        if ok {
            ls.s.add_scalar_mut(-delta);
            ls.ss.axpy(-delta, &ls.s1, 1.0);
            ls.quad = new_quad;
            ls.comp_sums = new_soft;
            self.theta = cand;
        }
        self.shift_prop.record(ok);
    }

    fn collapsed_factor(&mut self, theta: &[f64]) -> Result<usize, CovarianceError> {
        let m = self.m;
        let h = m.hyper_of(theta);
        let ratio = if m.layout.nugget.is_some() {
            m.tau_of(theta) / m.nugget_of(theta)
        } else {
            0.0
        };
        let key = (h.to_bits(), ratio.to_bits());
        if let Some(i) = self.factors.iter().position(|f| f.key == key) {
            return Ok(i);
        }
        let k = m.base.covariance(h)?;
        let mut c = DMatrix::from_fn(m.obs.len(), m.obs.len(), |a, b| k[(m.obs[a], m.obs[b])]);
        for a in 0..m.obs.len() {
            c[(a, a)] += ratio;
        }
        let chol = chol_with_jitter(&c)?;
        self.jitter.note(chol.jitter);
        if self.factors.len() >= 2 {
            self.factors.remove(0);
        }
        self.factors.push(CollapsedFactor { key, k, chol });
        Ok(self.factors.len() - 1)
    }

    /// Marginal log likelihood of the observed responses with `s` integrated out.
    fn collapsed_loglik(&mut self, theta: &[f64]) -> Result<f64, InferenceError> {
        let m = self.m;
        let no = m.obs.len();
        if no == 0 {
            return Ok(0.0);
        }
        let fi = self.collapsed_factor(theta)?;
        let f = &self.factors[fi];
        let tau = m.tau_of(theta);
        let r = DVector::from_iterator(no, m.obs.iter().map(|&i| m.y[i] - m.fixed_effect(theta, i)));
        let quad = r.dot(&f.chol.solve(&r));
        Ok(-0.5 * (no as f64 * (2.0 * PI).ln() + f.chol.log_det() - no as f64 * tau.ln() + tau * quad))
    }

    fn step_collapsed(&mut self) {
        let m = self.m;
        let lp0 = self.ll + m.log_prior(&self.theta);
        let mut lp = lp0;
        for k in 0..m.layout.len {
            let mut cand = self.theta.clone();
            cand[k] += self.props[k].draw(&mut self.rng);
            let ok = match self.collapsed_loglik(&cand) {
                Ok(ll) => {
                    let lp_new = ll + m.log_prior(&cand);
                    let ok = lp_new.is_finite() && accept(&mut self.rng, lp_new - lp);
                    if ok {
                        self.theta = cand;
                        self.ll = ll;
                        lp = lp_new;
                    }
                    ok
                }
                Err(_) => {
                    self.jitter.non_pd += 1;
                    false
                }
            };
            self.props[k].record(ok);
        }
    }

    /// Draws `s | y, θ` for the collapsed sampler.
    fn draw_latent_collapsed(&mut self) -> Result<DVector<f64>, InferenceError> {
        let m = self.m;
        let theta = self.theta.clone();
        let tau = m.tau_of(&theta);
        let n = m.n;
        let no = m.obs.len();
        let fi = self.collapsed_factor(&theta)?;
        let f = &self.factors[fi];
        let r = DVector::from_iterator(no, m.obs.iter().map(|&i| m.y[i] - m.fixed_effect(&theta, i)));
        let (mean, cov) = if no == 0 {
            (DVector::zeros(n), f.k.clone())
        } else {
            let k_on = DMatrix::from_fn(no, n, |a, j| f.k[(m.obs[a], j)]);
            let a = f.chol.factor.solve(&k_on);
            let mean = a.transpose() * &r;
            let cov = &f.k - k_on.transpose() * &a;
            (mean, cov)
        };
        let eig = SymmetricEigen::new(0.5 * (&cov + cov.transpose()));
        let z: DVector<f64> =
            DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut self.rng)));
        let scaled = DVector::from_iterator(
            n,
            eig.eigenvalues.iter().zip(z.iter()).map(|(l, z)| l.max(0.0).sqrt() * z),
        );
        let mut s = mean + (&eig.eigenvectors * scaled) / tau.sqrt();
        if m.layout.nugget.is_none() {
            for (a, &i) in m.obs.iter().enumerate() {
                s[i] = r[a];
            }
        }
        Ok(s)
    }

    /// Pointwise log densities of the observed responses at the current state.
    fn pointwise(&mut self, s: &DVector<f64>) -> Vec<f64> {
        let m = self.m;
        let theta = &self.theta;
        if !m.collapsed {
            return m.obs.iter().map(|&i| self.site_ll[i]).collect();
        }
        let tau = m.tau_of(theta);
        match m.layout.nugget {
            Some(_) => {
                let nug = m.nugget_of(theta);
                m.obs
                    .iter()
                    .map(|&i| m.site_loglik(i, m.fixed_effect(theta, i) + s[i], nug))
                    .collect()
            }
            None => {
                let f = self
                    .factors
                    .iter()
                    .find(|f| f.key.0 == m.hyper_of(theta).to_bits())
                    .expect("current factor is cached");
                let l = f.chol.l();
                m.obs
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| {
                        let var = l.row(a).norm_squared() / tau;
                        let r = m.y[i] - m.fixed_effect(theta, i);
                        -0.5 * (2.0 * PI * var).ln() - 0.5 * r * r / var
                    })
                    .collect()
            }
        }
    }

    fn proposals_mut(&mut self) -> impl Iterator<Item = &mut Proposal> {
        self.props
            .iter_mut()
            .chain(self.site_props.iter_mut())
            .chain(std::iter::once(&mut self.shift_prop))
    }

    fn acceptance(&self) -> Vec<(String, f64)> {
        let m = self.m;
        let mut out: Vec<(String, f64)> = Vec::new();
        let l = &m.layout;
        let names = &m.param_names;
        for (k, name) in names.iter().enumerate().take(l.len) {
            out.push((name.clone(), self.props[k].rate()));
        }
        if !self.site_props.is_empty() {
            let (a, t) = self
                .site_props
                .iter()
                .fold((0, 0), |(a, t), p| (a + p.accepted, t + p.tried));
            out.push(("s".into(), a as f64 / t.max(1) as f64));
            out.push(("shift".into(), self.shift_prop.rate()));
        }
        out
    }

    fn run(mut self, chain: usize) -> Result<ChainSamples, InferenceError> {
        let m = self.m;
        let settings = &m.spec.mcmc;
        let burn = settings.burn_iterations();
        let target = settings.per_chain_ess();
        let mut out = ChainSamples {
            chain,
            ..Default::default()
        };
        let mut converged = false;
        let mut last_iter = 0;
        for it in 0..settings.max_iterations {
            self.step();
            last_iter = it + 1;
            if let Some(ls) = self.latent.as_mut().filter(|_| !m.collapsed) {
                if (it + 1).is_multiple_of(REFRESH_INTERVAL) {
                    ls.refresh(&m.soft);
                }
            }
            if it < burn {
                if (it + 1).is_multiple_of(settings.adapt_interval) {
                    let t = settings.target_acceptance;
                    self.proposals_mut().for_each(|p| p.adapt(t));
                }
                if it + 1 == burn {
                    self.proposals_mut().for_each(Proposal::reset_counts);
                }
                continue;
            }
            if !(it - burn).is_multiple_of(settings.thin) {
                continue;
            }
            let s = if m.collapsed {
                self.draw_latent_collapsed()?
            } else {
                self.latent
                    .as_ref()
                    .map_or_else(|| DVector::zeros(m.n), |ls| ls.s.clone())
            };
            out.pointwise.push(self.pointwise(&s));
            out.params.push(m.output_row(&self.theta));
            out.latent.push(s.as_slice().to_vec());
            out.loglik.push(self.ll);
            out.iterations.push(it + 1);
            let kept = out.loglik.len();
            if kept >= MIN_ESS_DRAWS && kept.is_multiple_of(settings.check_interval) {
                let e = ess(&out.loglik)?.ess;
                if e >= target {
                    converged = true;
                    break;
                }
            }
        }
        if out.loglik.len() >= MIN_ESS_DRAWS {
            out.ess_loglik = ess(&out.loglik)?.ess;
        }
        if !converged {
            log::warn!(
                "chain {chain}: log-likelihood ESS {:.1} below target {target} after {} iterations",
                out.ess_loglik,
                settings.max_iterations
            );
        }
        out.acceptance = self.acceptance();
        out.max_jitter = self.jitter.max;
        out.jittered_factorizations = self.jitter.count;
        out.rejected_non_pd = self.jitter.non_pd;
        out.stop_iteration = last_iter;
        out.converged = converged;
        Ok(out)
    }
}

fn component_index(soft: &[Vec<usize>], n: usize) -> Vec<Option<usize>> {
    let mut idx = vec![None; n];
    for (c, comp) in soft.iter().enumerate() {
        for &i in comp {
            idx[i] = Some(c);
        }
    }
    idx
}

/// Fits the model. Chains run in parallel, chain `c` seeded with `seed + c`.
pub fn fit(
    spec: &ModelSpec,
    data: &ModelData,
    spatial: &SpatialInput,
) -> Result<PosteriorSamples, InferenceError> {
    let prepared = Prepared::new(spec, data, spatial)?;
    let chains = (0..spec.mcmc.n_chains)
        .into_par_iter()
        .map(|c| Chain::new(&prepared, c)?.run(c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = spec.clone();
    if spec.random_effect.is_hgp() {
        spec.priors.phi = prepared.phi_bounds();
    }
    Ok(PosteriorSamples {
        label: spec.label(),
        spec,
        param_names: prepared.param_names,
        site_ids: data.ids.clone(),
        observed: data.observed(),
        fingerprint: data.fingerprint(),
        chains,
    })
}
