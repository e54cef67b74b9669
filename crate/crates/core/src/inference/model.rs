use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::Smoothness;
use crate::error::InferenceError;
use crate::geometry::AttributeTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// `Y_i ~ Poisson(E_i λ_i)` with `log λ_i = α + x_iβ + s_i`.
    PoissonOffset,
    /// `Y_i = α + x_iβ + s_i`, plus independent noise when a nugget is used.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RandomEffect {
    Hgp(Smoothness),
    Icar,
    Bym2,
    Leroux,
    /// No latent field: an ordinary generalized linear model.
    None,
}

impl RandomEffect {
    pub const PAPER_MODELS: [RandomEffect; 7] = [
        RandomEffect::Hgp(Smoothness::Half),
        RandomEffect::Hgp(Smoothness::ThreeHalves),
        RandomEffect::Hgp(Smoothness::FiveHalves),
        RandomEffect::Hgp(Smoothness::Infinite),
        RandomEffect::Icar,
        RandomEffect::Bym2,
        RandomEffect::Leroux,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RandomEffect::Hgp(Smoothness::Half) => "hgp_exp",
            RandomEffect::Hgp(Smoothness::ThreeHalves) => "hgp_m32",
            RandomEffect::Hgp(Smoothness::FiveHalves) => "hgp_m52",
            RandomEffect::Hgp(Smoothness::Infinite) => "hgp_gauss",
            RandomEffect::Icar => "icar",
            RandomEffect::Bym2 => "bym2",
            RandomEffect::Leroux => "leroux",
            RandomEffect::None => "none",
        }
    }

    pub fn is_hgp(self) -> bool {
        matches!(self, RandomEffect::Hgp(_))
    }

    /// Effects defined through an adjacency graph.
    pub fn is_areal(self) -> bool {
        matches!(self, RandomEffect::Icar | RandomEffect::Bym2 | RandomEffect::Leroux)
    }

    /// Name of the parameter controlling the latent structure, if any.
    pub fn hyper_name(self) -> Option<&'static str> {
        match self {
            RandomEffect::Hgp(_) => Some("phi"),
            RandomEffect::Bym2 | RandomEffect::Leroux => Some("psi"),
            RandomEffect::Icar | RandomEffect::None => None,
        }
    }
}

impl fmt::Display for RandomEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RandomEffect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "hgp_exp" => RandomEffect::Hgp(Smoothness::Half),
            "hgp_m32" => RandomEffect::Hgp(Smoothness::ThreeHalves),
            "hgp_m52" => RandomEffect::Hgp(Smoothness::FiveHalves),
            "hgp_gauss" => RandomEffect::Hgp(Smoothness::Infinite),
            "icar" => RandomEffect::Icar,
            "bym2" => RandomEffect::Bym2,
            "leroux" => RandomEffect::Leroux,
            "none" => RandomEffect::None,
            other => return Err(format!("unknown random effect `{other}`")),
        })
    }
}

impl TryFrom<String> for RandomEffect {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RandomEffect> for String {
    fn from(r: RandomEffect) -> Self {
        r.label().to_string()
    }
}

/// Prior hyperparameters. Normal priors are centred at zero; precision
/// priors are Gamma(shape, rate); ψ is Uniform(0, 1); φ is Uniform(a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSet {
    pub alpha_sd: f64,
    pub beta_sd: f64,
    pub tau_shape: f64,
    pub tau_rate: f64,
    pub nugget_shape: f64,
    pub nugget_rate: f64,
    /// Bounds of the φ prior; derived from the distance matrix when absent.
    pub phi: Option<(f64, f64)>,
}

impl Default for PriorSet {
    fn default() -> Self {
        Self {
            alpha_sd: 100.0,
            beta_sd: 100.0,
            tau_shape: 1.0,
            tau_rate: 5e-5,
            nugget_shape: 1.0,
            nugget_rate: 5e-5,
            phi: None,
        }
    }
}

impl PriorSet {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let positive = [
            ("alpha_sd", self.alpha_sd),
            ("beta_sd", self.beta_sd),
            ("tau_shape", self.tau_shape),
            ("tau_rate", self.tau_rate),
            ("nugget_shape", self.nugget_shape),
            ("nugget_rate", self.nugget_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(InferenceError::InvalidModel(format!(
                    "prior hyperparameter {name} must be finite and positive, got {v}"
                )));
            }
        }
        if let Some((a, b)) = self.phi {
            if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
                return Err(InferenceError::InvalidModel(format!(
                    "phi prior bounds must satisfy 0 < a < b, got ({a}, {b})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub n_chains: usize,
    pub max_iterations: usize,
    /// Fraction of `max_iterations` spent adapting before draws are kept.
    pub burn_in: f64,
    pub thin: usize,
    pub seed: u64,
    /// Combined effective sample size of the log-likelihood at which
    /// sampling stops.
    pub ess_target: f64,
    pub adapt_interval: usize,
    pub target_acceptance: f64,
    /// Retained draws between stopping-rule checks.
    pub check_interval: usize,
    /// Integrate the latent field out of Gaussian likelihoods.
    pub collapse: bool,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            n_chains: 2,
            max_iterations: 50_000,
            burn_in: 0.1,
            thin: 1,
            seed: 0,
            ess_target: 1000.0,
            adapt_interval: 50,
            target_acceptance: 0.44,
            check_interval: 1000,
            collapse: true,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: String| Err(InferenceError::InvalidModel(m));
        if self.n_chains == 0 {
            return bad("at least one chain is required".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in must lie in [0, 1), got {}", self.burn_in));
        }
        if !(self.ess_target.is_finite() && self.ess_target > 0.0) {
            return bad(format!("ess_target must be positive, got {}", self.ess_target));
        }
        if self.thin == 0 || self.adapt_interval == 0 || self.check_interval == 0 {
            return bad("thin, adapt_interval and check_interval must be positive".into());
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!(
                "target_acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            ));
        }
        if self.burn_iterations() >= self.max_iterations {
            return bad("max_iterations leaves no post-burn-in draws".into());
        }
        Ok(())
    }

    pub fn burn_iterations(&self) -> usize {
        (self.burn_in * self.max_iterations as f64).floor() as usize
    }

    /// Share of the ESS target each chain must reach on its own.
    pub fn per_chain_ess(&self) -> f64 {
        (self.ess_target / self.n_chains as f64).ceil()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub likelihood: Likelihood,
    pub random_effect: RandomEffect,
    /// Adds independent Gaussian noise with its own precision (Gaussian only).
    #[serde(default)]
    pub nugget: bool,
    #[serde(default)]
    pub priors: PriorSet,
    #[serde(default)]
    pub mcmc: McmcSettings,
}

impl ModelSpec {
    pub fn new(likelihood: Likelihood, random_effect: RandomEffect) -> Self {
        Self {
            likelihood,
            random_effect,
            nugget: false,
            priors: PriorSet::default(),
            mcmc: McmcSettings::default(),
        }
    }

    pub fn label(&self) -> String {
        let mut l = self.random_effect.label().to_string();
        if self.nugget {
            l.push_str("+nugget");
        }
        l
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        self.priors.validate()?;
        self.mcmc.validate()?;
        let bad = |m: &str| Err(InferenceError::InvalidModel(m.into()));
        match self.likelihood {
            Likelihood::PoissonOffset if self.nugget => {
                bad("a nugget is only available for the gaussian likelihood")
            }
            Likelihood::Gaussian if !self.nugget => match self.random_effect {
                RandomEffect::None => bad("a gaussian model without a latent field needs a nugget"),
                RandomEffect::Icar => {
                    bad("the icar covariance is singular; a gaussian icar model needs a nugget")
                }
                _ if !self.mcmc.collapse => {
                    bad("the uncollapsed gaussian sampler needs a nugget")
                }
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Response, offset and covariates aligned with the site order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub ids: Vec<String>,
    /// Missing responses contribute nothing to the likelihood.
    pub response: Vec<Option<f64>>,
    pub offset: Option<Vec<f64>>,
    /// `n × p`, one column per covariate.
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

impl ModelData {
    pub fn new(
        ids: Vec<String>,
        response: Vec<Option<f64>>,
        offset: Option<Vec<f64>>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self, InferenceError> {
        let n = ids.len();
        if response.len() != n
            || offset.as_ref().is_some_and(|o| o.len() != n)
            || covariates.nrows() != n
            || covariates.ncols() != covariate_names.len()
        {
            return Err(InferenceError::InvalidModel(
                "response, offset and covariates must have one row per site".into(),
            ));
        }
        if let Some((i, j)) = (0..n)
            .flat_map(|i| (0..covariates.ncols()).map(move |j| (i, j)))
            .find(|&(i, j)| !covariates[(i, j)].is_finite())
        {
            return Err(InferenceError::InvalidModel(format!(
                "site `{}`: covariate `{}` is missing or not finite",
                ids[i], covariate_names[j]
            )));
        }
        Ok(Self {
            ids,
            response,
            offset,
            covariates,
            covariate_names,
        })
    }

    /// Reads named columns. Empty or non-numeric response cells are missing.
    pub fn from_table(
        table: &AttributeTable,
        response: &str,
        offset: Option<&str>,
        covariates: &[String],
    ) -> Result<Self, InferenceError> {
        let column = |name: &str| {
            table.numeric(name).ok_or_else(|| {
                InferenceError::InvalidModel(format!("column `{name}` not found in attribute table"))
            })
        };
        let y = column(response)?;
        let e = match offset {
            Some(name) => Some(
                column(name)?
                    .into_iter()
                    .map(|v| v.unwrap_or(f64::NAN))
                    .collect(),
            ),
            None => None,
        };
        let n = table.len();
        let mut x = DMatrix::zeros(n, covariates.len());
        for (j, name) in covariates.iter().enumerate() {
            for (i, v) in column(name)?.into_iter().enumerate() {
                x[(i, j)] = v.unwrap_or(f64::NAN);
            }
        }
        Self::new(table.ids().to_vec(), y, e, x, covariates.to_vec())
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn observed(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.response[i].is_some()).collect()
    }

    /// SHA-256 over site ids, responses and offsets; fits on the same data
    /// share a fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (i, id) in self.ids.iter().enumerate() {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
            match self.response[i] {
                Some(v) => {
                    h.update([1u8]);
                    h.update(v.to_bits().to_le_bytes());
                }
                None => h.update([0u8]),
            }
            if let Some(o) = &self.offset {
                h.update(o[i].to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
