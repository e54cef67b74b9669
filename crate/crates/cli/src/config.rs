//! JSON run configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every run writes the fully materialized configuration to
//! `effective_config.json` in its output directory.

use std::path::{Path, PathBuf};

use hgp_core::inference::{Likelihood, McmcSettings, PriorSet, RandomEffect};
use hgp_core::metricspace::{DistanceKind, DistanceOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub priors: PriorSet,
    #[serde(default)]
    pub mcmc: McmcSettings,
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub predict: Option<PredictConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// GeoJSON `FeatureCollection` of the sites.
    pub geometry_path: PathBuf,
    #[serde(default = "default_id_field")]
    pub id_field: String,
    /// Optional CSV of attributes joined to the features on `id_field`.
    #[serde(default)]
    pub table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub likelihood: Likelihood,
    pub response: String,
    #[serde(default)]
    pub offset: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    pub random_effect: RandomEffect,
    #[serde(default)]
    pub nugget: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub kind: DistanceKind,
    /// Boundary densification step; the region default when absent.
    pub densify: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Largest gap at which two polygons still count as neighbours.
    pub adjacency_tolerance: f64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        let d = DistanceOptions::default();
        Self {
            kind: d.kind,
            densify: d.densify,
            n_samples: d.n_samples,
            seed: d.seed,
            adjacency_tolerance: 1e-9,
        }
    }
}

impl DistanceConfig {
    pub fn options(&self) -> DistanceOptions {
        DistanceOptions {
            kind: self.kind,
            densify: self.densify,
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Output directories of earlier `fit` runs.
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub fit_dir: PathBuf,
    pub geometry_path: PathBuf,
    /// Identifier property of the new features; defaults to the fit's.
    #[serde(default)]
    pub id_field: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub likelihood: Likelihood,
    pub random_effect: RandomEffect,
    pub phi: f64,
    pub tau: f64,
    pub alpha: f64,
    #[serde(default)]
    pub beta: Vec<f64>,
    /// Attribute columns multiplying `beta`, in order.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Expected-count column (poisson only).
    #[serde(default)]
    pub offset: Option<String>,
    #[serde(default)]
    pub nugget_precision: Option<f64>,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_id_field() -> String {
    "id".into()
}

fn default_response() -> String {
    "y".into()
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::parse(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(input) = &mut self.input {
            fix(&mut input.geometry_path);
            if let Some(t) = &mut input.table_path {
                fix(t);
            }
        }
        fix(&mut self.output.dir);
        if let Some(c) = &mut self.compare {
            c.runs.iter_mut().for_each(fix);
        }
        if let Some(p) = &mut self.predict {
            fix(&mut p.fit_dir);
            fix(&mut p.geometry_path);
        }
    }

    /// Applies a command-line seed to every seeded stage.
    pub fn override_seed(&mut self, seed: u64) {
        self.mcmc.seed = seed;
        if let Some(p) = &mut self.predict {
            p.seed = seed;
        }
        if let Some(s) = &mut self.simulate {
            s.seed = seed;
        }
    }

    pub fn input(&self) -> Result<&InputConfig, CliError> {
        self.input
            .as_ref()
            .ok_or_else(|| CliError::parse("config has no `input` block"))
    }

    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::parse("config has no `model` block"))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
