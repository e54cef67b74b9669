use std::path::PathBuf;

use hgp_core::geometry::{write_geojson, AttributeTable};
use hgp_core::inference::{
    compare, fit, predict, simulate, ModelData, ModelSpec, PosteriorSamples,
    SimulationSpec, SpatialInput,
};
use hgp_core::metricspace::{distance_matrix, DistanceKind, DistanceOptions};
use hgp_core::InferenceError;
use nalgebra::DMatrix;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{
    distances_csv, draws_csv, fmt_num, load_geojson, load_sites, read_draws_csv, read_text,
    read_waic_csv, summary_csv, waic_csv, Staged,
};

pub const EFFECTIVE_CONFIG: &str = "effective_config.json";

/// Pairwise distance matrix of the input sites.
pub fn cmd_distances(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (gs, _) = load_sites(cfg.input()?)?;
    let d = distance_matrix(&gs, &cfg.distance.options())?;
    let mut out = Staged::default();
    out.add("distances.csv", distances_csv(&d));
    out.add(EFFECTIVE_CONFIG, cfg.to_json());
    out.commit(&cfg.output.dir)
}

fn hausdorff_options(cfg: &RunConfig) -> Result<DistanceOptions, CliError> {
    let opts = cfg.distance.options();
    if opts.kind != DistanceKind::Hausdorff {
        return Err(CliError::parse(format!(
            "models are built on the hausdorff distance; `distance.kind` is {}",
            opts.kind
        )));
    }
    Ok(opts)
}

fn numeric_columns(
    table: &AttributeTable,
    names: &[String],
    what: &str,
) -> Result<DMatrix<f64>, CliError> {
    let mut x = DMatrix::zeros(table.len(), names.len());
    for (j, name) in names.iter().enumerate() {
        let col = table
            .numeric(name)
            .ok_or_else(|| CliError::parse(format!("{what}: no column `{name}`")))?;
        for (i, v) in col.into_iter().enumerate() {
            x[(i, j)] = v.ok_or_else(|| {
                CliError::parse(format!(
                    "{what}: site `{}` has no numeric `{name}`",
                    table.ids()[i]
                ))
            })?;
        }
    }
    Ok(x)
}

/// Fits the configured model; returns the posterior along with the files written.
pub fn run_fit(cfg: &RunConfig) -> Result<(PosteriorSamples, Vec<PathBuf>), CliError> {
    let model = cfg.model()?;
    let (gs, table) = load_sites(cfg.input()?)?;
    let data = ModelData::from_table(&table, &model.response, model.offset.as_deref(), &model.covariates)?;
    let spec = ModelSpec {
        likelihood: model.likelihood,
        random_effect: model.random_effect,
        nugget: model.nugget,
        priors: cfg.priors,
        mcmc: cfg.mcmc,
    };
    spec.validate()?;
    let opts = hausdorff_options(cfg)?;
    let spatial = SpatialInput::for_effect(
        model.random_effect,
        &gs,
        &opts,
        cfg.distance.adjacency_tolerance,
    )?;
    log::info!("fitting {} to {} sites", spec.label(), gs.len());
    let ps = fit(&spec, &data, &spatial)?;
    let summary = ps.summary()?;
    let waic = ps.waic_row()?;

    let mut effective = cfg.clone();
    effective.priors = ps.spec.priors;
    let mut chains = Vec::new();
    for c in &ps.chains {
        log::info!(
            "chain {}: stopped at iteration {}, ESS(loglik) {:.0}, max jitter {:e}, acceptance {}",
            c.chain,
            c.stop_iteration,
            c.ess_loglik,
            c.max_jitter,
            c.acceptance
                .iter()
                .map(|(k, v)| format!("{k}={v:.2}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        if !c.converged {
            log::warn!(
                "chain {} reached max_iterations before the ESS target",
                c.chain
            );
        }
        chains.push(json!({
            "chain": c.chain,
            "draws": c.params.len(),
            "stop_iteration": c.stop_iteration,
            "converged": c.converged,
            "ess_loglik": c.ess_loglik,
            "acceptance": c.acceptance.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "max_jitter": c.max_jitter,
            "jittered_factorizations": c.jittered_factorizations,
            "rejected_non_pd": c.rejected_non_pd,
        }));
    }
    let log_doc = json!({
        "model_label": ps.label,
        "fingerprint": ps.fingerprint,
        "waic": waic.waic,
        "chains": chains,
    });

    let mut out = Staged::default();
    out.add("draws.csv", draws_csv(&ps));
    out.add("summary.csv", summary_csv(&summary));
    out.add("waic.csv", waic_csv(std::slice::from_ref(&waic)));
    out.add("fit_log.json", format!("{}\n", serde_json::to_string_pretty(&log_doc).expect("json")));
    out.add(EFFECTIVE_CONFIG, effective.to_json());
    let paths = out.commit(&cfg.output.dir)?;
    Ok((ps, paths))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    run_fit(cfg).map(|(_, p)| p)
}

/// Ranks earlier fits by WAIC.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let runs = &cfg
        .compare
        .as_ref()
        .ok_or_else(|| CliError::parse("config has no `compare` block"))?
        .runs;
    let mut rows = Vec::new();
    for dir in runs {
        rows.extend(read_waic_csv(&read_text(&dir.join("waic.csv"))?)?);
    }
    let ranked = compare(rows)?;
    let mut out = Staged::default();
    out.add("compare.csv", waic_csv(&ranked));
    out.add(EFFECTIVE_CONFIG, cfg.to_json());
    out.commit(&cfg.output.dir)
}

/// Posterior predictive summaries at new geometries from an earlier HGP fit.
pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let pc = cfg
        .predict
        .as_ref()
        .ok_or_else(|| CliError::parse("config has no `predict` block"))?;
    let fit_cfg = RunConfig::load(&pc.fit_dir.join(EFFECTIVE_CONFIG))?;
    let model = fit_cfg.model()?;
    if !model.random_effect.is_hgp() {
        return Err(InferenceError::UnsupportedPrediction(model.random_effect.label().into()).into());
    }
    let input = fit_cfg.input()?;
    let (gs_obs, _) = load_sites(input)?;
    let spec = ModelSpec {
        likelihood: model.likelihood,
        random_effect: model.random_effect,
        nugget: model.nugget,
        priors: fit_cfg.priors,
        mcmc: fit_cfg.mcmc,
    };
    let ps = read_draws_csv(&read_text(&pc.fit_dir.join("draws.csv"))?, spec, gs_obs.ids())?;

    let id_field = pc.id_field.as_deref().unwrap_or(&input.id_field);
    let (gs_new, mut table) = load_geojson(&pc.geometry_path, id_field)?;
    let x_new = numeric_columns(&table, &model.covariates, "new geometries")?;
    let opts = hausdorff_options(&fit_cfg)?;
    let preds = predict(&ps, &gs_obs, &gs_new, &x_new, &opts, pc.seed)?;

    let col = |f: fn(&hgp_core::inference::SitePrediction) -> f64| -> Vec<f64> {
        preds.iter().map(f).collect()
    };
    table.set_numeric("pred_mean", &col(|p| p.mean));
    table.set_numeric("pred_lo", &col(|p| p.lo));
    table.set_numeric("pred_hi", &col(|p| p.hi));
    table.set_numeric("s_mean", &col(|p| p.s_mean));
    table.set_numeric("s_lo", &col(|p| p.s_lo));
    table.set_numeric("s_hi", &col(|p| p.s_hi));
    let mut out = Staged::default();
    out.add("predictions.geojson", write_geojson(&gs_new, &table, id_field));
    out.add(EFFECTIVE_CONFIG, cfg.to_json());
    out.commit(&cfg.output.dir)
}

/// Synthetic responses from a known HGP on the input geometries.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let sc = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::parse("config has no `simulate` block"))?;
    let input = cfg.input()?;
    let (gs, mut table) = load_sites(input)?;
    let x = numeric_columns(&table, &sc.covariates, "simulate")?;
    let offset = match &sc.offset {
        Some(name) => Some(numeric_columns(&table, std::slice::from_ref(name), "simulate")?.as_slice().to_vec()),
        None => None,
    };
    let spec = SimulationSpec {
        likelihood: sc.likelihood,
        random_effect: sc.random_effect,
        phi: sc.phi,
        tau: sc.tau,
        alpha: sc.alpha,
        beta: sc.beta.clone(),
        nugget_precision: sc.nugget_precision,
    };
    let d = distance_matrix(&gs, &hausdorff_options(cfg)?)?;
    let sim = simulate(&spec, &d, &x, offset.as_deref(), sc.seed)?;

    table.set_numeric(sc.response.as_str(), &sim.y);
    table.set_numeric("s_true", &sim.s);
    let mut truth = vec![("alpha".to_string(), sc.alpha)];
    truth.extend(sc.covariates.iter().zip(&sc.beta).map(|(c, b)| (format!("beta_{c}"), *b)));
    truth.push(("tau".into(), sc.tau));
    truth.push(("phi".into(), sc.phi));
    if let Some(p) = sc.nugget_precision {
        truth.push(("tau_nugget".into(), p));
    }
    truth.push(("jitter".into(), sim.jitter));
    let mut csv = String::from("parameter,value\n");
    for (k, v) in truth {
        csv.push_str(&format!("{k},{}\n", fmt_num(v)));
    }
    let mut out = Staged::default();
    out.add("simulated.geojson", write_geojson(&gs, &table, &input.id_field));
    out.add("truth.csv", csv);
    out.add(EFFECTIVE_CONFIG, cfg.to_json());
    out.commit(&cfg.output.dir)
}
