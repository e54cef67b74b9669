//! File formats: site ingestion, CSV reports and staged output writing.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use hgp_core::geometry::{parse_geojson, AttributeTable, AttributeValue, GeometrySet};
use hgp_core::inference::{ChainSamples, ModelSpec, ParamSummary, PosteriorSamples, WaicRow};
use hgp_core::metricspace::DistanceMatrix;

use crate::config::InputConfig;
use crate::error::CliError;

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn parse_num(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::parse(format!("{what}: `{s}` is not a number")))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))
}

/// Parses a GeoJSON file, joining the optional attribute CSV on the id field.
pub fn load_geojson(path: &Path, id_field: &str) -> Result<(GeometrySet, AttributeTable), CliError> {
    Ok(parse_geojson(&read_text(path)?, id_field)?)
}

pub fn load_sites(input: &InputConfig) -> Result<(GeometrySet, AttributeTable), CliError> {
    let (gs, mut table) = load_geojson(&input.geometry_path, &input.id_field)?;
    if let Some(path) = &input.table_path {
        join_csv(&mut table, path, &input.id_field)?;
    }
    Ok((gs, table))
}

/// Adds every column of a CSV keyed by `id_field` to `table`. Each site must
/// appear in the CSV exactly once; extra CSV rows are ignored.
pub fn join_csv(table: &mut AttributeTable, path: &Path, id_field: &str) -> Result<(), CliError> {
    let bad = |e: csv::Error| CliError::parse(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(bad)?;
    let headers = rdr.headers().map_err(bad)?.clone();
    let key = headers.iter().position(|h| h == id_field).ok_or_else(|| {
        CliError::parse(format!("{}: no `{id_field}` column", path.display()))
    })?;
    let mut rows: HashMap<String, csv::StringRecord> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        let id = rec.get(key).unwrap_or_default().to_string();
        if rows.insert(id.clone(), rec).is_some() {
            return Err(CliError::parse(format!("{}: duplicate id `{id}`", path.display())));
        }
    }
    let ordered = table
        .ids()
        .iter()
        .map(|id| {
            rows.get(id).ok_or_else(|| {
                CliError::parse(format!("{}: no row for site `{id}`", path.display()))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (c, name) in headers.iter().enumerate() {
        if c == key {
            continue;
        }
        let values = ordered
            .iter()
            .map(|rec| {
                let cell = rec.get(c).unwrap_or_default().trim();
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    AttributeValue::Null
                } else {
                    match cell.parse::<f64>() {
                        Ok(v) => AttributeValue::Number(v),
                        Err(_) => AttributeValue::Text(cell.to_string()),
                    }
                }
            })
            .collect();
        table.set_column(name, values);
    }
    Ok(())
}

fn to_csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Square distance matrix preceded by a `#` metadata line.
pub fn distances_csv(d: &DistanceMatrix) -> String {
    let seed = d.seed().map(|s| s.to_string()).unwrap_or_default();
    let mut out = format!("# kind={} densify={} seed={seed}\n", d.kind(), fmt_num(d.densify()));
    let mut header = vec!["id".to_string()];
    header.extend(d.ids().iter().cloned());
    out.push_str(&to_csv(
        &header,
        (0..d.n()).map(|i| {
            std::iter::once(d.ids()[i].clone())
                .chain((0..d.n()).map(|j| fmt_num(d.get(i, j))))
                .collect()
        }),
    ));
    out
}

/// Reads a matrix written by [`distances_csv`], ignoring its metadata line.
pub fn read_distances_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |e: csv::Error| CliError::parse(format!("distance matrix: {e}"));
    let ids: Vec<String> = rdr.headers().map_err(bad)?.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        rows.push(
            rec.iter()
                .skip(1)
                .map(|v| parse_num(v, "distance matrix"))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((ids, rows))
}

/// One row per retained draw: chain, iteration, parameters, latent field and
/// the total log-likelihood.
pub fn draws_csv(ps: &PosteriorSamples) -> String {
    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend(ps.param_names.iter().cloned());
    header.extend(ps.site_ids.iter().map(|id| format!("s_{id}")));
    header.push("loglik".into());
    let rows = ps.chains.iter().flat_map(|c| {
        (0..c.params.len()).map(move |k| {
            let mut row = vec![c.chain.to_string(), c.iterations[k].to_string()];
            row.extend(c.params[k].iter().map(|&v| fmt_num(v)));
            row.extend(c.latent[k].iter().map(|&v| fmt_num(v)));
            row.push(fmt_num(c.loglik[k]));
            row
        })
    });
    to_csv(&header, rows)
}

/// Rebuilds the draws of a fit from its draws CSV. Pointwise densities are
/// not stored and come back empty.
pub fn read_draws_csv(
    text: &str,
    spec: ModelSpec,
    site_ids: &[String],
) -> Result<PosteriorSamples, CliError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let bad = |e: csv::Error| CliError::parse(format!("draws file: {e}"));
    let headers = rdr.headers().map_err(bad)?.clone();
    let n = site_ids.len();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 + n || cols[0] != "chain" || cols[1] != "iter" || cols[cols.len() - 1] != "loglik" {
        return Err(CliError::parse("draws file has an unexpected header"));
    }
    let n_params = cols.len() - 3 - n;
    for (j, id) in site_ids.iter().enumerate() {
        if cols[2 + n_params + j] != format!("s_{id}") {
            return Err(CliError::parse(format!(
                "draws file does not match the sites (expected column s_{id})"
            )));
        }
    }
    let param_names: Vec<String> = cols[2..2 + n_params].iter().map(|s| s.to_string()).collect();
    let mut chains: Vec<ChainSamples> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        let chain: usize = rec[0]
            .parse()
            .map_err(|_| CliError::parse(format!("draws file: bad chain `{}`", &rec[0])))?;
        let iter: usize = rec[1]
            .parse()
            .map_err(|_| CliError::parse(format!("draws file: bad iteration `{}`", &rec[1])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| parse_num(v, "draws file"))
            .collect::<Result<Vec<_>, _>>()?;
        if chains.last().is_none_or(|c| c.chain != chain) {
            chains.push(ChainSamples {
                chain,
                ..Default::default()
            });
        }
        let c = chains.last_mut().expect("pushed above");
        c.iterations.push(iter);
        c.params.push(values[..n_params].to_vec());
        c.latent.push(values[n_params..n_params + n].to_vec());
        c.loglik.push(values[n_params + n]);
    }
    Ok(PosteriorSamples {
        label: spec.label(),
        spec,
        param_names,
        site_ids: site_ids.to_vec(),
        observed: Vec::new(),
        fingerprint: String::new(),
        chains,
    })
}

pub fn summary_csv(rows: &[ParamSummary]) -> String {
    let header: Vec<String> = ["parameter", "mean", "hpd_lo", "hpd_hi", "ess"]
        .map(String::from)
        .to_vec();
    to_csv(
        &header,
        rows.iter().map(|r| {
            vec![
                r.name.clone(),
                fmt_num(r.mean),
                fmt_num(r.hpd_lo),
                fmt_num(r.hpd_hi),
                fmt_num(r.ess),
            ]
        }),
    )
}

pub fn waic_csv(rows: &[WaicRow]) -> String {
    let header: Vec<String> = ["model_label", "waic", "lppd", "p_waic", "fingerprint"]
        .map(String::from)
        .to_vec();
    to_csv(
        &header,
        rows.iter().map(|r| {
            vec![
                r.label.clone(),
                fmt_num(r.waic),
                fmt_num(r.lppd),
                fmt_num(r.p_waic),
                r.fingerprint.clone(),
            ]
        }),
    )
}

pub fn read_waic_csv(text: &str) -> Result<Vec<WaicRow>, CliError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let bad = |e: csv::Error| CliError::parse(format!("WAIC file: {e}"));
    let headers = rdr.headers().map_err(bad)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["model_label", "waic", "lppd", "p_waic", "fingerprint"] {
        return Err(CliError::parse("WAIC file has an unexpected header"));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(bad)?;
            Ok(WaicRow {
                label: rec[0].to_string(),
                waic: parse_num(&rec[1], "WAIC file")?,
                lppd: parse_num(&rec[2], "WAIC file")?,
                p_waic: parse_num(&rec[3], "WAIC file")?,
                fingerprint: rec[4].to_string(),
            })
        })
        .collect()
}

/// Output files held in memory until the command has succeeded, then written
/// together; if any write fails the files already written are removed.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(&name);
            if let Err(e) = std::fs::write(&path, contents) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                return Err(CliError::Io(format!("cannot write {}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(written)
    }
}
