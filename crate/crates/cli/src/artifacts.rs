//! On-disk artifacts produced and consumed along the pipeline. Everything
//! is written with Rust's shortest-round-trip float formatting and stable
//! ordering, so a fixed seed reproduces files byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mfa_core::network::{NetworkStructure, NodeId, ParameterState};
use mfa_core::smc::ParticleEnsemble;

use crate::{CliError, Result};

pub fn ensemble_csv_path(out_dir: &Path, code: &str) -> PathBuf {
    out_dir.join(format!("ensemble_{}.csv", code_tag(code)))
}

pub fn ensemble_meta_path(out_dir: &Path, code: &str) -> PathBuf {
    out_dir.join(format!("ensemble_{}.json", code_tag(code)))
}

/// The empty code (no targeted connections) still needs a filename.
fn code_tag(code: &str) -> &str {
    if code.is_empty() {
        "baseline"
    } else {
        code
    }
}

/// Run metadata persisted alongside each particle table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub code: String,
    pub log_evidence: f64,
    pub beta_schedule: Vec<f64>,
    pub ess: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub master_seed: u64,
    pub structure_seed: u64,
    pub particles: usize,
    pub ess_target: f64,
    pub mutation_steps: usize,
    pub block_sweeps: usize,
    pub independent_steps: usize,
    pub max_stages: usize,
    pub policy: String,
    pub applicable_records: Vec<String>,
    pub flagged_stages: Vec<usize>,
}

/// Column names for the particle table: allocation fractions of every node
/// with at least two active out-edges, then external inflows.
pub fn parameter_columns(structure: &NetworkStructure) -> Vec<String> {
    let topo = structure.topology();
    let mut cols = Vec::new();
    for (id, info) in topo.nodes() {
        let outs = structure.out_edges(id);
        if outs.len() < 2 {
            continue;
        }
        for &dest in outs {
            cols.push(format!("phi[{}->{}]", info.key, topo.node(dest).key));
        }
    }
    for &id in topo.external_inputs() {
        cols.push(format!("q[{}]", topo.node(id).key));
    }
    cols
}

pub fn write_ensemble(
    out_dir: &Path,
    structure: &NetworkStructure,
    ensemble: &ParticleEnsemble,
    meta: &EnsembleMeta,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let code = structure.code().to_string();
    let mut file = std::io::BufWriter::new(std::fs::File::create(ensemble_csv_path(
        out_dir, &code,
    ))?);
    let cols = parameter_columns(structure);
    write!(file, "particle,weight")?;
    for c in &cols {
        write!(file, ",{c}")?;
    }
    writeln!(file)?;
    let topo = structure.topology();
    for (idx, (params, weight)) in
        ensemble.particles.iter().zip(&ensemble.weights).enumerate()
    {
        write!(file, "{idx},{weight}")?;
        for (id, _) in topo.nodes() {
            if structure.out_edges(id).len() < 2 {
                continue;
            }
            for v in &params.allocation[id.0] {
                write!(file, ",{v}")?;
            }
        }
        for q in &params.inputs {
            write!(file, ",{q}")?;
        }
        writeln!(file)?;
    }
    file.flush()?;

    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(ensemble_meta_path(out_dir, &code), json + "\n")?;
    Ok(())
}

pub fn read_ensemble_meta(out_dir: &Path, code: &str) -> Result<EnsembleMeta> {
    let path = ensemble_meta_path(out_dir, code);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::MissingArtifact(format!(
            "{} not found; run `mfa infer --all` (or --structure {code}) first",
            path.display()
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Numerical(format!("{} is corrupt: {e}", path.display())))
}

/// Read a particle table back into parameter states for the structure.
pub fn read_ensemble_particles(
    out_dir: &Path,
    structure: &NetworkStructure,
) -> Result<(Vec<ParameterState>, Vec<f64>)> {
    let code = structure.code().to_string();
    let path = ensemble_csv_path(out_dir, &code);
    let mut reader = csv::Reader::from_path(&path).map_err(|_| {
        CliError::MissingArtifact(format!(
            "{} not found; run `mfa infer --all` (or --structure {code}) first",
            path.display()
        ))
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?
        .clone();
    let expected: Vec<String> = parameter_columns(structure);
    let actual: Vec<&str> = headers.iter().skip(2).collect();
    if actual != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CliError::Numerical(format!(
            "{}: parameter columns do not match the structure (stale artifact?)",
            path.display()
        )));
    }

    let topo = structure.topology();
    let n = topo.node_count();
    let mut particles = Vec::new();
    let mut weights = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
        let mut fields = row.iter().skip(1);
        let weight: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Numerical(format!("{}: bad weight", path.display())))?;
        let mut values = fields.map(|s| s.parse::<f64>());
        let mut take = |what: &str| -> Result<f64> {
            values
                .next()
                .and_then(|r| r.ok())
                .ok_or_else(|| CliError::Numerical(format!("{}: bad {what}", path.display())))
        };
        let mut allocation: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let deg = structure.out_edges(NodeId(i)).len();
            if deg == 0 {
                allocation.push(Vec::new());
            } else if deg == 1 {
                allocation.push(vec![1.0]);
            } else {
                let mut row = Vec::with_capacity(deg);
                for _ in 0..deg {
                    row.push(take("allocation")?);
                }
                allocation.push(row);
            }
        }
        let mut inputs = Vec::with_capacity(topo.external_inputs().len());
        for _ in topo.external_inputs() {
            inputs.push(take("input")?);
        }
        particles.push(ParameterState { allocation, inputs });
        weights.push(weight);
    }
    Ok((particles, weights))
}

/// posterior.csv rows.
#[derive(Debug, Clone)]
pub struct PosteriorRow {
    pub code: String,
    pub prior: f64,
    pub log_evidence: f64,
    pub posterior: f64,
}

pub fn write_posterior(out_dir: &Path, rows: &[PosteriorRow]) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut out = String::from("code,prior,log_evidence,posterior\n");
    for r in rows {
        out += &format!("{},{},{},{}\n", code_tag(&r.code), r.prior, r.log_evidence, r.posterior);
    }
    std::fs::write(out_dir.join("posterior.csv"), out)?;
    Ok(())
}

pub fn read_posterior(out_dir: &Path) -> Result<Vec<PosteriorRow>> {
    let path = out_dir.join("posterior.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|_| {
        CliError::MissingArtifact(format!(
            "{} not found; run `mfa select` first",
            path.display()
        ))
    })?;
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
        let get = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Numerical(format!("{}: bad row", path.display())))
        };
        let code = row.get(0).unwrap_or_default().to_string();
        let code = if code == "baseline" { String::new() } else { code };
        rows.push(PosteriorRow { code, prior: get(1)?, log_evidence: get(2)?, posterior: get(3)? });
    }
    Ok(rows)
}

/// Weighted sample files: value,weight per row.
pub fn write_samples(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::from("value,weight\n");
    for (v, w) in samples {
        out += &format!("{v},{w}\n");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_samples(path: &Path, produced_by: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|_| {
        CliError::MissingArtifact(format!(
            "{} not found; run `{produced_by}` first",
            path.display()
        ))
    })?;
    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::Numerical(format!("{}: {e}", path.display())))?;
        let v: f64 = row
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Numerical(format!("{}: bad value", path.display())))?;
        let w: f64 = row
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Numerical(format!("{}: bad weight", path.display())))?;
        samples.push((v, w));
    }
    Ok(samples)
}

/// Sanitize a QoI description into a file-name slug.
pub fn slug(text: &str) -> String {
    let mut s: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

/// Generic keyed CSV writer for summary tables.
pub fn write_table(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out += &row.join(",");
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Map code -> meta for every candidate code, failing with the list of
/// missing ensembles.
pub fn read_all_metas(
    out_dir: &Path,
    codes: impl Iterator<Item = String>,
) -> Result<BTreeMap<String, EnsembleMeta>> {
    let mut metas = BTreeMap::new();
    let mut missing = Vec::new();
    for code in codes {
        match read_ensemble_meta(out_dir, &code) {
            Ok(meta) => {
                metas.insert(code, meta);
            }
            Err(CliError::MissingArtifact(_)) => missing.push(code),
            Err(other) => return Err(other),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::MissingArtifact(format!(
            "no ensembles for structures [{}]; run `mfa infer --all` first",
            missing.join(", ")
        )));
    }
    Ok(metas)
}
