//! Subcommand implementations. Each command reads the artifacts of its
//! upstream stage from the output directory and writes its own; a missing
//! upstream artifact is reported with the command that produces it.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mfa_core::decision::{decision_metrics, BenefitDistribution, DecisionReport, Metric};
use mfa_core::impact::{self, io_matrices};
use mfa_core::likelihood::MissingRecordPolicy;
use mfa_core::network::NetworkStructure;
use mfa_core::sample::derive_seed;
use mfa_core::selection::{posterior_ratio, structure_posterior, EvidenceRow, EvidenceTable};
use mfa_core::smc::{run_smc, SmcConfig};
use mfa_core::{QoiSpec, StructureCode};

use crate::artifacts::{self, EnsembleMeta, PosteriorRow};
use crate::config::RunConfig;
use crate::sankey::{SankeyDocument, SankeyNode};
use crate::{CliError, Result};

/// CLI-level overrides applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub particles: Option<usize>,
    pub ess_target: Option<f64>,
    pub mutation_steps: Option<usize>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub out: Option<std::path::PathBuf>,
}

pub fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) -> Result<()> {
    if let Some(n) = ov.particles {
        cfg.smc.particles = n;
    }
    if let Some(t) = ov.ess_target {
        cfg.smc.ess_target = t;
    }
    if let Some(k) = ov.mutation_steps {
        cfg.smc.mutation_steps = k;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(mode) = &ov.policy {
        match mode.as_str() {
            "exclude" => cfg.policy = MissingRecordPolicy::Exclude,
            "compact-support" => {
                if !matches!(cfg.policy, MissingRecordPolicy::CompactSupport { .. }) {
                    return Err(CliError::Config(
                        "--policy compact-support needs [policy] bounds in the config file".into(),
                    ));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown policy {other:?} (expected exclude or compact-support)"
                )))
            }
        }
    }
    if let Some(out) = &ov.out {
        cfg.out_dir = out.clone();
    }
    Ok(())
}

fn policy_name(policy: &MissingRecordPolicy) -> &'static str {
    match policy {
        MissingRecordPolicy::Exclude => "exclude",
        MissingRecordPolicy::CompactSupport { .. } => "compact-support",
    }
}

fn structures_in_code_order(cfg: &RunConfig) -> Result<Vec<NetworkStructure>> {
    cfg.topology.enumerate_structures().map_err(|e| CliError::Config(e.to_string()))
}

/// Exclude-mode warning: structures conditioning on different record sets.
fn warn_asymmetric_records(cfg: &RunConfig, structures: &[NetworkStructure]) {
    if !matches!(cfg.policy, MissingRecordPolicy::Exclude) {
        return;
    }
    let sets: Vec<Vec<String>> =
        structures.iter().map(|s| cfg.dataset.applicable_ids(s)).collect();
    let mut union: Vec<&String> = Vec::new();
    let mut intersection: Option<Vec<&String>> = None;
    for set in &sets {
        for id in set {
            if !union.contains(&id) {
                union.push(id);
            }
        }
        intersection = Some(match intersection {
            None => set.iter().collect(),
            Some(prev) => prev.into_iter().filter(|id| set.contains(id)).collect(),
        });
    }
    let intersection = intersection.unwrap_or_default();
    let asymmetric: Vec<&&String> =
        union.iter().filter(|id| !intersection.contains(id)).collect();
    if !asymmetric.is_empty() {
        eprintln!(
            "warning: marginal likelihoods condition on different records across structures \
             (exclude policy); asymmetric records: {}",
            asymmetric.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ")
        );
    }
}

pub fn cmd_enumerate(cfg: &RunConfig) -> Result<()> {
    let structures = structures_in_code_order(cfg)?;
    warn_asymmetric_records(cfg, &structures);
    for note in &cfg.notes {
        eprintln!("note: {note}");
    }
    let rows: Vec<Vec<String>> = structures
        .iter()
        .map(|s| {
            let code = s.code().to_string();
            let prior = cfg.structure_priors[&code];
            let n_edges = s.edges().count();
            let n_applicable = cfg.dataset.applicable_ids(s).len();
            let tag = if code.is_empty() { "baseline".to_string() } else { code };
            vec![
                tag,
                format!("{prior}"),
                format!("{n_edges}"),
                format!("{n_applicable}"),
            ]
        })
        .collect();
    artifacts::write_table(
        &cfg.out_dir.join("structures.csv"),
        "code,prior,edge_count,applicable_records",
        &rows,
    )?;
    println!("enumerated {} structures -> {}", rows.len(), cfg.out_dir.join("structures.csv").display());
    Ok(())
}

pub enum InferSelection {
    One(String),
    All,
}

pub fn cmd_infer(cfg: &RunConfig, selection: InferSelection, threads: Option<usize>) -> Result<()> {
    let structures = structures_in_code_order(cfg)?;
    let chosen: Vec<NetworkStructure> = match &selection {
        InferSelection::All => structures,
        InferSelection::One(code) => {
            let code: StructureCode = code
                .parse()
                .map_err(|e: mfa_core::network::NetworkError| CliError::Config(e.to_string()))?;
            vec![cfg
                .topology
                .structure(code)
                .map_err(|e| CliError::Config(e.to_string()))?]
        }
    };
    for note in &cfg.notes {
        eprintln!("note: {note}");
    }

    let worker_count = threads
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .clamp(1, chosen.len().max(1));

    let next = AtomicUsize::new(0);
    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= chosen.len() {
                    break;
                }
                let structure = &chosen[idx];
                if let Err(e) = infer_one(cfg, structure) {
                    failures
                        .lock()
                        .unwrap()
                        .push(format!("structure {}: {e}", structure.code()));
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        return Err(CliError::Numerical(failures.join("\n")));
    }
    Ok(())
}

fn infer_one(cfg: &RunConfig, structure: &NetworkStructure) -> Result<()> {
    let code = structure.code().to_string();
    let prior = cfg
        .bundle
        .restrict_to_structure(structure)
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.policy
        .validate(&cfg.dataset, structure)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let smc_config = SmcConfig {
        particles: cfg.smc.particles,
        ess_target: cfg.smc.ess_target,
        mutation_steps: cfg.smc.mutation_steps,
        block_sweeps: cfg.smc.block_sweeps,
        independent_steps: cfg.smc.independent_steps,
        max_stages: cfg.smc.max_stages,
        seed: cfg.seed,
    };
    let ensemble = run_smc(&prior, &cfg.dataset, structure, &cfg.policy, &smc_config)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let meta = EnsembleMeta {
        code: if code.is_empty() { "baseline".into() } else { code.clone() },
        log_evidence: ensemble.log_evidence,
        beta_schedule: ensemble.beta_schedule.clone(),
        ess: ensemble.stages.iter().map(|s| s.ess).collect(),
        acceptance: ensemble.stages.iter().map(|s| s.acceptance).collect(),
        master_seed: cfg.seed,
        structure_seed: derive_seed(cfg.seed, &code),
        particles: cfg.smc.particles,
        ess_target: cfg.smc.ess_target,
        mutation_steps: cfg.smc.mutation_steps,
        block_sweeps: cfg.smc.block_sweeps,
        independent_steps: cfg.smc.independent_steps,
        max_stages: cfg.smc.max_stages,
        policy: policy_name(&cfg.policy).into(),
        applicable_records: cfg.dataset.applicable_ids(structure),
        flagged_stages: ensemble.flagged_stages(),
    };
    artifacts::write_ensemble(&cfg.out_dir, structure, &ensemble, &meta)?;
    eprintln!(
        "structure {}: log evidence {:.4}, {} stages, {} particles",
        meta.code,
        ensemble.log_evidence,
        ensemble.beta_schedule.len() - 1,
        cfg.smc.particles
    );
    Ok(())
}

fn load_posterior_inputs(cfg: &RunConfig) -> Result<(Vec<String>, BTreeMap<String, EnsembleMeta>)> {
    let codes: Vec<String> = cfg.structure_priors.keys().cloned().collect();
    let metas = artifacts::read_all_metas(&cfg.out_dir, codes.iter().cloned())?;
    Ok((codes, metas))
}

pub fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let structures = structures_in_code_order(cfg)?;
    warn_asymmetric_records(cfg, &structures);
    let (codes, metas) = load_posterior_inputs(cfg)?;
    let table = EvidenceTable::new(
        codes
            .iter()
            .map(|code| EvidenceRow {
                code: code.clone(),
                log_evidence: metas[code].log_evidence,
                prior: cfg.structure_priors[code],
            })
            .collect(),
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    let posterior = structure_posterior(&table).map_err(|e| CliError::Numerical(e.to_string()))?;

    let rows: Vec<PosteriorRow> = codes
        .iter()
        .map(|code| PosteriorRow {
            code: code.clone(),
            prior: cfg.structure_priors[code],
            log_evidence: metas[code].log_evidence,
            posterior: posterior.probability(code).unwrap_or(0.0),
        })
        .collect();
    artifacts::write_posterior(&cfg.out_dir, &rows)?;

    // Pairwise posterior ratios in long form with Jeffreys labels.
    let mut ratio_rows = Vec::new();
    for m in &codes {
        for n in &codes {
            let (value, label) =
                posterior_ratio(&table, m, n).map_err(|e| CliError::Numerical(e.to_string()))?;
            ratio_rows.push(vec![
                display_code(m),
                display_code(n),
                format!("{value}"),
                label.to_string(),
            ]);
        }
    }
    artifacts::write_table(
        &cfg.out_dir.join("ratios.csv"),
        "structure_m,structure_n,log10_posterior_ratio,evidence_for_m",
        &ratio_rows,
    )?;

    let (best, p) = posterior.argmax();
    println!(
        "posterior over {} structures -> {}; best {} at {:.4}",
        codes.len(),
        cfg.out_dir.join("posterior.csv").display(),
        display_code(best),
        p
    );
    Ok(())
}

fn display_code(code: &str) -> String {
    if code.is_empty() {
        "baseline".to_string()
    } else {
        code.to_string()
    }
}

/// Structures, already-read particles, and posterior weights for pooling.
struct PooledInputs {
    entries: Vec<(NetworkStructure, Vec<mfa_core::ParameterState>, Vec<f64>, f64)>,
    dropped: Vec<String>,
}

fn load_pooled_inputs(cfg: &RunConfig) -> Result<PooledInputs> {
    let rows = artifacts::read_posterior(&cfg.out_dir)?;
    let mut entries = Vec::new();
    let mut dropped = Vec::new();
    let mut kept_mass = 0.0;
    for row in &rows {
        if row.posterior < cfg.pool_threshold {
            dropped.push(display_code(&row.code));
            continue;
        }
        kept_mass += row.posterior;
        let structure = cfg
            .topology
            .structure(row.code.parse().map_err(|e: mfa_core::network::NetworkError| {
                CliError::Numerical(e.to_string())
            })?)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let (particles, weights) = artifacts::read_ensemble_particles(&cfg.out_dir, &structure)?;
        entries.push((structure, particles, weights, row.posterior));
    }
    if entries.is_empty() {
        return Err(CliError::Numerical(
            "no structure clears the pooling threshold".into(),
        ));
    }
    if !dropped.is_empty() {
        eprintln!(
            "note: dropped {} structures below pooling threshold {} (total mass {:.3e} renormalized)",
            dropped.len(),
            cfg.pool_threshold,
            1.0 - kept_mass
        );
    }
    // Renormalize the kept posterior mass.
    for e in entries.iter_mut() {
        e.3 /= kept_mass;
    }
    Ok(PooledInputs { entries, dropped })
}

pub fn cmd_average(cfg: &RunConfig) -> Result<()> {
    let inputs = load_pooled_inputs(cfg)?;
    let topo = &cfg.topology;

    // QoIs: every connection of the all-present structure, then any extras
    // from the config.
    let full = topo
        .structure(StructureCode::all_present(topo.targeted_connections().len()))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let edge_qois: Vec<(String, QoiSpec)> = full
        .edges()
        .map(|(a, b)| {
            (
                format!("{} to {}", topo.node(a).name, topo.node(b).name),
                QoiSpec::ConnectionFlow(a, b),
            )
        })
        .collect();

    let mut pooled_edges: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut pooled_extras: Vec<(String, Vec<(f64, f64)>)> = Vec::new();

    // Evaluate with one solve per particle, accumulating pooled samples.
    let mut edge_samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); edge_qois.len()];
    let mut extra_samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.extra_qois.len()];
    for (structure, particles, weights, p) in &inputs.entries {
        let edge_ok: Vec<bool> =
            edge_qois.iter().map(|(_, q)| q.applicable_to(structure)).collect();
        let extra_ok: Vec<bool> =
            cfg.extra_qois.iter().map(|(_, q)| q.applicable_to(structure)).collect();
        for (params, &w) in particles.iter().zip(weights) {
            let solution = structure
                .solve_mass_flows(params)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            for (qi, (_, qoi)) in edge_qois.iter().enumerate() {
                if edge_ok[qi] {
                    let v = qoi
                        .evaluate_with(structure, params, &solution)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                    edge_samples[qi].push((v, p * w));
                }
            }
            for (qi, (_, qoi)) in cfg.extra_qois.iter().enumerate() {
                if extra_ok[qi] {
                    let v = qoi
                        .evaluate_with(structure, params, &solution)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                    extra_samples[qi].push((v, p * w));
                }
            }
        }
        for (qi, ok) in edge_ok.iter().enumerate() {
            if !ok {
                edge_samples[qi].push((0.0, *p));
            }
        }
        for (qi, ok) in extra_ok.iter().enumerate() {
            if !ok {
                extra_samples[qi].push((0.0, *p));
            }
        }
    }
    for ((name, _), samples) in edge_qois.iter().zip(edge_samples) {
        pooled_edges.push((name.clone(), samples));
    }
    for ((name, _), samples) in cfg.extra_qois.iter().zip(extra_samples) {
        pooled_extras.push((name.clone(), samples));
    }

    // Summary table over all pooled QoIs.
    let mut summary_rows = Vec::new();
    let mut links = Vec::new();
    for (name, samples) in pooled_edges.iter().chain(pooled_extras.iter()) {
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        let mean: f64 = samples.iter().map(|(v, w)| v * w).sum::<f64>() / total;
        let var: f64 =
            samples.iter().map(|(v, w)| w * (v - mean) * (v - mean)).sum::<f64>() / total;
        let sd = var.max(0.0).sqrt();
        let q = |p: f64| mfa_core::decision::weighted_quantile(samples, p);
        summary_rows.push(vec![
            format!("{name:?}"),
            format!("{mean}"),
            format!("{sd}"),
            format!("{}", q(0.05)),
            format!("{}", q(0.5)),
            format!("{}", q(0.95)),
        ]);
        links.push((name.clone(), mean, sd));
    }
    artifacts::write_table(
        &cfg.out_dir.join("qoi_summary.csv"),
        "qoi,mean,sd,p05,p50,p95",
        &summary_rows,
    )?;

    // Sankey document over the full structure's links.
    let nodes: Vec<SankeyNode> = topo
        .nodes()
        .map(|(_, info)| SankeyNode { id: info.key.clone(), name: info.name.clone() })
        .collect();
    let sankey_links = full
        .edges()
        .zip(&links)
        .map(|((a, b), (_, mean, sd))| {
            SankeyDocument::link(&topo.node(a).key, &topo.node(b).key, *mean, *sd)
        })
        .collect();
    let doc = SankeyDocument { nodes, links: sankey_links };
    doc.validate().map_err(CliError::Numerical)?;
    std::fs::write(
        cfg.out_dir.join("sankey.json"),
        serde_json::to_string_pretty(&doc).expect("sankey serializes") + "\n",
    )?;

    // Persist full pooled sample sets for the explicitly requested QoIs.
    for (name, samples) in &pooled_extras {
        let path = cfg.out_dir.join(format!("pooled_{}.csv", artifacts::slug(name)));
        artifacts::write_samples(&path, samples)?;
    }

    if !inputs.dropped.is_empty() {
        eprintln!("dropped structures: {}", inputs.dropped.join(", "));
    }
    println!(
        "averaged {} QoIs over {} structures -> {}",
        summary_rows.len(),
        inputs.entries.len(),
        cfg.out_dir.join("qoi_summary.csv").display()
    );
    Ok(())
}

pub fn cmd_impact(cfg: &RunConfig) -> Result<()> {
    let inputs = load_pooled_inputs(cfg)?;
    impact::validate_consumption_nodes(
        &inputs.entries[0].0,
        &cfg.consumption_nodes,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut ei_samples: Vec<(f64, f64)> = Vec::new();
    let mut eii_samples: BTreeMap<usize, Vec<(f64, f64)>> =
        cfg.consumption_nodes.iter().map(|id| (id.0, Vec::new())).collect();
    let mut skipped = 0usize;
    let mut total_samples = 0usize;

    for (structure, particles, weights, p) in &inputs.entries {
        for (params, &w) in particles.iter().zip(weights) {
            let solution = structure
                .solve_mass_flows(params)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            total_samples += 1;
            ei_samples.push((impact::system_impact(&cfg.intensity, &solution), p * w));

            let io = match io_matrices(structure, params, &solution, cfg.loss_node) {
                Ok(io) => io,
                Err(mfa_core::impact::ImpactError::ZeroThroughput(_)) => {
                    // Boundary sample: technical coefficients undefined.
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(CliError::Numerical(e.to_string())),
            };
            let eii_all = if cfg.loss_node.is_some() {
                impact::rectified_eii_all(&cfg.intensity, &io)
                    .map_err(|e| CliError::Numerical(e.to_string()))?
            } else {
                cfg.consumption_nodes
                    .iter()
                    .fold(vec![0.0; cfg.intensity.len()], |mut acc, &id| {
                        acc[id.0] = impact::consumption_eii(&cfg.intensity, &io, id);
                        acc
                    })
            };
            for &id in &cfg.consumption_nodes {
                eii_samples.get_mut(&id.0).unwrap().push((eii_all[id.0], p * w));
            }
        }
    }

    // Totals.
    let total_w: f64 = ei_samples.iter().map(|(_, w)| w).sum();
    let mean: f64 = ei_samples.iter().map(|(v, w)| v * w).sum::<f64>() / total_w;
    let var: f64 =
        ei_samples.iter().map(|(v, w)| w * (v - mean) * (v - mean)).sum::<f64>() / total_w;
    let sd = var.max(0.0).sqrt();
    let q = |p: f64| mfa_core::decision::weighted_quantile(&ei_samples, p);
    artifacts::write_table(
        &cfg.out_dir.join("ei_total.csv"),
        "mean,sd,p05,p50,p95,samples,eii_skip_rate",
        &[vec![
            format!("{mean}"),
            format!("{sd}"),
            format!("{}", q(0.05)),
            format!("{}", q(0.5)),
            format!("{}", q(0.95)),
            format!("{total_samples}"),
            format!("{}", skipped as f64 / total_samples.max(1) as f64),
        ]],
    )?;
    artifacts::write_samples(&cfg.out_dir.join("ei_total_samples.csv"), &ei_samples)?;

    // Per consumption node: sample files and a summary.
    let mut rows = Vec::new();
    for &id in &cfg.consumption_nodes {
        let info = cfg.topology.node(id);
        let samples = &eii_samples[&id.0];
        let path = cfg.out_dir.join(format!("eii_{}.csv", artifacts::slug(&info.key)));
        artifacts::write_samples(&path, samples)?;
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        let m: f64 = samples.iter().map(|(v, w)| v * w).sum::<f64>() / total;
        let v: f64 = samples.iter().map(|(v, w)| w * (v - m) * (v - m)).sum::<f64>() / total;
        let qq = |p: f64| mfa_core::decision::weighted_quantile(samples, p);
        rows.push(vec![
            info.key.clone(),
            info.name.clone(),
            format!("{m}"),
            format!("{}", v.max(0.0).sqrt()),
            format!("{}", qq(0.05)),
            format!("{}", qq(0.95)),
        ]);
    }
    artifacts::write_table(
        &cfg.out_dir.join("eii_summary.csv"),
        "node,name,mean,sd,p05,p95",
        &rows,
    )?;

    if skipped > 0 {
        eprintln!(
            "note: {skipped}/{total_samples} samples skipped for EII (zero throughput at a node with incident edges)"
        );
    }
    println!(
        "impact: total EI mean {mean:.2}, sd {sd:.2} over {total_samples} samples -> {}",
        cfg.out_dir.join("ei_total.csv").display()
    );
    Ok(())
}

pub fn cmd_decide(cfg: &RunConfig) -> Result<()> {
    if cfg.consumption_nodes.is_empty() {
        return Err(CliError::Config("no consumption nodes declared in [impact]".into()));
    }
    let mut options = Vec::new();
    for &id in &cfg.consumption_nodes {
        let info = cfg.topology.node(id);
        let path = cfg.out_dir.join(format!("eii_{}.csv", artifacts::slug(&info.key)));
        let samples = artifacts::read_samples(&path, "mfa impact")?;
        let dist = BenefitDistribution::new(info.name.clone(), samples)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        options.push((info.name.clone(), decision_metrics(&dist)));
    }
    let mut report =
        DecisionReport::new(options).map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut csv_rows = Vec::new();
    for (name, m) in &report.options {
        csv_rows.push(vec![
            format!("{name:?}"),
            format!("{}", m.mean),
            format!("{}", m.inv_cv_value()),
            format!("{}", m.p05),
            format!("{}", m.p95),
        ]);
    }
    artifacts::write_table(
        &cfg.out_dir.join("decision.csv"),
        "option,mean,inv_cv,p05,p95",
        &csv_rows,
    )?;

    // Aligned text table: one row per decision criterion, options ranked
    // best first.
    let metrics = [Metric::Mean, Metric::InverseCv, Metric::P95, Metric::P05];
    let mut lines = Vec::new();
    let label_width = metrics.iter().map(|m| m.to_string().len()).max().unwrap_or(0);
    for metric in metrics {
        let ranked = report.rank_options(metric);
        lines.push(format!("{:<label_width$}  {}", metric.to_string(), ranked.join(" > ")));
    }
    let text = lines.join("\n") + "\n";
    std::fs::write(cfg.out_dir.join("decision.txt"), &text)?;
    for (metric, tied) in &report.ties {
        eprintln!("note: tie under {metric}: {}", tied.join(", "));
    }
    print!("{text}");
    Ok(())
}

/// Full pipeline in order, used by tests and for convenience.
pub fn run_all(cfg: &RunConfig, threads: Option<usize>) -> Result<()> {
    cmd_enumerate(cfg)?;
    cmd_infer(cfg, InferSelection::All, threads)?;
    cmd_select(cfg)?;
    cmd_average(cfg)?;
    cmd_impact(cfg)?;
    cmd_decide(cfg)?;
    Ok(())
}

/// Expose helpers for integration tests.
pub fn display_code_pub(code: &str) -> String {
    display_code(code)
}

impl RunConfig {
    /// Output path helper used across commands.
    pub fn artifact(&self, name: &str) -> std::path::PathBuf {
        self.out_dir.join(name)
    }
}

/// Lightweight existence check with a pointer to the producing command.
pub fn require_artifact(path: &Path, produced_by: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact(format!(
            "{} not found; run `{produced_by}` first",
            path.display()
        )))
    }
}
