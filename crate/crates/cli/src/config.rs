//! Run configuration: one TOML document declaring the topology, priors,
//! data locations, policy, and solver settings. Parsing validates the whole
//! document and reports every violation, not just the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use mfa_core::likelihood::{Dataset, MissingRecordPolicy};
use mfa_core::network::{NodeClass, NodeId, NodeInfo, Topology};
use mfa_core::priors::{ConnectionBelief, DirichletSpec, PriorBundle, TruncNormalSpec};
use mfa_core::{QoiSpec, RecordKind};

use crate::records::{self, NameResolver};
use crate::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigFile {
    pub run: RunSection,
    #[serde(default)]
    pub smc: SmcSection,
    #[serde(default)]
    pub policy: PolicySection,
    pub data: DataSection,
    #[serde(default)]
    pub impact: ImpactSection,
    #[serde(default)]
    pub average: AverageSection,
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
    #[serde(default)]
    pub targeted: Vec<TargetedEntry>,
    pub inputs: InputsSection,
    #[serde(default)]
    pub priors: PriorsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SmcSection {
    pub particles: usize,
    pub ess_target: f64,
    pub mutation_steps: usize,
    pub block_sweeps: usize,
    pub independent_steps: usize,
    pub max_stages: usize,
}

impl Default for SmcSection {
    fn default() -> Self {
        Self {
            particles: 2000,
            ess_target: 0.5,
            mutation_steps: 15,
            block_sweeps: 1,
            independent_steps: 3,
            max_stages: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct PolicySection {
    /// "exclude" (default) or "compact-support".
    pub mode: Option<String>,
    pub bounds: Vec<BoundEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundEntry {
    /// Record description the bounds apply to.
    pub record: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DataSection {
    /// Paths are resolved relative to the config file's directory.
    pub records: String,
    pub emissions: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct ImpactSection {
    pub loss_node: Option<String>,
    pub consumption: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AverageSection {
    /// Structures with posterior below this are dropped from pooling.
    pub pool_threshold: f64,
    /// Extra QoIs to pool, as record-style descriptions.
    pub qois: Vec<String>,
}

impl Default for AverageSection {
    fn default() -> Self {
        Self { pool_threshold: 1e-6, qois: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeEntry {
    pub id: String,
    pub name: String,
    /// process | compiler | consumption | loss | export
    pub class: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeEntry {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TargetedEntry {
    pub from: String,
    pub to: String,
    /// Elicited existence probability, strictly inside (0, 1).
    pub p_exist: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InputsSection {
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct PriorsSection {
    pub dirichlet: Vec<DirichletEntry>,
    pub inflow: Vec<InflowEntry>,
    /// Optional direct structure-prior table (code -> probability); when
    /// present it replaces the per-connection product and must cover every
    /// code and sum to 1.
    pub structure_override: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DirichletEntry {
    pub node: String,
    pub concentration: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InflowEntry {
    pub node: String,
    pub mean: f64,
    pub sd: f64,
}

impl ConfigFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }
}

/// Fully validated configuration with resolved core-layer objects.
pub struct RunConfig {
    pub file: ConfigFile,
    pub config_dir: PathBuf,
    pub out_dir: PathBuf,
    pub topology: Arc<Topology>,
    pub resolver: NameResolver,
    pub bundle: PriorBundle,
    pub dataset: Dataset,
    pub policy: MissingRecordPolicy,
    pub seed: u64,
    pub smc: SmcSection,
    pub loss_node: Option<NodeId>,
    pub consumption_nodes: Vec<NodeId>,
    /// Emission intensity per node (zero where the table is silent).
    pub intensity: Vec<f64>,
    /// code -> prior probability for every candidate structure.
    pub structure_priors: BTreeMap<String, f64>,
    pub pool_threshold: f64,
    /// Extra pooled QoIs: (description, spec).
    pub extra_qois: Vec<(String, QoiSpec)>,
    /// Notes emitted during resolution (defaulted priors and similar).
    pub notes: Vec<String>,
}

fn parse_class(s: &str) -> Option<NodeClass> {
    match s {
        "process" => Some(NodeClass::Process),
        "compiler" => Some(NodeClass::Compiler),
        "consumption" => Some(NodeClass::TerminalConsumption),
        "loss" => Some(NodeClass::TerminalLoss),
        "export" => Some(NodeClass::Export),
        _ => None,
    }
}

/// Parse and validate a config file plus its data tables. Collects every
/// violation it can find before failing.
pub fn load(path: &Path) -> Result<RunConfig> {
    let file = ConfigFile::from_path(path)?;
    let config_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    resolve(file, &config_dir)
}

pub fn resolve(file: ConfigFile, config_dir: &Path) -> Result<RunConfig> {
    let mut errors: Vec<String> = Vec::new();
    let mut notes: Vec<String> = Vec::new();

    // --- Nodes ---
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for entry in &file.nodes {
        let class = parse_class(&entry.class).unwrap_or_else(|| {
            errors.push(format!(
                "node {}: unknown class {:?} (expected process|compiler|consumption|loss|export)",
                entry.id, entry.class
            ));
            NodeClass::Process
        });
        nodes.push(NodeInfo { key: entry.id.clone(), name: entry.name.clone(), class });
    }

    let mut resolver = NameResolver::default();
    for (idx, entry) in file.nodes.iter().enumerate() {
        for label in [&entry.id, &entry.name].into_iter().chain(entry.aliases.iter()) {
            if let Err(prev) = resolver.insert(label, NodeId(idx)) {
                if prev != NodeId(idx) {
                    errors.push(format!(
                        "label {label:?} refers to both {} and {}",
                        file.nodes[prev.0].id, entry.id
                    ));
                }
            }
        }
    }

    let lookup = |errors: &mut Vec<String>, what: &str, label: &str| -> Option<NodeId> {
        match resolver.get(label) {
            Some(id) => Some(id),
            None => {
                errors.push(format!("{what} references undeclared node {label:?}"));
                None
            }
        }
    };

    // --- Edges, targeted connections, inputs ---
    let mut baseline = Vec::with_capacity(file.edges.len());
    for e in &file.edges {
        let from = lookup(&mut errors, "edge", &e.from);
        let to = lookup(&mut errors, "edge", &e.to);
        if let (Some(a), Some(b)) = (from, to) {
            baseline.push((a, b));
        }
    }
    let mut targeted = Vec::with_capacity(file.targeted.len());
    let mut beliefs = Vec::with_capacity(file.targeted.len());
    for (l, t) in file.targeted.iter().enumerate() {
        let from = lookup(&mut errors, "targeted connection", &t.from);
        let to = lookup(&mut errors, "targeted connection", &t.to);
        if !(t.p_exist > 0.0 && t.p_exist < 1.0) {
            errors.push(format!(
                "targeted connection {} -> {}: p_exist = {} must lie strictly inside (0, 1); \
                 certain connections belong in [[edges]], impossible ones nowhere",
                t.from, t.to, t.p_exist
            ));
        }
        if let (Some(a), Some(b)) = (from, to) {
            targeted.push((a, b));
            beliefs.push(ConnectionBelief { index: l, p_exist: t.p_exist });
        }
    }
    let mut inputs = Vec::new();
    for label in &file.inputs.nodes {
        if let Some(id) = lookup(&mut errors, "external input", label) {
            inputs.push(id);
        }
    }

    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("\n")));
    }

    let topology = Topology::new(nodes, baseline, targeted, inputs)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // --- Data tables ---
    let records_path = config_dir.join(&file.data.records);
    let emissions_path = config_dir.join(&file.data.emissions);
    let raw_records = records::read_records(&records_path)?;
    let dataset =
        records::resolve_records(&raw_records, &topology, &resolver).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(msg),
            other => other,
        })?;
    let intensity = crate::emissions::read_emissions(&emissions_path, &topology, &resolver)?;

    // --- Priors ---
    let mut dirichlet_by_node: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for d in &file.priors.dirichlet {
        let Some(id) = resolver.get(&d.node) else {
            errors.push(format!("Dirichlet prior references undeclared node {:?}", d.node));
            continue;
        };
        if dirichlet_by_node.insert(id.0, d.concentration.clone()).is_some() {
            errors.push(format!("duplicate Dirichlet prior for node {}", d.node));
        }
    }
    let mut inflow_by_node: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for q in &file.priors.inflow {
        let Some(id) = resolver.get(&q.node) else {
            errors.push(format!("inflow prior references undeclared node {:?}", q.node));
            continue;
        };
        if !(q.sd > 0.0) {
            errors.push(format!("inflow prior for {}: sd must be positive", q.node));
        }
        if inflow_by_node.insert(id.0, (q.mean, q.sd)).is_some() {
            errors.push(format!("duplicate inflow prior for node {}", q.node));
        }
    }

    // Defaults: non-informative Dirichlet for unlisted nodes; for unlisted
    // inflows, TruncNormal(best single record, 0.5 * that) when an
    // external-input record exists.
    let mut dirichlet_specs = Vec::new();
    for (id, info) in topology.nodes() {
        let deg = topology.full_out_edges(id).len();
        if deg == 0 {
            continue;
        }
        match dirichlet_by_node.get(&id.0) {
            Some(conc) => {
                dirichlet_specs.push(DirichletSpec { node: id, concentration: conc.clone() })
            }
            None => {
                if deg > 1 {
                    notes.push(format!(
                        "prior default: node {} uses non-informative Dir(1,..,1) over {deg} out-edges",
                        info.key
                    ));
                }
                dirichlet_specs.push(DirichletSpec { node: id, concentration: vec![1.0; deg] });
            }
        }
    }
    let mut input_specs = Vec::new();
    for &id in topology.external_inputs() {
        let key = &topology.node(id).key;
        match inflow_by_node.get(&id.0) {
            Some(&(mean, sd)) => input_specs.push(TruncNormalSpec { node: id, mean, sd }),
            None => {
                let best = dataset.records().iter().find(|r| {
                    r.kind == RecordKind::ExternalInput && r.qoi == QoiSpec::ExternalInput(id)
                });
                match best {
                    Some(record) => {
                        notes.push(format!(
                            "prior default: external input {key} uses TruncNormal({v}, {s}) from record {id:?}",
                            v = record.value,
                            s = 0.5 * record.value,
                            id = record.id,
                        ));
                        input_specs.push(TruncNormalSpec {
                            node: id,
                            mean: record.value,
                            sd: 0.5 * record.value,
                        });
                    }
                    None => errors.push(format!(
                        "external input {key} has neither an inflow prior nor a data record to default from"
                    )),
                }
            }
        }
    }

    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("\n")));
    }

    let bundle = PriorBundle::new(&topology, dirichlet_specs, input_specs, beliefs)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // --- Structure priors (product of beliefs, or explicit override) ---
    let n_l = topology.targeted_connections().len();
    let mut structure_priors = BTreeMap::new();
    match &file.priors.structure_override {
        Some(table) => {
            let mut total = 0.0;
            for word in 0..(1usize << n_l) {
                let code: String =
                    (0..n_l).map(|l| if word >> (n_l - 1 - l) & 1 == 1 { '1' } else { '0' }).collect();
                match table.get(&code) {
                    Some(&p) if p > 0.0 => {
                        structure_priors.insert(code, p);
                        total += p;
                    }
                    Some(&p) => errors.push(format!("structure prior override for {code} is {p}, must be positive")),
                    None => errors.push(format!("structure prior override is missing code {code}")),
                }
            }
            for extra in table.keys() {
                if !structure_priors.contains_key(extra) {
                    errors.push(format!("structure prior override names unknown code {extra}"));
                }
            }
            if (total - 1.0).abs() > 1e-9 {
                errors.push(format!("structure prior overrides sum to {total}, expected 1"));
            }
            notes.push("structure priors: using explicit override table".into());
        }
        None => {
            for word in 0..(1usize << n_l) {
                let bits: Vec<bool> = (0..n_l).map(|l| word >> (n_l - 1 - l) & 1 == 1).collect();
                let code = mfa_core::StructureCode::new(bits);
                let p = mfa_core::structure_prior(bundle.beliefs(), &code);
                structure_priors.insert(code.to_string(), p);
            }
        }
    }

    // --- Policy ---
    let policy = match file.policy.mode.as_deref() {
        None | Some("exclude") => MissingRecordPolicy::Exclude,
        Some("compact-support") => {
            let mut bounds = BTreeMap::new();
            for b in &file.policy.bounds {
                if !(b.lower < b.upper) {
                    errors.push(format!(
                        "compact-support bounds for {:?}: lower {} must be below upper {}",
                        b.record, b.lower, b.upper
                    ));
                }
                bounds.insert(b.record.clone(), (b.lower, b.upper));
            }
            MissingRecordPolicy::CompactSupport { bounds }
        }
        Some(other) => {
            errors.push(format!(
                "unknown policy mode {other:?} (expected exclude or compact-support)"
            ));
            MissingRecordPolicy::Exclude
        }
    };

    // --- Impact section ---
    let loss_node = match &file.impact.loss_node {
        Some(label) => lookup(&mut errors, "loss node", label),
        None => None,
    };
    if let Some(loss) = loss_node {
        if !topology.node(loss).class.is_terminal() {
            errors.push(format!(
                "loss node {} must be terminal",
                topology.node(loss).key
            ));
        }
    }
    let mut consumption_nodes = Vec::new();
    for label in &file.impact.consumption {
        if let Some(id) = lookup(&mut errors, "consumption node", label) {
            if Some(id) == loss_node {
                errors.push(format!("node {label} cannot be both loss and consumption"));
            }
            consumption_nodes.push(id);
        }
    }

    // --- Extra pooled QoIs ---
    let mut extra_qois = Vec::new();
    for desc in &file.average.qois {
        match records::resolve_qoi(desc, RecordKind::Flow, &topology, &resolver) {
            Ok(qoi) => extra_qois.push((desc.clone(), qoi)),
            Err(e) => errors.push(format!("average.qois entry {desc:?}: {e}")),
        }
    }

    if !(file.average.pool_threshold >= 0.0 && file.average.pool_threshold < 1.0) {
        errors.push(format!(
            "pool_threshold {} must lie in [0, 1)",
            file.average.pool_threshold
        ));
    }

    // Validate compact-support coverage against the full structure.
    if errors.is_empty() {
        let full = topology
            .structure(mfa_core::StructureCode::all_present(n_l))
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Err(e) = policy.validate(&dataset, &full) {
            errors.push(e.to_string());
        }
    }

    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("\n")));
    }

    let out_dir = config_dir.join(file.run.out.as_deref().unwrap_or("out"));
    let seed = file.run.seed;
    let smc = file.smc.clone();
    let pool_threshold = file.average.pool_threshold;
    Ok(RunConfig {
        file,
        config_dir: config_dir.to_path_buf(),
        out_dir,
        topology,
        resolver,
        bundle,
        dataset,
        policy,
        seed,
        smc,
        loss_node,
        consumption_nodes,
        intensity,
        structure_priors,
        pool_threshold,
        extra_qois,
        notes,
    })
}
