//! Observation table ingestion. The CSV mirrors the source data layout:
//! description, type, value, source, and an optional per-record sigma.
//!
//! Descriptions name nodes the way statistics tables do ("Iron Ore
//! Consumption to Blast Furnace"); resolution handles aliases and hops
//! through a single compiler node, so "Electric Arc Furnace to Billet"
//! finds the edge EAF_yield -> billets.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use mfa_core::likelihood::{DataRecord, Dataset, DEFAULT_SIGMA};
use mfa_core::network::{NodeClass, NodeId, QoiSpec, Topology};
use mfa_core::RecordKind;

use crate::{CliError, Result};

/// Case-insensitive node lookup over ids, display names, and aliases.
#[derive(Debug, Default, Clone)]
pub struct NameResolver {
    map: BTreeMap<String, NodeId>,
}

impl NameResolver {
    /// Returns Err(existing) when the normalized label is already taken.
    pub fn insert(&mut self, label: &str, id: NodeId) -> std::result::Result<(), NodeId> {
        let key = normalize(label);
        match self.map.get(&key) {
            Some(&prev) if prev != id => Err(prev),
            _ => {
                self.map.insert(key, id);
                Ok(())
            }
        }
    }

    pub fn get(&self, label: &str) -> Option<NodeId> {
        self.map.get(&normalize(label)).copied()
    }
}

fn normalize(label: &str) -> String {
    label.trim().to_lowercase()
}

/// One raw CSV row.
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub description: String,
    pub kind: RecordKind,
    pub value: f64,
    pub source: String,
    pub sigma: Option<f64>,
}

pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read records {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("records {}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(c_desc), Some(c_type), Some(c_value), Some(c_source)) =
        (col("description"), col("type"), col("value"), col("source"))
    else {
        return Err(CliError::Config(format!(
            "records {}: expected columns description,type,value,source (optional sigma); got {:?}",
            path.display(),
            headers
        )));
    };
    let c_sigma = col("sigma");

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CliError::Config(format!("records row {}: {e}", line + 2)))?;
        let description = row.get(c_desc).unwrap_or("").to_string();
        let kind = match row.get(c_type).unwrap_or("") {
            t if t.eq_ignore_ascii_case("external input") => RecordKind::ExternalInput,
            t if t.eq_ignore_ascii_case("flow") => RecordKind::Flow,
            t if t.eq_ignore_ascii_case("ratio") => RecordKind::Ratio,
            t if t.eq_ignore_ascii_case("sum") => RecordKind::Sum,
            other => {
                errors.push(format!(
                    "record {description:?}: unknown type {other:?} (expected External Input, Flow, Ratio, or Sum)"
                ));
                continue;
            }
        };
        let value: f64 = match row.get(c_value).unwrap_or("").parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(format!(
                    "record {description:?}: value {:?} is not a number",
                    row.get(c_value).unwrap_or("")
                ));
                continue;
            }
        };
        let sigma = match c_sigma.and_then(|c| row.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v > 0.0 => Some(v),
                _ => {
                    errors.push(format!("record {description:?}: sigma {s:?} must be a positive number"));
                    continue;
                }
            },
            None => None,
        };
        rows.push(RawRecord {
            description,
            kind,
            value,
            source: row.get(c_source).unwrap_or("").to_string(),
            sigma,
        });
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("\n")));
    }
    Ok(rows)
}

/// Resolve an edge reference (from, to), hopping through one compiler node
/// when the direct edge does not exist under the all-present structure.
fn resolve_edge(
    topology: &Topology,
    from: NodeId,
    to: NodeId,
) -> Option<(NodeId, NodeId)> {
    let direct = topology.full_out_edges(from).iter().any(|&(dest, _)| dest == to);
    if direct {
        return Some((from, to));
    }
    // One hop: unique out-edge into a compiler that has the edge.
    let hops: Vec<NodeId> = topology
        .full_out_edges(from)
        .iter()
        .map(|&(dest, _)| dest)
        .filter(|&dest| {
            topology.node(dest).class == NodeClass::Compiler
                && topology.full_out_edges(dest).iter().any(|&(d2, _)| d2 == to)
        })
        .collect();
    match hops.as_slice() {
        [single] => Some((*single, to)),
        _ => None,
    }
}

/// Turn a record-style description into a QoI under the given kind.
pub fn resolve_qoi(
    description: &str,
    kind: RecordKind,
    topology: &Arc<Topology>,
    resolver: &NameResolver,
) -> Result<QoiSpec> {
    let fail = |msg: String| CliError::Config(format!("record {description:?}: {msg}"));

    if kind == RecordKind::Sum {
        // "A to B + C to D + ..." sums connection flows.
        let mut parts = Vec::new();
        for term in description.split(" + ") {
            let qoi = resolve_qoi(term, RecordKind::Flow, topology, resolver)?;
            parts.push(qoi);
        }
        if parts.len() < 2 {
            return Err(fail("sum records need at least two '+'-separated flows".into()));
        }
        return Ok(QoiSpec::Sum(parts));
    }

    // A full-string alias match wins (used for import inflows like
    // "Import to Iron Ore Consumption").
    if let Some(id) = resolver.get(description) {
        return match kind {
            RecordKind::ExternalInput => {
                if topology.input_index(id).is_none() {
                    Err(fail(format!(
                        "{} does not receive an external input",
                        topology.node(id).key
                    )))
                } else {
                    Ok(QoiSpec::ExternalInput(id))
                }
            }
            RecordKind::Flow => Ok(QoiSpec::NodalFlow(id)),
            RecordKind::Ratio | RecordKind::Sum => {
                Err(fail("ratio records need the form 'Origin to Destination'".into()))
            }
        };
    }

    let Some((from_str, to_str)) = description.split_once(" to ") else {
        return Err(fail("expected 'Origin to Destination' or a known node name".into()));
    };
    let from = resolver
        .get(from_str)
        .ok_or_else(|| fail(format!("unknown node {from_str:?}")))?;
    let to = resolver
        .get(to_str)
        .ok_or_else(|| fail(format!("unknown node {to_str:?}")))?;

    match kind {
        RecordKind::ExternalInput => {
            // "Purchased Scrap to Scrap Collected": the inflow enters at the
            // origin node.
            if topology.input_index(from).is_none() {
                return Err(fail(format!(
                    "{} does not receive an external input",
                    topology.node(from).key
                )));
            }
            Ok(QoiSpec::ExternalInput(from))
        }
        RecordKind::Flow => {
            let (a, b) = resolve_edge(topology, from, to).ok_or_else(|| {
                fail(format!(
                    "no connection from {} to {} (directly or via one compiler hop)",
                    topology.node(from).key,
                    topology.node(to).key
                ))
            })?;
            Ok(QoiSpec::ConnectionFlow(a, b))
        }
        RecordKind::Ratio => {
            // Percentage-from-origin: share of the (hop-resolved) origin's
            // throughput that goes to the destination.
            let (a, b) = resolve_edge(topology, from, to).ok_or_else(|| {
                fail(format!(
                    "no connection from {} to {} (directly or via one compiler hop)",
                    topology.node(from).key,
                    topology.node(to).key
                ))
            })?;
            Ok(QoiSpec::Ratio(
                Box::new(QoiSpec::ConnectionFlow(a, b)),
                Box::new(QoiSpec::NodalFlow(a)),
            ))
        }
        RecordKind::Sum => unreachable!("handled above"),
    }
}

pub fn resolve_records(
    raw: &[RawRecord],
    topology: &Arc<Topology>,
    resolver: &NameResolver,
) -> Result<Dataset> {
    let mut errors = Vec::new();
    let mut records = Vec::with_capacity(raw.len());
    let mut seen = BTreeMap::new();
    for row in raw {
        if let Some(()) = seen.insert(row.description.clone(), ()) {
            errors.push(format!("duplicate record description {:?}", row.description));
            continue;
        }
        match resolve_qoi(&row.description, row.kind, topology, resolver) {
            Ok(qoi) => records.push(DataRecord {
                id: row.description.clone(),
                kind: row.kind,
                qoi,
                value: row.value,
                sigma: row.sigma.unwrap_or(DEFAULT_SIGMA),
                source: row.source.clone(),
            }),
            Err(CliError::Config(msg)) => errors.push(msg),
            Err(other) => return Err(other),
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("\n")));
    }
    Dataset::new(records).map_err(|e| CliError::Config(e.to_string()))
}
