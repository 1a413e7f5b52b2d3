//! Nodal emission-intensity table: node, intensity (kg CO2eq per kg of
//! material in), note. Nodes missing from the table carry zero intensity.

use std::path::Path;
use std::sync::Arc;

use mfa_core::network::Topology;

use crate::records::NameResolver;
use crate::{CliError, Result};

pub fn read_emissions(
    path: &Path,
    topology: &Arc<Topology>,
    resolver: &NameResolver,
) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read emissions {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("emissions {}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(c_node), Some(c_intensity)) = (col("node"), col("intensity")) else {
        return Err(CliError::Config(format!(
            "emissions {}: expected columns node,intensity[,note]; got {:?}",
            path.display(),
            headers
        )));
    };

    let mut intensity = vec![0.0; topology.node_count()];
    let mut set = vec![false; topology.node_count()];
    let mut errors = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row =
            row.map_err(|e| CliError::Config(format!("emissions row {}: {e}", line + 2)))?;
        let label = row.get(c_node).unwrap_or("");
        let Some(id) = resolver.get(label) else {
            errors.push(format!("emissions row {}: unknown node {label:?}", line + 2));
            continue;
        };
        let value: f64 = match row.get(c_intensity).unwrap_or("").parse() {
            Ok(v) if v >= 0.0 => v,
            _ => {
                errors.push(format!(
                    "emissions row {}: intensity {:?} must be a non-negative number",
                    line + 2,
                    row.get(c_intensity).unwrap_or("")
                ));
                continue;
            }
        };
        if set[id.0] {
            errors.push(format!(
                "emissions row {}: duplicate entry for node {label:?}",
                line + 2
            ));
            continue;
        }
        set[id.0] = true;
        intensity[id.0] = value;
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors.join("\n")));
    }
    Ok(intensity)
}
