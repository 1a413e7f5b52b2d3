//! Sankey-diagram document: node list plus per-link mean flow, standard
//! deviation, and relative uncertainty, serialized as JSON.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SankeyNode {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SankeyLink {
    pub source: String,
    pub target: String,
    /// Mean mass flow (Mt).
    pub mean: f64,
    /// Standard deviation (Mt).
    pub sd: f64,
    /// sd as a fraction of the mean; null when the mean is zero.
    pub sd_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SankeyDocument {
    pub nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
}

impl SankeyDocument {
    pub fn link(source: &str, target: &str, mean: f64, sd: f64) -> SankeyLink {
        let sd_pct = if mean > 0.0 { Some(sd / mean) } else { None };
        SankeyLink { source: source.into(), target: target.into(), mean, sd, sd_pct }
    }

    pub fn validate(&self) -> Result<(), String> {
        for link in &self.links {
            let known = |id: &str| self.nodes.iter().any(|n| n.id == id);
            if !known(&link.source) || !known(&link.target) {
                return Err(format!(
                    "link {} -> {} references an undeclared node",
                    link.source, link.target
                ));
            }
            if let Some(p) = link.sd_pct {
                let expect = link.sd / link.mean;
                if (p - expect).abs() > 1e-12 {
                    return Err(format!(
                        "link {} -> {}: sd_pct {} does not equal sd/mean {}",
                        link.source, link.target, p, expect
                    ));
                }
            }
        }
        Ok(())
    }
}
