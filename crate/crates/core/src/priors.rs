//! Parameter priors and the network-structure prior.
//!
//! Allocation fractions get multivariate Dirichlet priors (one per node,
//! aligned to the node's out-edge list under the all-present structure);
//! external inflows get independent truncated normals with lower bound 0.
//! Restricting a bundle to a candidate structure deletes the concentration
//! entries of absent targeted out-edges and keeps the rest fixed. The
//! structure prior multiplies elicited per-connection existence
//! probabilities.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::math;
use crate::network::{NetworkStructure, NodeId, ParameterState, StructureCode, Topology};
use crate::sample;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PriorError {
    #[error("invalid prior: {0}")]
    Invalid(String),
    #[error("node {node} has {edges} out-edges under the full structure but {given} concentration entries")]
    ConcentrationMismatch { node: String, edges: usize, given: usize },
    #[error("restriction left node {0} with out-edges but no concentration entries")]
    EmptyRestriction(String),
    #[error("belief for connection {index} is {p}, but existence probabilities must lie strictly inside (0, 1); hard knowledge belongs in the baseline edge set")]
    DegenerateBelief { index: usize, p: f64 },
    #[error("{0} connection beliefs supplied for {1} targeted connections")]
    BeliefCount(usize, usize),
}

/// Dirichlet prior over one node's allocation fractions, aligned entry by
/// entry to the node's out-edge list under the all-present structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpec {
    pub node: NodeId,
    pub concentration: Vec<f64>,
}

/// Truncated-normal prior (lower bound 0) for one external inflow.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncNormalSpec {
    pub node: NodeId,
    pub mean: f64,
    pub sd: f64,
}

/// Elicited probability that targeted connection `index` (0-based) exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionBelief {
    pub index: usize,
    pub p_exist: f64,
}

/// Complete prior coverage for a topology: one Dirichlet per node with
/// out-edges, one truncated normal per external input, one belief per
/// targeted connection.
#[derive(Debug, Clone)]
pub struct PriorBundle {
    /// Indexed by node; `None` for terminal nodes.
    dirichlets: Vec<Option<DirichletSpec>>,
    /// Aligned to the topology's external-input ordering.
    inputs: Vec<TruncNormalSpec>,
    beliefs: Vec<ConnectionBelief>,
}

impl PriorBundle {
    /// Assemble and validate a bundle against its topology. Every non-terminal
    /// node needs exactly one Dirichlet spec, every external input one
    /// truncated normal, every targeted connection one belief.
    pub fn new(
        topology: &Topology,
        dirichlet_specs: Vec<DirichletSpec>,
        input_specs: Vec<TruncNormalSpec>,
        beliefs: Vec<ConnectionBelief>,
    ) -> Result<Self, PriorError> {
        let n = topology.node_count();
        let mut dirichlets: Vec<Option<DirichletSpec>> = vec![None; n];
        for spec in dirichlet_specs {
            let key = &topology.node(spec.node).key;
            let edges = topology.full_out_edges(spec.node).len();
            if edges == 0 {
                return Err(PriorError::Invalid(format!(
                    "Dirichlet spec given for terminal node {key}"
                )));
            }
            if spec.concentration.len() != edges {
                return Err(PriorError::ConcentrationMismatch {
                    node: key.clone(),
                    edges,
                    given: spec.concentration.len(),
                });
            }
            if spec.concentration.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                return Err(PriorError::Invalid(format!(
                    "non-positive Dirichlet concentration at node {key}"
                )));
            }
            if dirichlets[spec.node.0].replace(spec).is_some() {
                return Err(PriorError::Invalid(format!("duplicate Dirichlet spec for node {key}")));
            }
        }
        for (id, info) in topology.nodes() {
            if !topology.full_out_edges(id).is_empty() && dirichlets[id.0].is_none() {
                return Err(PriorError::Invalid(format!(
                    "no Dirichlet spec for node {} ({} out-edges)",
                    info.key,
                    topology.full_out_edges(id).len()
                )));
            }
        }

        let mut inputs: Vec<Option<TruncNormalSpec>> = vec![None; topology.external_inputs().len()];
        for spec in input_specs {
            let key = &topology.node(spec.node).key;
            let Some(slot) = topology.input_index(spec.node) else {
                return Err(PriorError::Invalid(format!(
                    "inflow prior given for {key}, which is not an external-input node"
                )));
            };
            if !(spec.sd > 0.0) || !spec.mean.is_finite() {
                return Err(PriorError::Invalid(format!("inflow prior for {key} needs sd > 0")));
            }
            if inputs[slot].replace(spec).is_some() {
                return Err(PriorError::Invalid(format!("duplicate inflow prior for node {key}")));
            }
        }
        let inputs: Vec<TruncNormalSpec> = inputs
            .into_iter()
            .enumerate()
            .map(|(slot, spec)| {
                spec.ok_or_else(|| {
                    let key = &topology.node(topology.external_inputs()[slot]).key;
                    PriorError::Invalid(format!("no inflow prior for external input {key}"))
                })
            })
            .collect::<Result<_, _>>()?;

        let n_l = topology.targeted_connections().len();
        if beliefs.len() != n_l {
            return Err(PriorError::BeliefCount(beliefs.len(), n_l));
        }
        let mut ordered = vec![None; n_l];
        for b in beliefs {
            if b.index >= n_l {
                return Err(PriorError::Invalid(format!(
                    "belief index {} out of range (n_L = {n_l})",
                    b.index
                )));
            }
            if !(b.p_exist > 0.0 && b.p_exist < 1.0) {
                return Err(PriorError::DegenerateBelief { index: b.index + 1, p: b.p_exist });
            }
            if ordered[b.index].replace(b).is_some() {
                return Err(PriorError::Invalid(format!("duplicate belief for connection {}", b.index + 1)));
            }
        }
        let beliefs = ordered.into_iter().map(Option::unwrap).collect();

        Ok(Self { dirichlets, inputs, beliefs })
    }

    pub fn beliefs(&self) -> &[ConnectionBelief] {
        &self.beliefs
    }

    pub fn input_specs(&self) -> &[TruncNormalSpec] {
        &self.inputs
    }

    pub fn dirichlet_for(&self, node: NodeId) -> Option<&DirichletSpec> {
        self.dirichlets[node.0].as_ref()
    }

    /// Restrict to a candidate structure: concentration entries for absent
    /// targeted out-edges are dropped; remaining entries keep value and
    /// order; inflow specs are untouched.
    pub fn restrict_to_structure(
        &self,
        structure: &NetworkStructure,
    ) -> Result<RestrictedPrior, PriorError> {
        let topo = structure.topology();
        let mut concentrations: Vec<Vec<f64>> = Vec::with_capacity(topo.node_count());
        for (id, info) in topo.nodes() {
            let full = topo.full_out_edges(id);
            if full.is_empty() {
                concentrations.push(Vec::new());
                continue;
            }
            let spec = self.dirichlets[id.0].as_ref().expect("validated at construction");
            let kept: Vec<f64> = full
                .iter()
                .zip(&spec.concentration)
                .filter(|((dest, origin), _)| match origin {
                    crate::network::EdgeOrigin::Baseline => {
                        debug_assert!(structure.has_edge(id, *dest));
                        true
                    }
                    crate::network::EdgeOrigin::Targeted(l) => structure.code().bit(*l),
                })
                .map(|(_, &a)| a)
                .collect();
            if kept.is_empty() && structure.out_degree(id) > 0 {
                return Err(PriorError::EmptyRestriction(info.key.clone()));
            }
            debug_assert_eq!(kept.len(), structure.out_degree(id));
            concentrations.push(kept);
        }
        Ok(RestrictedPrior { concentrations, inputs: self.inputs.clone() })
    }
}

/// A prior bundle specialized to one candidate structure.
#[derive(Debug, Clone)]
pub struct RestrictedPrior {
    /// Per node, aligned to the structure's active out-edges.
    concentrations: Vec<Vec<f64>>,
    inputs: Vec<TruncNormalSpec>,
}

impl RestrictedPrior {
    pub fn concentration(&self, node: NodeId) -> &[f64] {
        &self.concentrations[node.0]
    }

    pub fn input_specs(&self) -> &[TruncNormalSpec] {
        &self.inputs
    }

    /// Draw a parameter realization; satisfies the `ParameterState`
    /// invariants by construction.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> ParameterState {
        let allocation = self
            .concentrations
            .iter()
            .map(|alpha| if alpha.is_empty() { Vec::new() } else { sample::dirichlet(rng, alpha) })
            .collect();
        let inputs = self
            .inputs
            .iter()
            .map(|s| {
                // Keep draws strictly positive so the log transform stays
                // invertible; the floor is far below any physical flow.
                sample::truncated_normal(rng, s.mean, s.sd).max(1e-12 * (math::abs(s.mean) + s.sd))
            })
            .collect();
        ParameterState { allocation, inputs }
    }

    /// Joint log prior density: Dirichlet terms on each allocation simplex
    /// plus truncated-normal terms for the inflows. Support violations give
    /// the log-zero sentinel, not an error.
    pub fn log_density(&self, params: &ParameterState) -> f64 {
        let mut logp = 0.0;
        for (alpha, phi) in self.concentrations.iter().zip(&params.allocation) {
            if alpha.is_empty() {
                continue;
            }
            if phi.len() != alpha.len() {
                return math::LOG_ZERO;
            }
            logp += sample::dirichlet_log_pdf(phi, alpha);
            if logp == math::LOG_ZERO {
                return math::LOG_ZERO;
            }
        }
        if params.inputs.len() != self.inputs.len() {
            return math::LOG_ZERO;
        }
        for (spec, &q) in self.inputs.iter().zip(&params.inputs) {
            logp += sample::truncated_normal_log_pdf(q, spec.mean, spec.sd);
            if logp == math::LOG_ZERO {
                return math::LOG_ZERO;
            }
        }
        logp
    }
}

/// Prior probability of a candidate structure from per-connection existence
/// beliefs: Π p_l^{d_l} (1 − p_l)^{1−d_l}.
pub fn structure_prior(beliefs: &[ConnectionBelief], code: &StructureCode) -> f64 {
    assert_eq!(
        beliefs.len(),
        code.len(),
        "one belief per targeted connection is required"
    );
    let mut p = 1.0;
    for (b, &present) in beliefs.iter().zip(code.bits()) {
        p *= if present { b.p_exist } else { 1.0 - b.p_exist };
    }
    p
}
