//! Bijection between constrained parameters and unconstrained coordinates.
//!
//! Allocation simplexes map through a centered stick-breaking transform
//! (a K-simplex becomes K−1 unbounded reals; the uniform center maps to the
//! origin); external inflows map through log. Both directions carry the
//! log-Jacobian so densities can be evaluated in either space.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::network::{NetworkStructure, NodeId, ParameterState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("parameter {0} sits on the simplex boundary; the transform is only defined on the interior")]
    Boundary(String),
    #[error("external input {0} must be strictly positive to unconstrain")]
    NonPositiveInput(String),
    #[error("unconstrained vector has length {got}, layout expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Coordinate layout of the unconstrained space for one structure:
/// per multi-edge node a (out_degree − 1)-block, then one log-input per
/// external inflow.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    /// (node, out_degree) for every node with out_degree >= 2, in node order.
    blocks: Vec<(NodeId, usize)>,
    n_inputs: usize,
    dim: usize,
}

impl ParamLayout {
    pub fn for_structure(structure: &NetworkStructure) -> Self {
        let mut blocks = Vec::new();
        let mut dim = 0;
        for (id, _) in structure.topology().nodes() {
            let deg = structure.out_degree(id);
            if deg >= 2 {
                blocks.push((id, deg));
                dim += deg - 1;
            }
        }
        let n_inputs = structure.topology().external_inputs().len();
        dim += n_inputs;
        Self { blocks, n_inputs, dim }
    }

    /// Total unconstrained dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[(NodeId, usize)] {
        &self.blocks
    }

    /// Human-readable coordinate names (for persisted particle tables).
    pub fn coordinate_names(&self, structure: &NetworkStructure) -> Vec<String> {
        use alloc::format;
        let topo = structure.topology();
        let mut names = Vec::with_capacity(self.dim);
        for &(node, deg) in &self.blocks {
            let outs = structure.out_edges(node);
            debug_assert_eq!(outs.len(), deg);
            for k in 0..deg - 1 {
                names.push(format!("sb[{}->{}]", topo.node(node).key, topo.node(outs[k]).key));
            }
        }
        for &node in topo.external_inputs() {
            names.push(format!("logq[{}]", topo.node(node).key));
        }
        names
    }

    /// Map a constrained state to unconstrained coordinates. Fails on simplex
    /// boundaries and non-positive inflows (measure-zero under the priors).
    pub fn unconstrain(&self, params: &ParameterState) -> Result<Vec<f64>, TransformError> {
        let mut u = Vec::with_capacity(self.dim);
        for &(node, deg) in &self.blocks {
            let phi = &params.allocation[node.0];
            debug_assert_eq!(phi.len(), deg);
            let mut remaining = 1.0;
            for k in 0..deg - 1 {
                let frac = phi[k] / remaining;
                if !(frac > 0.0 && frac < 1.0) || remaining <= 0.0 {
                    return Err(TransformError::Boundary(alloc::format!("{node}[{k}]")));
                }
                // Centered logit: the uniform simplex point maps to 0.
                u.push(math::ln(frac / (1.0 - frac)) + math::ln((deg - 1 - k) as f64));
                remaining -= phi[k];
            }
        }
        for (slot, &q) in params.inputs.iter().enumerate() {
            if q <= 0.0 {
                return Err(TransformError::NonPositiveInput(alloc::format!("q[{slot}]")));
            }
            u.push(math::ln(q));
        }
        debug_assert_eq!(u.len(), self.dim);
        Ok(u)
    }

    /// Map unconstrained coordinates back to a constrained state, returning
    /// the log-Jacobian of the constraining map (added to constrained-space
    /// densities to evaluate in unconstrained space).
    pub fn constrain(
        &self,
        structure: &NetworkStructure,
        u: &[f64],
    ) -> Result<(ParameterState, f64), TransformError> {
        if u.len() != self.dim {
            return Err(TransformError::LengthMismatch { expected: self.dim, got: u.len() });
        }
        let n = structure.node_count();
        let mut allocation: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let deg = structure.out_degree(NodeId(i));
                if deg == 1 {
                    alloc::vec![1.0]
                } else {
                    Vec::new()
                }
            })
            .collect();
        let mut log_jac = 0.0;
        let mut pos = 0;
        for &(node, deg) in &self.blocks {
            let mut phi = Vec::with_capacity(deg);
            let mut remaining = 1.0;
            for k in 0..deg - 1 {
                let y = u[pos] - math::ln((deg - 1 - k) as f64);
                pos += 1;
                // Stable logistic.
                let frac = if y >= 0.0 {
                    1.0 / (1.0 + math::exp(-y))
                } else {
                    let e = math::exp(y);
                    e / (1.0 + e)
                };
                let value = remaining * frac;
                // d phi_k / d u_k = remaining * frac * (1 - frac)
                log_jac += math::ln(remaining) + math::ln(frac) + math::ln(1.0 - frac);
                phi.push(value);
                remaining -= value;
            }
            phi.push(remaining.max(0.0));
            allocation[node.0] = phi;
        }
        let mut inputs = Vec::with_capacity(self.n_inputs);
        for slot in 0..self.n_inputs {
            let q = math::exp(u[pos + slot]);
            // d q / d (log q) = q
            log_jac += u[pos + slot];
            inputs.push(q);
        }
        Ok((ParameterState { allocation, inputs }, log_jac))
    }
}
