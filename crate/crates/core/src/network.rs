//! MFA topologies, candidate network structures, the mass-balance linear
//! system, and quantity-of-interest evaluation.
//!
//! A [`Topology`] declares the nodes, the baseline edges that exist in every
//! candidate, and an ordered list of *targeted connections* whose existence
//! is uncertain. A [`StructureCode`] (one bit per targeted connection, bit 1
//! rendered leftmost) selects a [`NetworkStructure`]. Given allocation
//! fractions and external inflows ([`ParameterState`]), nodal throughputs
//! solve the linear system (I − Φᵀ)·x = q.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{LuFactors, Matrix};
use crate::math;

/// Index of a node within its topology's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Process,
    /// Bookkeeping node that aggregates or relabels flows; carries no
    /// physical process of its own.
    Compiler,
    TerminalConsumption,
    TerminalLoss,
    Export,
}

impl NodeClass {
    /// Terminal classes never carry out-edges.
    pub fn is_terminal(self) -> bool {
        matches!(self, NodeClass::TerminalConsumption | NodeClass::TerminalLoss | NodeClass::Export)
    }
}

#[derive(Debug, Clone)]
pub struct NodeInfo {
    /// Stable machine-readable key (unique within the topology).
    pub key: String,
    /// Human-readable name.
    pub name: String,
    pub class: NodeClass,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("{n_l} targeted connections would enumerate 2^{n_l} structures; the limit is 20")]
    TooManyTargeted { n_l: usize },
    #[error("structure code has {got} bits but the topology declares {expected} targeted connections")]
    CodeLengthMismatch { expected: usize, got: usize },
    #[error("parameters sized for a different structure: node {node} expects {expected} allocation entries, got {got}")]
    DimensionMismatch { node: String, expected: usize, got: usize },
    #[error("parameters invalid: {0}")]
    InvalidParameters(String),
    #[error("non-dissipative cycle [{cycle}]: allocation-fraction product {product} >= 1 - 1e-9, the mass-balance system is singular")]
    NonDissipativeCycle { cycle: String, product: u64 },
    #[error("mass-balance system is singular")]
    SingularSystem,
    #[error("mass-balance solve residual exceeds tolerance")]
    ResidualTooLarge,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QoiError {
    #[error("QoI references connection {from} -> {to}, which is absent from structure {code}")]
    EdgeAbsent { from: String, to: String, code: String },
    #[error("QoI references node {0}, which receives no external input")]
    NotAnInputNode(String),
    #[error("ratio denominator evaluated to {0}, ratio undefined")]
    UndefinedRatio(f64),
    #[error("QoI nesting deeper than one level of ratio/sum is not supported")]
    TooDeep,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Binary presence code over the targeted connections.
///
/// Bit `l` (1-based, leftmost in the rendered string) is 1 iff targeted
/// connection `l` is present.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructureCode {
    bits: Vec<bool>,
}

impl StructureCode {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Code with every targeted connection present.
    pub fn all_present(n_l: usize) -> Self {
        Self { bits: vec![true; n_l] }
    }

    pub fn all_absent(n_l: usize) -> Self {
        Self { bits: vec![false; n_l] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Presence of targeted connection `l` (0-based).
    pub fn bit(&self, l: usize) -> bool {
        self.bits[l]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl core::fmt::Display for StructureCode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl core::str::FromStr for StructureCode {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(NetworkError::InvalidTopology(format!(
                        "structure code may contain only 0/1, found {other:?}"
                    )))
                }
            }
        }
        Ok(Self { bits })
    }
}

/// Where an out-edge comes from: always present, or gated by a targeted
/// connection (0-based index into the targeted list).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrigin {
    Baseline,
    Targeted(usize),
}

/// A resolved directed MFA graph: nodes, baseline edges, targeted
/// connections, and external-input nodes.
#[derive(Debug)]
pub struct Topology {
    nodes: Vec<NodeInfo>,
    baseline_edges: Vec<(NodeId, NodeId)>,
    targeted: Vec<(NodeId, NodeId)>,
    external_inputs: Vec<NodeId>,
    /// Per node: full out-edge list under the all-present structure, baseline
    /// edges first (declaration order), then targeted (connection order).
    full_out: Vec<Vec<(NodeId, EdgeOrigin)>>,
}

impl Topology {
    pub fn new(
        nodes: Vec<NodeInfo>,
        baseline_edges: Vec<(NodeId, NodeId)>,
        targeted: Vec<(NodeId, NodeId)>,
        external_inputs: Vec<NodeId>,
    ) -> Result<Arc<Self>, NetworkError> {
        let n = nodes.len();
        if n == 0 {
            return Err(NetworkError::InvalidTopology("topology has no nodes".into()));
        }
        {
            let mut keys: Vec<&str> = nodes.iter().map(|i| i.key.as_str()).collect();
            keys.sort_unstable();
            if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
                return Err(NetworkError::InvalidTopology(format!("duplicate node key {:?}", w[0])));
            }
        }
        let check_node = |id: NodeId, what: &str| -> Result<(), NetworkError> {
            if id.0 >= n {
                return Err(NetworkError::InvalidTopology(format!(
                    "{what} references undeclared node index {}",
                    id.0
                )));
            }
            Ok(())
        };
        let mut seen = BTreeMap::new();
        for (pos, &(a, b)) in baseline_edges.iter().chain(targeted.iter()).enumerate() {
            check_node(a, "edge")?;
            check_node(b, "edge")?;
            if a == b {
                return Err(NetworkError::InvalidTopology(format!(
                    "self-loop on node {}",
                    nodes[a.0].key
                )));
            }
            if let Some(prev) = seen.insert((a, b), pos) {
                let kind = if prev < baseline_edges.len() && pos >= baseline_edges.len() {
                    "targeted connection duplicates baseline edge"
                } else {
                    "duplicate edge"
                };
                return Err(NetworkError::InvalidTopology(format!(
                    "{kind} {} -> {}",
                    nodes[a.0].key, nodes[b.0].key
                )));
            }
        }
        for &id in &external_inputs {
            check_node(id, "external input")?;
        }

        let mut full_out: Vec<Vec<(NodeId, EdgeOrigin)>> = vec![Vec::new(); n];
        for &(a, b) in &baseline_edges {
            full_out[a.0].push((b, EdgeOrigin::Baseline));
        }
        for (l, &(a, b)) in targeted.iter().enumerate() {
            full_out[a.0].push((b, EdgeOrigin::Targeted(l)));
        }

        for (i, info) in nodes.iter().enumerate() {
            let out = &full_out[i];
            if info.class.is_terminal() {
                // Terminal-class nodes may carry *targeted* out-edges: they
                // act as terminals exactly in the structures that omit those
                // connections. Baseline out-edges would contradict the class
                // in every candidate.
                if out.iter().any(|(_, o)| matches!(o, EdgeOrigin::Baseline)) {
                    return Err(NetworkError::InvalidTopology(format!(
                        "terminal node {} has baseline out-edges; uncertain pass-through belongs in targeted_connections",
                        info.key
                    )));
                }
            } else {
                if out.is_empty() {
                    return Err(NetworkError::InvalidTopology(format!(
                        "non-terminal node {} has no out-edges",
                        info.key
                    )));
                }
                // A non-terminal node whose out-edges are all targeted would
                // be left dangling by the all-absent code; reject up front
                // rather than renormalize silently.
                if out.iter().all(|(_, o)| matches!(o, EdgeOrigin::Targeted(_))) {
                    return Err(NetworkError::InvalidTopology(format!(
                        "non-terminal node {} would lose all out-edges in structures omitting its targeted connections",
                        info.key
                    )));
                }
            }
        }

        Ok(Arc::new(Self { nodes, baseline_edges, targeted, external_inputs, full_out }))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &NodeInfo {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeInfo)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn node_by_key(&self, key: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.key == key).map(NodeId)
    }

    pub fn targeted_connections(&self) -> &[(NodeId, NodeId)] {
        &self.targeted
    }

    pub fn baseline_edges(&self) -> &[(NodeId, NodeId)] {
        &self.baseline_edges
    }

    pub fn external_inputs(&self) -> &[NodeId] {
        &self.external_inputs
    }

    pub fn is_external_input(&self, id: NodeId) -> bool {
        self.external_inputs.contains(&id)
    }

    /// Position of `id` in the external-input ordering.
    pub fn input_index(&self, id: NodeId) -> Option<usize> {
        self.external_inputs.iter().position(|&x| x == id)
    }

    /// Out-edge list under the all-present structure.
    pub fn full_out_edges(&self, id: NodeId) -> &[(NodeId, EdgeOrigin)] {
        &self.full_out[id.0]
    }

    /// Resolve one candidate structure from its code.
    pub fn structure(self: &Arc<Self>, code: StructureCode) -> Result<NetworkStructure, NetworkError> {
        if code.len() != self.targeted.len() {
            return Err(NetworkError::CodeLengthMismatch {
                expected: self.targeted.len(),
                got: code.len(),
            });
        }
        let active_out: Vec<Vec<NodeId>> = self
            .full_out
            .iter()
            .map(|outs| {
                outs.iter()
                    .filter(|(_, origin)| match origin {
                        EdgeOrigin::Baseline => true,
                        EdgeOrigin::Targeted(l) => code.bit(*l),
                    })
                    .map(|&(dest, _)| dest)
                    .collect()
            })
            .collect();
        Ok(NetworkStructure { topology: Arc::clone(self), code, active_out })
    }

    /// All 2^n_L candidate structures in lexicographic code order.
    pub fn enumerate_structures(self: &Arc<Self>) -> Result<Vec<NetworkStructure>, NetworkError> {
        let n_l = self.targeted.len();
        if n_l > 20 {
            return Err(NetworkError::TooManyTargeted { n_l });
        }
        let count = 1usize << n_l;
        let mut out = Vec::with_capacity(count);
        for word in 0..count {
            // Lexicographic order: connection 1 is the most significant bit.
            let bits: Vec<bool> = (0..n_l).map(|l| word >> (n_l - 1 - l) & 1 == 1).collect();
            out.push(self.structure(StructureCode::new(bits))?);
        }
        Ok(out)
    }
}

/// One candidate network: a topology with a subset of targeted connections
/// switched on.
#[derive(Debug, Clone)]
pub struct NetworkStructure {
    topology: Arc<Topology>,
    code: StructureCode,
    active_out: Vec<Vec<NodeId>>,
}

impl NetworkStructure {
    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn code(&self) -> &StructureCode {
        &self.code
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Active out-edge destinations of `id`, in the canonical order
    /// (baseline declaration order, then targeted order).
    pub fn out_edges(&self, id: NodeId) -> &[NodeId] {
        &self.active_out[id.0]
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.active_out[id.0].len()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.active_out[from.0].contains(&to)
    }

    /// Position of `to` within `from`'s active out-edge list.
    pub fn edge_slot(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.active_out[from.0].iter().position(|&d| d == to)
    }

    /// All active edges in canonical order (by source node, then out-edge
    /// position). This is the parameter ordering used throughout.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.active_out
            .iter()
            .enumerate()
            .flat_map(|(i, outs)| outs.iter().map(move |&dest| (NodeId(i), dest)))
    }

    fn check_params(&self, params: &ParameterState) -> Result<(), NetworkError> {
        let n = self.node_count();
        if params.allocation.len() != n {
            return Err(NetworkError::InvalidParameters(format!(
                "allocation table has {} rows for {} nodes",
                params.allocation.len(),
                n
            )));
        }
        for i in 0..n {
            let expected = self.active_out[i].len();
            let got = params.allocation[i].len();
            if got != expected {
                return Err(NetworkError::DimensionMismatch {
                    node: self.topology.nodes[i].key.clone(),
                    expected,
                    got,
                });
            }
        }
        let n_inputs = self.topology.external_inputs.len();
        if params.inputs.len() != n_inputs {
            return Err(NetworkError::InvalidParameters(format!(
                "{} external inputs provided, topology declares {}",
                params.inputs.len(),
                n_inputs
            )));
        }
        params.validate_values(self)
    }

    /// Assemble the mass-balance matrix I − Φᵀ: unit diagonal, entry (j, i)
    /// = −φ_ij for every active edge (i, j).
    pub fn balance_matrix(&self, params: &ParameterState) -> Result<Matrix, NetworkError> {
        self.check_params(params)?;
        let n = self.node_count();
        let mut m = Matrix::identity(n);
        for (i, outs) in self.active_out.iter().enumerate() {
            for (slot, &dest) in outs.iter().enumerate() {
                m[(dest.0, i)] = -params.allocation[i][slot];
            }
        }
        Ok(m)
    }

    /// Dense external-inflow vector over all nodes.
    pub fn input_vector(&self, params: &ParameterState) -> Vec<f64> {
        let mut q = vec![0.0; self.node_count()];
        for (slot, &node) in self.topology.external_inputs.iter().enumerate() {
            q[node.0] = params.inputs[slot];
        }
        q
    }

    /// Spectral-radius estimate of Φ over the active edges only (the dense
    /// matrix is overwhelmingly zeros). Geometric-mean growth of ‖Φᵏ·1‖.
    fn allocation_spectral_radius(&self, params: &ParameterState, steps: usize) -> f64 {
        let n = self.node_count();
        let mut v = vec![1.0; n];
        let mut w = vec![0.0; n];
        let mut log_growth = 0.0;
        // Allocations are substochastic, so per-step norms never exceed 1
        // and the running mean only falls: once the accumulated decay rules
        // out reaching the singularity threshold, stop early.
        let give_up = steps as f64 * math::ln_1p(-1e-9);
        for step in 1..=steps {
            w.iter_mut().for_each(|x| *x = 0.0);
            for (i, outs) in self.active_out.iter().enumerate() {
                let vi = v[i];
                if vi == 0.0 {
                    continue;
                }
                for (slot, &dest) in outs.iter().enumerate() {
                    w[dest.0] += params.allocation[i][slot] * vi;
                }
            }
            let norm = w.iter().copied().fold(0.0f64, f64::max);
            if norm <= 1e-300 {
                return 0.0;
            }
            log_growth += math::ln(norm);
            if log_growth < give_up {
                return math::exp(log_growth / steps as f64);
            }
            if step == steps {
                return math::exp(log_growth / steps as f64);
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        unreachable!()
    }

    /// Solve the mass balance (I − Φᵀ)·x = q and populate per-edge flows.
    pub fn solve_mass_flows(&self, params: &ParameterState) -> Result<FlowSolution, NetworkError> {
        let x = self.solve_throughputs(params)?;
        let mut z = BTreeMap::new();
        for (i, outs) in self.active_out.iter().enumerate() {
            for (slot, &dest) in outs.iter().enumerate() {
                z.insert((NodeId(i), dest), params.allocation[i][slot] * x[i]);
            }
        }
        Ok(FlowSolution { x, z })
    }

    /// Nodal throughputs only; the hot path for repeated likelihood
    /// evaluations (skips the per-edge flow map).
    pub fn solve_throughputs(&self, params: &ParameterState) -> Result<Vec<f64>, NetworkError> {
        self.check_params(params)?;
        let n = self.node_count();

        // Invertibility precheck: every directed cycle must dissipate mass.
        // At least 2n steps so acyclic transients fully wash out.
        let radius = self.allocation_spectral_radius(params, 100.max(2 * n));
        if radius >= 1.0 - 1e-9 {
            let cycle = find_critical_cycle(self, params);
            let product = cycle_product(self, params, &cycle);
            let cycle = cycle
                .iter()
                .map(|&id| self.topology.nodes[id.0].key.as_str())
                .collect::<Vec<_>>()
                .join(" -> ");
            return Err(NetworkError::NonDissipativeCycle { cycle, product: product.to_bits() });
        }

        let mut system = Matrix::identity(n);
        for (i, outs) in self.active_out.iter().enumerate() {
            for (slot, &dest) in outs.iter().enumerate() {
                system[(dest.0, i)] = -params.allocation[i][slot];
            }
        }
        let q = self.input_vector(params);
        let lu = LuFactors::new(&system).map_err(|_| NetworkError::SingularSystem)?;
        let mut x = lu.solve(&q);

        let q_norm = q.iter().copied().fold(0.0f64, |m, v| m.max(math::abs(v)));
        let tol = 1e-10 * q_norm;
        let residual_of = |x: &[f64]| -> f64 {
            let ax = system.matvec(x);
            ax.iter().zip(&q).map(|(a, b)| math::abs(a - b)).fold(0.0f64, f64::max)
        };
        if residual_of(&x) > tol {
            // One step of iterative refinement before giving up.
            let ax = system.matvec(&x);
            let r: Vec<f64> = q.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let dx = lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            if residual_of(&x) > tol {
                return Err(NetworkError::ResidualTooLarge);
            }
        }

        // Round-off guard: a dissipative system with q >= 0 has x >= 0.
        for xi in x.iter_mut() {
            if *xi < 0.0 && *xi > -1e-9 * q_norm.max(1.0) {
                *xi = 0.0;
            }
        }
        Ok(x)
    }
}

/// One realization of the uncertain parameters under a given structure:
/// per-node allocation simplexes plus external inflow magnitudes (Mt/yr).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    /// allocation[i] is aligned to the structure's active out-edges of node i
    /// (empty for terminal nodes).
    pub allocation: Vec<Vec<f64>>,
    /// Aligned to the topology's external-input ordering.
    pub inputs: Vec<f64>,
}

impl ParameterState {
    fn validate_values(&self, structure: &NetworkStructure) -> Result<(), NetworkError> {
        for (i, row) in self.allocation.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for &v in row {
                if !(0.0..=1.0 + 1e-12).contains(&v) {
                    return Err(NetworkError::InvalidParameters(format!(
                        "allocation fraction {v} at node {} outside [0, 1]",
                        structure.topology.nodes[i].key
                    )));
                }
                sum += v;
            }
            if math::abs(sum - 1.0) > 1e-12 {
                return Err(NetworkError::InvalidParameters(format!(
                    "allocation fractions of node {} sum to {sum}, not 1",
                    structure.topology.nodes[i].key
                )));
            }
        }
        for &q in &self.inputs {
            if q < 0.0 || !q.is_finite() {
                return Err(NetworkError::InvalidParameters(format!(
                    "external input {q} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Allocation fraction on edge (from, to), if active.
    pub fn allocation_on(&self, structure: &NetworkStructure, from: NodeId, to: NodeId) -> Option<f64> {
        structure
            .out_edges(from)
            .iter()
            .position(|&d| d == to)
            .map(|slot| self.allocation[from.0][slot])
    }
}

/// Solved nodal throughputs and per-edge flows.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Nodal throughputs (Mt/yr), indexed by node.
    pub x: Vec<f64>,
    /// Per-edge flows z_ij = φ_ij · x_i over the active edges.
    pub z: BTreeMap<(NodeId, NodeId), f64>,
}

/// A derived scalar quantity: the kinds mirror the forms MFA data comes in.
#[derive(Debug, Clone, PartialEq)]
pub enum QoiSpec {
    NodalFlow(NodeId),
    ConnectionFlow(NodeId, NodeId),
    ExternalInput(NodeId),
    Ratio(alloc::boxed::Box<QoiSpec>, alloc::boxed::Box<QoiSpec>),
    Sum(Vec<QoiSpec>),
}

impl QoiSpec {
    fn depth(&self) -> usize {
        match self {
            QoiSpec::NodalFlow(_) | QoiSpec::ConnectionFlow(..) | QoiSpec::ExternalInput(_) => 0,
            QoiSpec::Ratio(a, b) => 1 + a.depth().max(b.depth()),
            QoiSpec::Sum(items) => 1 + items.iter().map(QoiSpec::depth).max().unwrap_or(0),
        }
    }

    /// Composition is limited to one level of ratio/sum nesting (a ratio of
    /// sums is the deepest form the data takes).
    pub fn validate(&self) -> Result<(), QoiError> {
        let ok = match self {
            QoiSpec::Ratio(a, b) => a.depth() <= 1 && b.depth() <= 1 && self.depth() <= 2,
            _ => self.depth() <= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(QoiError::TooDeep)
        }
    }

    /// Connection references, used for structure applicability.
    pub fn edge_references(&self, out: &mut Vec<(NodeId, NodeId)>) {
        match self {
            QoiSpec::ConnectionFlow(a, b) => out.push((*a, *b)),
            QoiSpec::Ratio(a, b) => {
                a.edge_references(out);
                b.edge_references(out);
            }
            QoiSpec::Sum(items) => {
                for item in items {
                    item.edge_references(out);
                }
            }
            _ => {}
        }
    }

    /// True iff every connection this QoI references is active in `structure`.
    pub fn applicable_to(&self, structure: &NetworkStructure) -> bool {
        let mut edges = Vec::new();
        self.edge_references(&mut edges);
        edges.iter().all(|&(a, b)| structure.has_edge(a, b))
    }

    /// Evaluate against a previously solved flow state.
    pub fn evaluate_with(
        &self,
        structure: &NetworkStructure,
        params: &ParameterState,
        solution: &FlowSolution,
    ) -> Result<f64, QoiError> {
        match self {
            QoiSpec::NodalFlow(i) => Ok(solution.x[i.0]),
            QoiSpec::ConnectionFlow(a, b) => {
                solution.z.get(&(*a, *b)).copied().ok_or_else(|| QoiError::EdgeAbsent {
                    from: structure.topology.nodes[a.0].key.clone(),
                    to: structure.topology.nodes[b.0].key.clone(),
                    code: structure.code.to_string(),
                })
            }
            QoiSpec::ExternalInput(i) => {
                let slot = structure
                    .topology
                    .input_index(*i)
                    .ok_or_else(|| QoiError::NotAnInputNode(structure.topology.nodes[i.0].key.clone()))?;
                Ok(params.inputs[slot])
            }
            QoiSpec::Ratio(num, den) => {
                let d = den.evaluate_with(structure, params, solution)?;
                if d == 0.0 {
                    return Err(QoiError::UndefinedRatio(d));
                }
                let n = num.evaluate_with(structure, params, solution)?;
                Ok(n / d)
            }
            QoiSpec::Sum(items) => {
                let mut total = 0.0;
                for item in items {
                    total += item.evaluate_with(structure, params, solution)?;
                }
                Ok(total)
            }
        }
    }

    /// Evaluate from scratch (solves the mass balance internally).
    pub fn evaluate(
        &self,
        structure: &NetworkStructure,
        params: &ParameterState,
    ) -> Result<f64, QoiError> {
        let solution = structure.solve_mass_flows(params)?;
        self.evaluate_with(structure, params, &solution)
    }
}

fn cycle_product(structure: &NetworkStructure, params: &ParameterState, cycle: &[NodeId]) -> f64 {
    if cycle.is_empty() {
        return f64::NAN;
    }
    let mut product = 1.0;
    for w in 0..cycle.len() {
        let from = cycle[w];
        let to = cycle[(w + 1) % cycle.len()];
        product *= params.allocation_on(structure, from, to).unwrap_or(0.0);
    }
    product
}

/// Locate the maximum-geometric-mean cycle (Karp's algorithm on log
/// weights), used to name the offending cycle when the system is singular.
fn find_critical_cycle(structure: &NetworkStructure, params: &ParameterState) -> Vec<NodeId> {
    let n = structure.node_count();
    // Edge weights ln φ for φ > 0.
    let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, outs) in structure.active_out.iter().enumerate() {
        for (slot, &dest) in outs.iter().enumerate() {
            let phi = params.allocation[i][slot];
            if phi > 0.0 {
                edges[i].push((dest.0, math::ln(phi)));
            }
        }
    }

    // Karp: d[t][v] = best log-product over walks of length t ending at v.
    let neg = f64::NEG_INFINITY;
    let mut d = vec![vec![neg; n]; n + 1];
    let mut parent = vec![vec![usize::MAX; n]; n + 1];
    for v in 0..n {
        d[0][v] = 0.0;
    }
    for t in 1..=n {
        for u in 0..n {
            if d[t - 1][u] == neg {
                continue;
            }
            for &(v, w) in &edges[u] {
                let cand = d[t - 1][u] + w;
                if cand > d[t][v] {
                    d[t][v] = cand;
                    parent[t][v] = u;
                }
            }
        }
    }

    // Best mean weight mu(v) = min over t of (d[n][v] - d[t][v]) / (n - t).
    let mut best: Option<(usize, f64)> = None;
    for v in 0..n {
        if d[n][v] == neg {
            continue;
        }
        let mut mu = f64::INFINITY;
        for t in 0..n {
            if d[t][v] == neg {
                continue;
            }
            mu = mu.min((d[n][v] - d[t][v]) / (n - t) as f64);
        }
        if mu.is_finite() && best.map_or(true, |(_, b)| mu > b) {
            best = Some((v, mu));
        }
    }
    let Some((start, _)) = best else { return Vec::new() };

    // Walk parents from level n; a vertex repeated along the walk closes the
    // critical cycle.
    let mut walk = vec![start];
    let mut v = start;
    let mut t = n;
    while t > 0 && parent[t][v] != usize::MAX {
        v = parent[t][v];
        t -= 1;
        walk.push(v);
    }
    let mut last_seen = BTreeMap::new();
    for (pos, &node) in walk.iter().enumerate() {
        if let Some(&first) = last_seen.get(&node) {
            let mut cycle: Vec<NodeId> = walk[first..pos].iter().map(|&u| NodeId(u)).collect();
            cycle.reverse();
            return cycle;
        }
        last_seen.insert(node, pos);
    }
    Vec::new()
}
