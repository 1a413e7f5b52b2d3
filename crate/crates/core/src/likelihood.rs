//! Observation records and the relative-noise likelihood.
//!
//! Each record pairs a QoI with an observed value y_k and a relative noise
//! level σ_k; the residual (y_k / G_k − 1) is scored under N(0, σ_k²).
//! Records whose QoI references a connection absent from a candidate
//! structure are either excluded from that structure's likelihood (the
//! default) or, under the compact-support policy, replaced by the constant
//! density 1 / (b_u − b_l) while applicable records switch to a truncated
//! normal over the same bounds — keeping marginal likelihoods comparable
//! across structures.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::network::{NetworkStructure, ParameterState, QoiError, QoiSpec};

/// What form the observed value takes; mirrors the source-table vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    ExternalInput,
    Flow,
    Ratio,
    Sum,
}

impl core::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            RecordKind::ExternalInput => "External Input",
            RecordKind::Flow => "Flow",
            RecordKind::Ratio => "Ratio",
            RecordKind::Sum => "Sum",
        };
        f.write_str(s)
    }
}

/// One observation: a QoI, its observed value (Mt for flows and inputs,
/// dimensionless for ratios), and the relative noise standard deviation.
#[derive(Debug, Clone)]
pub struct DataRecord {
    pub id: String,
    pub kind: RecordKind,
    pub qoi: QoiSpec,
    pub value: f64,
    pub sigma: f64,
    pub source: String,
}

/// Default relative noise level when a record does not specify one.
pub const DEFAULT_SIGMA: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("record {id}: {problem}")]
    InvalidRecord { id: String, problem: String },
    #[error("record {id} references a targeted connection but has no compact-support bounds")]
    MissingBounds { id: String },
    #[error("record {id}: compact-support bounds ({lo}, {hi}) must satisfy lo < hi")]
    BadBounds { id: String, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("record {id}: {source}")]
    Qoi { id: String, source: QoiError },
}

/// An ordered set of observations.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<DataRecord>,
}

impl Dataset {
    pub fn new(records: Vec<DataRecord>) -> Result<Self, DatasetError> {
        for r in &records {
            let fail = |problem: String| DatasetError::InvalidRecord { id: r.id.clone(), problem };
            r.qoi.validate().map_err(|e| fail(format!("{e}")))?;
            if !(r.value >= 0.0) || !r.value.is_finite() {
                return Err(fail(format!("value {} must be finite and non-negative", r.value)));
            }
            if !(r.sigma > 0.0) || !r.sigma.is_finite() {
                return Err(fail(format!("sigma {} must be positive", r.sigma)));
            }
            if r.kind == RecordKind::Ratio && r.value > 1.0 {
                return Err(fail(format!("ratio value {} must lie in [0, 1]", r.value)));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[DataRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Per-record applicability under `structure`: a record applies iff every
    /// connection its QoI references is active. Recomputed deterministically;
    /// for the all-present structure the mask is all-true.
    pub fn applicability(&self, structure: &NetworkStructure) -> Vec<bool> {
        self.records.iter().map(|r| r.qoi.applicable_to(structure)).collect()
    }

    /// Ids of the records that enter the likelihood for `structure`; recorded
    /// in run metadata so evidence comparisons stay auditable.
    pub fn applicable_ids(&self, structure: &NetworkStructure) -> Vec<String> {
        self.records
            .iter()
            .zip(self.applicability(structure))
            .filter(|(_, a)| *a)
            .map(|(r, _)| r.id.clone())
            .collect()
    }
}

/// Treatment of records whose QoI references an absent connection.
#[derive(Debug, Clone)]
pub enum MissingRecordPolicy {
    /// Drop the record from that structure's likelihood (recommended).
    Exclude,
    /// Keep every record: applicable ones score under a truncated normal
    /// supported on the record's bounds; inapplicable ones contribute the
    /// constant 1 / (b_u − b_l). Bounds are keyed by record id and must be
    /// identical across candidate structures.
    CompactSupport { bounds: BTreeMap<String, (f64, f64)> },
}

impl MissingRecordPolicy {
    /// Check bound coverage for every record that references at least one
    /// targeted connection.
    pub fn validate(&self, dataset: &Dataset, structure: &NetworkStructure) -> Result<(), DatasetError> {
        let MissingRecordPolicy::CompactSupport { bounds } = self else {
            return Ok(());
        };
        let targeted = structure.topology().targeted_connections();
        for r in dataset.records() {
            let mut edges = Vec::new();
            r.qoi.edge_references(&mut edges);
            let touches_targeted = edges.iter().any(|e| targeted.contains(e));
            if !touches_targeted {
                continue;
            }
            match bounds.get(&r.id) {
                None => return Err(DatasetError::MissingBounds { id: r.id.clone() }),
                Some(&(lo, hi)) if !(lo < hi) => {
                    return Err(DatasetError::BadBounds { id: r.id.clone(), lo, hi })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Model predictions for the applicable records, in dataset order.
/// Returns (record index, prediction) pairs; inapplicable records are
/// skipped.
pub fn predict_observables(
    structure: &NetworkStructure,
    params: &ParameterState,
    dataset: &Dataset,
) -> Result<Vec<(usize, f64)>, PredictError> {
    let solution = structure
        .solve_mass_flows(params)
        .map_err(|e| PredictError::Qoi { id: "<solve>".into(), source: e.into() })?;
    let mask = dataset.applicability(structure);
    let mut out = Vec::new();
    for (k, (record, applicable)) in dataset.records().iter().zip(mask).enumerate() {
        if !applicable {
            continue;
        }
        let g = record
            .qoi
            .evaluate_with(structure, params, &solution)
            .map_err(|e| PredictError::Qoi { id: record.id.clone(), source: e })?;
        out.push((k, g));
    }
    Ok(out)
}

/// Log-likelihood of the dataset under `structure` and `params`.
///
/// Impossible states (non-dissipative cycles, zero predictions against
/// positive observations, undefined ratios) return [`math::LOG_ZERO`]
/// rather than erroring, so samplers reject the proposal and move on.
///
/// One-shot convenience; repeated evaluation should go through
/// [`Evaluator`], which compiles the applicability mask and record plans
/// once.
pub fn log_likelihood(
    structure: &NetworkStructure,
    params: &ParameterState,
    dataset: &Dataset,
    policy: &MissingRecordPolicy,
) -> f64 {
    Evaluator::new(structure, dataset, policy).log_likelihood(structure, params)
}

/// QoI resolved against one structure: node/slot indices instead of map
/// lookups.
enum CompiledQoi {
    Node(usize),
    /// (source node, out-edge slot)
    Edge(usize, usize),
    Input(usize),
    Ratio(alloc::boxed::Box<CompiledQoi>, alloc::boxed::Box<CompiledQoi>),
    Sum(Vec<CompiledQoi>),
}

impl CompiledQoi {
    fn compile(qoi: &QoiSpec, structure: &NetworkStructure) -> Option<Self> {
        Some(match qoi {
            QoiSpec::NodalFlow(i) => CompiledQoi::Node(i.0),
            QoiSpec::ConnectionFlow(a, b) => {
                CompiledQoi::Edge(a.0, structure.edge_slot(*a, *b)?)
            }
            QoiSpec::ExternalInput(i) => {
                CompiledQoi::Input(structure.topology().input_index(*i)?)
            }
            QoiSpec::Ratio(num, den) => CompiledQoi::Ratio(
                alloc::boxed::Box::new(Self::compile(num, structure)?),
                alloc::boxed::Box::new(Self::compile(den, structure)?),
            ),
            QoiSpec::Sum(items) => CompiledQoi::Sum(
                items
                    .iter()
                    .map(|q| Self::compile(q, structure))
                    .collect::<Option<Vec<_>>>()?,
            ),
        })
    }

    /// NaN marks undefined ratios; callers map it to log-zero.
    fn eval(&self, x: &[f64], params: &ParameterState) -> f64 {
        match self {
            CompiledQoi::Node(i) => x[*i],
            CompiledQoi::Edge(i, slot) => params.allocation[*i][*slot] * x[*i],
            CompiledQoi::Input(slot) => params.inputs[*slot],
            CompiledQoi::Ratio(num, den) => {
                let d = den.eval(x, params);
                if d == 0.0 {
                    f64::NAN
                } else {
                    num.eval(x, params) / d
                }
            }
            CompiledQoi::Sum(items) => items.iter().map(|q| q.eval(x, params)).sum(),
        }
    }
}

enum RecordPlan {
    /// Inapplicable under exclude: contributes nothing.
    Skip,
    Normal { qoi: CompiledQoi, value: f64, sigma: f64 },
    Truncated { qoi: CompiledQoi, value: f64, sigma: f64, lo: f64, hi: f64 },
    /// Inapplicable under compact support: fixed density.
    Constant(f64),
    /// Inapplicable under compact support without bounds: impossible.
    Impossible,
}

/// Pre-resolved likelihood evaluation for one (structure, dataset, policy)
/// triple.
pub struct Evaluator {
    plans: Vec<RecordPlan>,
}

impl Evaluator {
    pub fn new(structure: &NetworkStructure, dataset: &Dataset, policy: &MissingRecordPolicy) -> Self {
        let plans = dataset
            .records()
            .iter()
            .map(|record| {
                let applicable = record.qoi.applicable_to(structure);
                match (applicable, policy) {
                    (true, MissingRecordPolicy::Exclude) => RecordPlan::Normal {
                        qoi: CompiledQoi::compile(&record.qoi, structure)
                            .expect("applicable QoI compiles"),
                        value: record.value,
                        sigma: record.sigma,
                    },
                    (false, MissingRecordPolicy::Exclude) => RecordPlan::Skip,
                    (true, MissingRecordPolicy::CompactSupport { bounds }) => {
                        let qoi = CompiledQoi::compile(&record.qoi, structure)
                            .expect("applicable QoI compiles");
                        match bounds.get(&record.id) {
                            Some(&(lo, hi)) => RecordPlan::Truncated {
                                qoi,
                                value: record.value,
                                sigma: record.sigma,
                                lo,
                                hi,
                            },
                            None => RecordPlan::Normal {
                                qoi,
                                value: record.value,
                                sigma: record.sigma,
                            },
                        }
                    }
                    (false, MissingRecordPolicy::CompactSupport { bounds }) => {
                        match bounds.get(&record.id) {
                            Some(&(lo, hi)) => RecordPlan::Constant(-math::ln(hi - lo)),
                            None => RecordPlan::Impossible,
                        }
                    }
                }
            })
            .collect();
        Self { plans }
    }

    /// Log-likelihood at `params`; impossible states give the log-zero
    /// sentinel.
    pub fn log_likelihood(&self, structure: &NetworkStructure, params: &ParameterState) -> f64 {
        let Ok(x) = structure.solve_throughputs(params) else {
            return math::LOG_ZERO;
        };
        let mut total = 0.0;
        for plan in &self.plans {
            let term = match plan {
                RecordPlan::Skip => 0.0,
                RecordPlan::Normal { qoi, value, sigma } => {
                    let g = qoi.eval(&x, params);
                    if g.is_nan() {
                        math::LOG_ZERO
                    } else {
                        relative_normal_log_term(*value, g, *sigma)
                    }
                }
                RecordPlan::Truncated { qoi, value, sigma, lo, hi } => {
                    let g = qoi.eval(&x, params);
                    if g.is_nan() {
                        math::LOG_ZERO
                    } else {
                        truncated_log_term(*value, g, *sigma, *lo, *hi)
                    }
                }
                RecordPlan::Constant(c) => *c,
                RecordPlan::Impossible => math::LOG_ZERO,
            };
            if term == math::LOG_ZERO {
                return math::LOG_ZERO;
            }
            total += term;
        }
        total
    }
}

/// One record's log term: log N(y/G − 1; 0, σ²). A non-positive prediction
/// cannot explain a positive observation.
fn relative_normal_log_term(y: f64, g: f64, sigma: f64) -> f64 {
    if g <= 0.0 {
        return math::LOG_ZERO;
    }
    math::normal_log_pdf(y / g - 1.0, 0.0, sigma)
}

/// Truncated-normal variant over observation bounds [lo, hi]; used by the
/// compact-support policy so the record's density integrates to one on the
/// same support in every structure.
fn truncated_log_term(y: f64, g: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if g <= 0.0 {
        return math::LOG_ZERO;
    }
    if y < lo || y > hi {
        return math::LOG_ZERO;
    }
    let z_hi = (hi / g - 1.0) / sigma;
    let z_lo = (lo / g - 1.0) / sigma;
    let mass = math::normal_cdf(z_hi) - math::normal_cdf(z_lo);
    if mass <= 0.0 {
        return math::LOG_ZERO;
    }
    math::normal_log_pdf(y / g - 1.0, 0.0, sigma) - math::ln(mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NodeClass, NodeId, NodeInfo, StructureCode, Topology};
    use alloc::sync::Arc;
    use alloc::vec;

    fn node(key: &str, class: NodeClass) -> NodeInfo {
        NodeInfo { key: key.into(), name: key.into(), class }
    }

    /// a -> b baseline; a -> c targeted.
    fn fork() -> Arc<Topology> {
        Topology::new(
            vec![
                node("a", NodeClass::Process),
                node("b", NodeClass::TerminalConsumption),
                node("c", NodeClass::TerminalConsumption),
            ],
            vec![(NodeId(0), NodeId(1))],
            vec![(NodeId(0), NodeId(2))],
            vec![NodeId(0)],
        )
        .unwrap()
    }

    fn record(id: &str, kind: RecordKind, qoi: QoiSpec, value: f64, sigma: f64) -> DataRecord {
        DataRecord { id: id.into(), kind, qoi, value, sigma, source: "test".into() }
    }

    fn params_full() -> ParameterState {
        ParameterState { allocation: vec![vec![0.6, 0.4], vec![], vec![]], inputs: vec![1.0] }
    }

    fn params_base() -> ParameterState {
        ParameterState { allocation: vec![vec![1.0], vec![], vec![]], inputs: vec![1.0] }
    }

    #[test]
    fn zero_residuals_give_normalizer_sum() {
        let topo = fork();
        let s = topo.structure(StructureCode::all_present(1)).unwrap();
        let params = params_full();
        let dataset = Dataset::new(vec![
            record("q_a", RecordKind::ExternalInput, QoiSpec::ExternalInput(NodeId(0)), 1.0, 0.1),
            record("z_ab", RecordKind::Flow, QoiSpec::ConnectionFlow(NodeId(0), NodeId(1)), 0.6, 0.1),
        ])
        .unwrap();
        let ll = log_likelihood(&s, &params, &dataset, &MissingRecordPolicy::Exclude);
        let expected = 2.0 * math::ln(1.0 / (math::SQRT_2PI * 0.1));
        assert!(math::abs(ll - expected) < 1e-12, "{ll} vs {expected}");
    }

    #[test]
    fn single_unit_residual() {
        let topo = fork();
        let s = topo.structure(StructureCode::all_absent(1)).unwrap();
        let dataset = Dataset::new(vec![record(
            "x_b",
            RecordKind::Flow,
            QoiSpec::NodalFlow(NodeId(1)),
            1.1,
            0.1,
        )])
        .unwrap();
        // y/G - 1 = 0.1, so the z-score is exactly 1.
        let ll = log_likelihood(&s, &params_base(), &dataset, &MissingRecordPolicy::Exclude);
        let expected = math::ln(1.0 / (math::SQRT_2PI * 0.1)) - 0.5;
        assert!(math::abs(ll - expected) < 1e-12);
    }

    #[test]
    fn exclusion_matches_deletion() {
        let topo = fork();
        let s = topo.structure(StructureCode::all_absent(1)).unwrap();
        let on_targeted =
            record("z_ac", RecordKind::Flow, QoiSpec::ConnectionFlow(NodeId(0), NodeId(2)), 0.4, 0.1);
        let ordinary =
            record("x_b", RecordKind::Flow, QoiSpec::NodalFlow(NodeId(1)), 1.0, 0.1);

        let with = Dataset::new(vec![ordinary.clone(), on_targeted]).unwrap();
        let without = Dataset::new(vec![ordinary]).unwrap();
        assert!(!with.applicability(&s)[1]);
        let p = params_base();
        let a = log_likelihood(&s, &p, &with, &MissingRecordPolicy::Exclude);
        let b = log_likelihood(&s, &p, &without, &MissingRecordPolicy::Exclude);
        assert_eq!(a, b);
    }

    #[test]
    fn predictions_skip_inapplicable_records() {
        let topo = fork();
        let s = topo.structure(StructureCode::all_absent(1)).unwrap();
        let dataset = Dataset::new(vec![
            record("z_ac", RecordKind::Flow, QoiSpec::ConnectionFlow(NodeId(0), NodeId(2)), 0.4, 0.1),
            record("x_b", RecordKind::Flow, QoiSpec::NodalFlow(NodeId(1)), 1.0, 0.1),
        ])
        .unwrap();
        let preds = predict_observables(&s, &params_base(), &dataset).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].0, 1);
        assert!(math::abs(preds[0].1 - 1.0) < 1e-12);
        assert_eq!(dataset.applicable_ids(&s), vec![String::from("x_b")]);
    }

    #[test]
    fn compact_support_constant_for_inapplicable() {
        let topo = fork();
        let absent = topo.structure(StructureCode::all_absent(1)).unwrap();
        let present = topo.structure(StructureCode::all_present(1)).unwrap();
        let mut bounds = BTreeMap::new();
        bounds.insert(String::from("z_ac"), (0.0, 2.0));
        let policy = MissingRecordPolicy::CompactSupport { bounds };
        let dataset = Dataset::new(vec![record(
            "z_ac",
            RecordKind::Flow,
            QoiSpec::ConnectionFlow(NodeId(0), NodeId(2)),
            0.4,
            0.1,
        )])
        .unwrap();
        policy.validate(&dataset, &absent).unwrap();

        // Inapplicable: the contribution is ln(1/(b_u - b_l)) whatever θ is.
        let l1 = log_likelihood(&absent, &params_base(), &dataset, &policy);
        let mut other = params_base();
        other.inputs[0] = 3.0;
        let l2 = log_likelihood(&absent, &other, &dataset, &policy);
        assert_eq!(l1, l2);
        assert!(math::abs(l1 - -math::ln(2.0)) < 1e-12);

        // Applicable: truncated-normal term = plain term minus log mass.
        let p = params_full();
        let l = log_likelihood(&present, &p, &dataset, &policy);
        let g = 0.4;
        let mass = math::normal_cdf((2.0 / g - 1.0) / 0.1) - math::normal_cdf((0.0 / g - 1.0) / 0.1);
        let expected = math::normal_log_pdf(0.4 / g - 1.0, 0.0, 0.1) - math::ln(mass);
        assert!(math::abs(l - expected) < 1e-12);
    }

    #[test]
    fn missing_bounds_detected() {
        let topo = fork();
        let s = topo.structure(StructureCode::all_absent(1)).unwrap();
        let dataset = Dataset::new(vec![record(
            "z_ac",
            RecordKind::Flow,
            QoiSpec::ConnectionFlow(NodeId(0), NodeId(2)),
            0.4,
            0.1,
        )])
        .unwrap();
        let policy = MissingRecordPolicy::CompactSupport { bounds: BTreeMap::new() };
        assert!(matches!(
            policy.validate(&dataset, &s),
            Err(DatasetError::MissingBounds { .. })
        ));
    }

    #[test]
    fn worse_fit_scores_lower() {
        let topo = fork();
        let s = topo.structure(StructureCode::all_absent(1)).unwrap();
        let p = params_base();
        let ll_at = |y: f64| {
            let d = Dataset::new(vec![record(
                "x_b",
                RecordKind::Flow,
                QoiSpec::NodalFlow(NodeId(1)),
                y,
                0.1,
            )])
            .unwrap();
            log_likelihood(&s, &p, &d, &MissingRecordPolicy::Exclude)
        };
        // |y/G - 1| grows along this sequence; log-likelihood strictly falls.
        let seq = [1.0, 1.05, 1.1, 1.3, 1.8];
        for w in seq.windows(2) {
            assert!(ll_at(w[0]) > ll_at(w[1]));
        }
    }

    #[test]
    fn zero_prediction_is_log_zero_not_panic() {
        let topo = Topology::new(
            vec![
                node("a", NodeClass::Process),
                node("b", NodeClass::TerminalConsumption),
                node("c", NodeClass::TerminalConsumption),
            ],
            vec![(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2))],
            vec![],
            vec![NodeId(0)],
        )
        .unwrap();
        let s = topo.structure(StructureCode::all_absent(0)).unwrap();
        // All mass to b; the record on a->c sees G = 0.
        let p = ParameterState { allocation: vec![vec![1.0, 0.0], vec![], vec![]], inputs: vec![1.0] };
        let d = Dataset::new(vec![record(
            "z_ac",
            RecordKind::Flow,
            QoiSpec::ConnectionFlow(NodeId(0), NodeId(2)),
            0.5,
            0.1,
        )])
        .unwrap();
        assert_eq!(log_likelihood(&s, &p, &d, &MissingRecordPolicy::Exclude), math::LOG_ZERO);
    }

    #[test]
    fn sigma_doubling_behavior() {
        // At the matching point the term is -ln(sqrt(2*pi)*sigma) exactly; for
        // residuals at least 2 sigma out, doubling sigma raises the term.
        let t = |y: f64, sigma: f64| relative_normal_log_term(y, 1.0, sigma);
        assert!(math::abs(t(1.0, 0.1) - math::ln(1.0 / (math::SQRT_2PI * 0.1))) < 1e-12);
        assert!(t(1.25, 0.2) > t(1.25, 0.1));
        assert!(t(1.5, 0.2) > t(1.5, 0.1));
    }

    #[test]
    fn dataset_validation() {
        let bad_ratio = Dataset::new(vec![record(
            "r",
            RecordKind::Ratio,
            QoiSpec::NodalFlow(NodeId(0)),
            1.5,
            0.1,
        )]);
        assert!(matches!(bad_ratio, Err(DatasetError::InvalidRecord { .. })));
        let bad_sigma = Dataset::new(vec![record(
            "s",
            RecordKind::Flow,
            QoiSpec::NodalFlow(NodeId(0)),
            1.0,
            0.0,
        )]);
        assert!(matches!(bad_sigma, Err(DatasetError::InvalidRecord { .. })));
    }
}
