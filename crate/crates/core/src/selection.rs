//! Structure posteriors, pairwise posterior ratios on the Jeffreys scale,
//! and Bayesian model averaging of per-structure predictive samples.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::network::{NetworkStructure, QoiSpec};
use crate::smc::ParticleEnsemble;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error("structure priors sum to {0}, not 1")]
    PriorsNotNormalized(f64),
    #[error("duplicate structure code {0}")]
    DuplicateCode(String),
    #[error("structure code {0} not present in the table")]
    UnknownCode(String),
    #[error("every evidence is log-zero; no candidate structure explains the data")]
    NoExplainingModel,
    #[error("posterior ratio against {0} is undefined: its prior probability is 0")]
    ZeroPrior(String),
    #[error("structure {code} carries posterior {posterior} but no ensemble was supplied")]
    MissingEnsemble { code: String, posterior: f64 },
    #[error("no QoI samples to pool")]
    Empty,
}

/// One row per candidate: code, log evidence, prior probability.
#[derive(Debug, Clone)]
pub struct EvidenceRow {
    pub code: String,
    pub log_evidence: f64,
    pub prior: f64,
}

#[derive(Debug, Clone)]
pub struct EvidenceTable {
    rows: Vec<EvidenceRow>,
}

impl EvidenceTable {
    pub fn new(rows: Vec<EvidenceRow>) -> Result<Self, SelectionError> {
        let mut seen = BTreeMap::new();
        for row in &rows {
            if seen.insert(row.code.clone(), ()).is_some() {
                return Err(SelectionError::DuplicateCode(row.code.clone()));
            }
        }
        let total: f64 = rows.iter().map(|r| r.prior).sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(SelectionError::PriorsNotNormalized(total));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[EvidenceRow] {
        &self.rows
    }

    pub fn row(&self, code: &str) -> Result<&EvidenceRow, SelectionError> {
        self.rows
            .iter()
            .find(|r| r.code == code)
            .ok_or_else(|| SelectionError::UnknownCode(code.to_string()))
    }
}

/// Posterior probability per structure code.
#[derive(Debug, Clone)]
pub struct StructurePosterior {
    probabilities: BTreeMap<String, f64>,
}

impl StructurePosterior {
    /// Rebuild from persisted probabilities (e.g. a posterior table read
    /// back from disk).
    pub fn from_probabilities(probabilities: BTreeMap<String, f64>) -> Self {
        Self { probabilities }
    }

    pub fn probability(&self, code: &str) -> Option<f64> {
        self.probabilities.get(code).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probabilities.iter().map(|(c, &p)| (c.as_str(), p))
    }

    /// Code with the highest posterior probability.
    pub fn argmax(&self) -> (&str, f64) {
        self.probabilities
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(c, &p)| (c.as_str(), p))
            .expect("posterior is non-empty")
    }
}

/// p(M_m | y) ∝ p(y | M_m) · p(M_m), computed with log-sum-exp
/// stabilization.
pub fn structure_posterior(table: &EvidenceTable) -> Result<StructurePosterior, SelectionError> {
    let log_terms: Vec<f64> = table
        .rows
        .iter()
        .map(|r| {
            if r.prior <= 0.0 || r.log_evidence == math::LOG_ZERO {
                math::LOG_ZERO
            } else {
                r.log_evidence + math::ln(r.prior)
            }
        })
        .collect();
    let norm = math::log_sum_exp(&log_terms);
    if norm == math::LOG_ZERO {
        return Err(SelectionError::NoExplainingModel);
    }
    let probabilities = table
        .rows
        .iter()
        .zip(&log_terms)
        .map(|(r, &t)| {
            let p = if t == math::LOG_ZERO { 0.0 } else { math::exp(t - norm) };
            (r.code.clone(), p)
        })
        .collect();
    Ok(StructurePosterior { probabilities })
}

/// Jeffreys-scale interpretation bands for log10 of a posterior ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JeffreysLabel {
    NonSubstantial,
    Substantial,
    Strong,
    VeryStrong,
    Decisive,
}

impl JeffreysLabel {
    /// Band for |log10 PR|.
    pub fn from_log10(value: f64) -> Self {
        let v = math::abs(value);
        if v <= 0.5 {
            JeffreysLabel::NonSubstantial
        } else if v <= 1.0 {
            JeffreysLabel::Substantial
        } else if v <= 1.5 {
            JeffreysLabel::Strong
        } else if v <= 2.0 {
            JeffreysLabel::VeryStrong
        } else {
            JeffreysLabel::Decisive
        }
    }
}

impl core::fmt::Display for JeffreysLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            JeffreysLabel::NonSubstantial => "Non-substantial",
            JeffreysLabel::Substantial => "Substantial",
            JeffreysLabel::Strong => "Strong",
            JeffreysLabel::VeryStrong => "Very strong",
            JeffreysLabel::Decisive => "Decisive",
        };
        f.write_str(s)
    }
}

/// log10 PR_mn and its Jeffreys label. Negative values read as evidence in
/// favor of `n` (the reciprocal comparison); the label always describes the
/// magnitude.
pub fn posterior_ratio(
    table: &EvidenceTable,
    code_m: &str,
    code_n: &str,
) -> Result<(f64, JeffreysLabel), SelectionError> {
    let m = table.row(code_m)?;
    let n = table.row(code_n)?;
    if n.prior <= 0.0 {
        return Err(SelectionError::ZeroPrior(code_n.to_string()));
    }
    if m.prior <= 0.0 {
        return Err(SelectionError::ZeroPrior(code_m.to_string()));
    }
    if code_m == code_n {
        return Ok((0.0, JeffreysLabel::NonSubstantial));
    }
    // Difference of per-structure scores keeps antisymmetry exact:
    // PR_mn = -PR_nm bit for bit.
    let score = |r: &EvidenceRow| r.log_evidence / core::f64::consts::LN_10 + math::log10(r.prior);
    let value = score(m) - score(n);
    Ok((value, JeffreysLabel::from_log10(value)))
}

/// Weighted sample set for one QoI pooled across structures.
#[derive(Debug, Clone)]
pub struct PooledQoi {
    /// (value, pooled weight) pairs; weights sum to 1.
    pub samples: Vec<(f64, f64)>,
    pub mean: f64,
    pub sd: f64,
}

impl PooledQoi {
    fn from_samples(mut samples: Vec<(f64, f64)>) -> Self {
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        for (_, w) in samples.iter_mut() {
            *w /= total;
        }
        let mean: f64 = samples.iter().map(|(v, w)| v * w).sum();
        let var: f64 = samples.iter().map(|(v, w)| w * (v - mean) * (v - mean)).sum();
        Self { samples, mean, sd: math::sqrt(var.max(0.0)) }
    }

    /// Weighted quantile, type-7 style positions on the weighted CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        crate::decision::weighted_quantile(&self.samples, p)
    }
}

/// Bayesian-model-averaged posterior predictive for a list of QoIs.
#[derive(Debug, Clone)]
pub struct AveragedPredictive {
    pub qois: Vec<PooledQoi>,
    /// Structures excluded because their posterior fell below the pooling
    /// threshold (mass renormalized over the rest).
    pub dropped: Vec<String>,
}

/// Pool per-structure predictive samples with weight
/// (structure posterior) × (within-structure particle weight).
///
/// A QoI that references a connection absent from a structure contributes a
/// point mass at 0 from that structure: an absent connection carries no
/// flow. Structures with posterior below `threshold` are dropped and the
/// remaining mass renormalized.
pub fn model_average(
    ensembles: &[(NetworkStructure, ParticleEnsemble)],
    posterior: &StructurePosterior,
    qoi_list: &[QoiSpec],
    threshold: f64,
) -> Result<AveragedPredictive, SelectionError> {
    if qoi_list.is_empty() {
        return Err(SelectionError::Empty);
    }
    // Every structure above threshold must have an ensemble.
    for (code, p) in posterior.iter() {
        if p >= threshold && !ensembles.iter().any(|(s, _)| s.code().to_string() == code) {
            return Err(SelectionError::MissingEnsemble { code: code.to_string(), posterior: p });
        }
    }

    let mut kept: Vec<(&NetworkStructure, &ParticleEnsemble, f64)> = Vec::new();
    let mut dropped = Vec::new();
    for (structure, ensemble) in ensembles {
        let code = structure.code().to_string();
        let p = posterior.probability(&code).unwrap_or(0.0);
        if p < threshold {
            dropped.push(code);
        } else {
            kept.push((structure, ensemble, p));
        }
    }
    if kept.is_empty() {
        return Err(SelectionError::Empty);
    }
    let mass: f64 = kept.iter().map(|(_, _, p)| p).sum();

    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); qoi_list.len()];
    for &(structure, ensemble, p) in &kept {
        let weight_scale = p / mass;
        let applicable: Vec<bool> =
            qoi_list.iter().map(|q| q.applicable_to(structure)).collect();
        // One mass-balance solve per particle covers every QoI.
        for (params, &w) in ensemble.particles.iter().zip(&ensemble.weights) {
            let solution = structure
                .solve_mass_flows(params)
                .expect("posterior particles solve");
            for (qi, qoi) in qoi_list.iter().enumerate() {
                if applicable[qi] {
                    let value = qoi
                        .evaluate_with(structure, params, &solution)
                        .expect("applicable QoI evaluates");
                    samples[qi].push((value, weight_scale * w));
                }
            }
        }
        // A QoI on an absent connection is a flow of zero in this structure.
        for (qi, ok) in applicable.iter().enumerate() {
            if !ok {
                samples[qi].push((0.0, weight_scale));
            }
        }
    }
    let qois = samples.into_iter().map(PooledQoi::from_samples).collect();
    Ok(AveragedPredictive { qois, dropped })
}

/// Pool already-evaluated per-structure sample sets (value, weight) with
/// posterior weights; used when callers evaluate QoIs in bulk.
pub fn pool_samples(
    per_structure: &[(String, Vec<(f64, f64)>)],
    posterior: &StructurePosterior,
    threshold: f64,
) -> Result<PooledQoi, SelectionError> {
    let mut kept_mass = 0.0;
    for (code, _) in per_structure {
        let p = posterior.probability(code).unwrap_or(0.0);
        if p >= threshold {
            kept_mass += p;
        }
    }
    if kept_mass <= 0.0 {
        return Err(SelectionError::Empty);
    }
    let mut samples = Vec::new();
    for (code, values) in per_structure {
        let p = posterior.probability(code).unwrap_or(0.0);
        if p < threshold {
            continue;
        }
        let scale = p / kept_mass;
        for &(v, w) in values {
            samples.push((v, scale * w));
        }
    }
    if samples.is_empty() {
        return Err(SelectionError::Empty);
    }
    Ok(PooledQoi::from_samples(samples))
}
