//! Risk-appetite decision metrics over per-option benefit distributions.
//!
//! Each option carries a weighted sample of benefits (kg CO2eq saved per kg
//! of demand reduction). Four metrics cover the usual risk appetites:
//! mean (expected benefit), inverse coefficient of variation (certainty),
//! 95th percentile (best case, "maximax") and 5th percentile (worst case,
//! "maximin").

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecisionError {
    #[error("benefit distribution for {option} has {got} samples; at least {min} are needed for stable quantiles")]
    TooFewSamples { option: String, got: usize, min: usize },
    #[error("no options to rank")]
    NoOptions,
}

/// Minimum sample count for quantile stability.
pub const MIN_SAMPLES: usize = 100;

/// Weighted benefit samples for one decision option.
#[derive(Debug, Clone)]
pub struct BenefitDistribution {
    pub option: String,
    /// (value, weight) pairs; weights are normalized at construction.
    samples: Vec<(f64, f64)>,
}

impl BenefitDistribution {
    pub fn new(option: impl Into<String>, mut samples: Vec<(f64, f64)>) -> Result<Self, DecisionError> {
        let option = option.into();
        if samples.len() < MIN_SAMPLES {
            return Err(DecisionError::TooFewSamples {
                option,
                got: samples.len(),
                min: MIN_SAMPLES,
            });
        }
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        for (_, w) in samples.iter_mut() {
            *w /= total;
        }
        Ok(Self { option, samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}

/// Weighted empirical quantile with linear interpolation: samples sit at
/// type-7-style positions on the weighted CDF (equal weights reproduce the
/// classic (i−1)/(n−1) rule exactly).
pub fn weighted_quantile(samples: &[(f64, f64)], p: f64) -> f64 {
    assert!(!samples.is_empty());
    assert!((0.0..=1.0).contains(&p), "quantile level must lie in [0, 1]");
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = sorted.iter().map(|(_, w)| w).sum();
    let last_w = sorted.last().unwrap().1 / total;
    let denom = 1.0 - last_w;
    if denom <= 0.0 {
        // Single effective sample.
        return sorted.last().unwrap().0;
    }
    let mut prev_pos = 0.0;
    let mut prev_val = sorted[0].0;
    let mut cumulative = 0.0;
    for (i, &(v, w)) in sorted.iter().enumerate() {
        cumulative += w / total;
        // Position of sample i: (c_i - w_i) / (1 - w_n).
        let pos = ((cumulative - w / total) / denom).min(1.0);
        if i == 0 {
            prev_pos = pos;
            prev_val = v;
            continue;
        }
        if p <= pos {
            if pos - prev_pos <= f64::EPSILON {
                return v;
            }
            let t = (p - prev_pos) / (pos - prev_pos);
            return prev_val + t * (v - prev_val);
        }
        prev_pos = pos;
        prev_val = v;
    }
    sorted.last().unwrap().0
}

/// Summary metrics for one option.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMetrics {
    pub mean: f64,
    /// mean / sd; `None` flags a degenerate (zero-spread) distribution,
    /// reported as +inf certainty.
    pub inv_cv: Option<f64>,
    pub p05: f64,
    pub p95: f64,
}

impl DecisionMetrics {
    pub fn inv_cv_value(&self) -> f64 {
        self.inv_cv.unwrap_or(f64::INFINITY)
    }
}

/// Compute weighted mean, inverse CV, and the 5th/95th percentiles.
pub fn decision_metrics(dist: &BenefitDistribution) -> DecisionMetrics {
    decision_metrics_at(dist, 0.05, 0.95)
}

/// Same, with configurable low/high percentile levels.
pub fn decision_metrics_at(dist: &BenefitDistribution, low: f64, high: f64) -> DecisionMetrics {
    let samples = &dist.samples;
    let mean: f64 = samples.iter().map(|(v, w)| v * w).sum();
    let var: f64 = samples.iter().map(|(v, w)| w * (v - mean) * (v - mean)).sum();
    let sd = math::sqrt(var.max(0.0));
    // Spread at round-off scale is a degenerate distribution, not a signal.
    let inv_cv = if sd > 1e-12 * math::abs(mean).max(1.0) { Some(mean / sd) } else { None };
    DecisionMetrics {
        mean,
        inv_cv,
        p05: weighted_quantile(samples, low),
        p95: weighted_quantile(samples, high),
    }
}

/// Which metric to rank by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mean,
    InverseCv,
    P05,
    P95,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Mean, Metric::InverseCv, Metric::P05, Metric::P95];

    pub fn of(&self, m: &DecisionMetrics) -> f64 {
        match self {
            Metric::Mean => m.mean,
            Metric::InverseCv => m.inv_cv_value(),
            Metric::P05 => m.p05,
            Metric::P95 => m.p95,
        }
    }
}

impl core::fmt::Display for Metric {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Metric::Mean => "Maximize expected savings",
            Metric::InverseCv => "Maximize certainty of savings",
            Metric::P05 => "Maximize low savings",
            Metric::P95 => "Maximize high savings",
        };
        f.write_str(s)
    }
}

/// Per-option metrics plus per-metric rankings.
#[derive(Debug, Clone)]
pub struct DecisionReport {
    pub options: Vec<(String, DecisionMetrics)>,
    /// Ties broken lexicographically are flagged here (metric, option names).
    pub ties: Vec<(Metric, Vec<String>)>,
}

impl DecisionReport {
    pub fn new(options: Vec<(String, DecisionMetrics)>) -> Result<Self, DecisionError> {
        if options.is_empty() {
            return Err(DecisionError::NoOptions);
        }
        Ok(Self { options, ties: Vec::new() })
    }

    /// Options in descending metric order; exact ties fall back to
    /// lexicographic option order and are flagged on the report.
    pub fn rank_options(&mut self, metric: Metric) -> Vec<String> {
        let mut scored: Vec<(String, f64)> = self
            .options
            .iter()
            .map(|(name, m)| (name.clone(), metric.of(m)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
        });
        let mut tied: Vec<String> = Vec::new();
        for pair in scored.windows(2) {
            if pair[0].1 == pair[1].1 {
                for (n, _) in pair {
                    if !tied.contains(n) {
                        tied.push(n.clone());
                    }
                }
            }
        }
        if !tied.is_empty() {
            self.ties.push((metric, tied));
        }
        scored.into_iter().map(|(n, _)| n).collect()
    }

    pub fn top_option(&mut self, metric: Metric) -> String {
        self.rank_options(metric).remove(0)
    }
}
