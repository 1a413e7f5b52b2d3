//! Adaptively tempered sequential Monte Carlo over one structure's
//! parameter space.
//!
//! The sampler moves a particle population through π_β ∝ prior · likelihood^β
//! from β = 0 to β = 1. Each stage: pick the next β by bisection so the
//! effective sample size of the incremental weights hits the configured
//! fraction, reweight, systematically resample, then run a few
//! random-walk Metropolis steps per particle in unconstrained coordinates
//! with the proposal covariance adapted from the ensemble. Because the
//! population is resampled to uniform weights at every stage, the marginal
//! likelihood estimate is the running product of mean incremental weights.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::likelihood::{Dataset, Evaluator, MissingRecordPolicy};
use crate::linalg::{cholesky, Matrix};
use crate::math;
use crate::network::{NetworkStructure, ParameterState};
use crate::priors::RestrictedPrior;
use crate::sample;
use crate::transform::ParamLayout;

#[derive(Debug, Clone)]
pub struct SmcConfig {
    /// Particle count N.
    pub particles: usize,
    /// Target effective-sample-size fraction for the adaptive β search.
    pub ess_target: f64,
    /// Full-covariance random-walk Metropolis steps per particle per stage.
    pub mutation_steps: usize,
    /// Per-node blocked Metropolis sweeps per particle per stage. The
    /// global walk mixes correlated directions; the blocked sweeps chase
    /// sharp single-node features (tiny allocation fractions pinned by
    /// small-valued records) that a joint proposal cannot reach.
    pub block_sweeps: usize,
    /// Independence-Metropolis steps per particle per stage, proposing from
    /// a Gaussian fitted to the current ensemble. Long-range moves that
    /// relocate particles stuck on flat stretches of the tempered target.
    pub independent_steps: usize,
    /// Hard cap on tempering stages before declaring non-convergence.
    pub max_stages: usize,
    /// Master seed; the per-structure stream is derived from this and the
    /// structure code.
    pub seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            particles: 2000,
            ess_target: 0.5,
            mutation_steps: 15,
            block_sweeps: 1,
            independent_steps: 3,
            max_stages: 200,
            seed: 0,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<(), SmcError> {
        if self.particles < 100 {
            return Err(SmcError::BadConfig("particle count must be at least 100".into()));
        }
        if !(self.ess_target > 0.0 && self.ess_target < 1.0) {
            return Err(SmcError::BadConfig("ess_target must lie in (0, 1)".into()));
        }
        if self.mutation_steps < 1 {
            return Err(SmcError::BadConfig("mutation_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmcError {
    #[error("invalid SMC configuration: {0}")]
    BadConfig(String),
    #[error("all particles have log-zero likelihood; the model cannot explain the data")]
    DegeneratePosterior,
    #[error("tempering did not reach beta = 1 within {stages} stages (reached beta = {beta})")]
    NonConvergence { stages: usize, beta: f64 },
    #[error("prior error: {0}")]
    Prior(String),
}

/// Per-stage diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageDiagnostics {
    pub beta: f64,
    /// ESS of the incremental weights that selected this β.
    pub ess: f64,
    /// Mean Metropolis acceptance rate across particles and steps.
    pub acceptance: f64,
}

/// Weighted posterior particles for one structure plus the evidence
/// estimate and tempering metadata.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub particles: Vec<ParameterState>,
    /// Unconstrained mirror of `particles`.
    pub unconstrained: Vec<Vec<f64>>,
    /// Normalized weights (uniform after the final resample).
    pub weights: Vec<f64>,
    /// 0 = β_0 < … < β_T = 1.
    pub beta_schedule: Vec<f64>,
    /// Estimate of log p(y | M).
    pub log_evidence: f64,
    pub stages: Vec<StageDiagnostics>,
    /// Per-particle log-likelihood at β = 1.
    pub log_likelihoods: Vec<f64>,
}

impl ParticleEnsemble {
    /// Acceptance rates outside [0.05, 0.95] indicate a poorly scaled
    /// mutation kernel; surfaced for diagnostics rather than failing the run.
    pub fn flagged_stages(&self) -> Vec<usize> {
        self.stages
            .iter()
            .enumerate()
            .filter(|(_, s)| s.acceptance < 0.05 || s.acceptance > 0.95)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Effective sample size 1 / Σ w_i² of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq == 0.0 {
        0.0
    } else {
        1.0 / sum_sq
    }
}

/// ESS of the incremental weights exp(Δβ·ℓ_i) without materializing them.
fn incremental_ess(loglik: &[f64], delta: f64) -> f64 {
    let max = loglik.iter().copied().fold(math::LOG_ZERO, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &l in loglik {
        let w = if l == math::LOG_ZERO { 0.0 } else { math::exp(delta * (l - max)) };
        sum += w;
        sum_sq += w * w;
    }
    if sum_sq == 0.0 {
        0.0
    } else {
        sum * sum / sum_sq
    }
}

/// Coordinate blocks of the unconstrained space: one block per multi-edge
/// node's stick coordinates, one per external-input coordinate.
fn coordinate_blocks(layout: &ParamLayout) -> Vec<Vec<usize>> {
    let mut blocks = Vec::new();
    let mut pos = 0;
    for &(_, deg) in layout.blocks() {
        blocks.push((pos..pos + deg - 1).collect());
        pos += deg - 1;
    }
    while pos < layout.dim() {
        blocks.push(vec![pos]);
        pos += 1;
    }
    blocks
}

/// Systematic resampling: N evenly spaced points with one common random
/// offset swept across the cumulative weights.
fn systematic_resample<R: RngCore + ?Sized>(rng: &mut R, weights: &[f64]) -> Vec<usize> {
    let n = weights.len();
    let offset = sample::uniform_01(rng) % 1.0;
    let mut ancestors = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0usize;
    for k in 0..n {
        let point = (k as f64 + offset) / n as f64;
        while point > cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        ancestors.push(j);
    }
    ancestors
}

struct Particle {
    u: Vec<f64>,
    params: ParameterState,
    /// log prior density + transform log-Jacobian (β-independent part).
    log_prior_jac: f64,
    /// Data log-likelihood at β = 1.
    log_lik: f64,
}

/// Run the tempered SMC sampler. Deterministic for a fixed
/// (seed, structure code, config): reruns produce bit-identical ensembles.
pub fn run_smc(
    prior: &RestrictedPrior,
    dataset: &Dataset,
    structure: &NetworkStructure,
    policy: &MissingRecordPolicy,
    config: &SmcConfig,
) -> Result<ParticleEnsemble, SmcError> {
    config.validate()?;
    let n = config.particles;
    let layout = ParamLayout::for_structure(structure);
    let dim = layout.dim();
    let evaluator = Evaluator::new(structure, dataset, policy);

    let structure_seed = sample::derive_seed(config.seed, &structure.code().to_string());
    // Stream 0: prior initialization; stream 1: stage-level draws
    // (resampling offsets); streams 2..2+N: per-particle mutation.
    let mut init_rng = sample::stream_rng(structure_seed, 0);
    let mut stage_rng = sample::stream_rng(structure_seed, 1);
    let mut particle_rngs: Vec<_> =
        (0..n).map(|p| sample::stream_rng(structure_seed, 2 + p as u64)).collect();

    let mut particles: Vec<Particle> = (0..n)
        .map(|_| {
            let params = prior.sample(&mut init_rng);
            let u = layout.unconstrain(&params).expect("prior draws stay interior");
            let (params, log_jac) = layout.constrain(structure, &u).expect("round trip");
            let log_prior_jac = prior.log_density(&params) + log_jac;
            let log_lik = evaluator.log_likelihood(structure, &params);
            Particle { u, params, log_prior_jac, log_lik }
        })
        .collect();

    let mut beta = 0.0;
    let mut log_evidence = 0.0;
    let mut beta_schedule = vec![0.0];
    let mut stages = Vec::new();
    // Per-block proposal scales, adapted across stages toward a healthy
    // acceptance rate (Robbins-Monro on the log scale). The ensemble
    // covariance alone mis-scales blocks while the population is still in
    // transit toward sharp posterior features.
    let mut block_scales: Vec<f64> = Vec::new();
    let mut stage_index = 0usize;

    for _stage in 0..config.max_stages {
        let loglik: Vec<f64> = particles.iter().map(|p| p.log_lik).collect();
        let finite = loglik.iter().filter(|l| l.is_finite()).count();
        if finite == 0 {
            return Err(SmcError::DegeneratePosterior);
        }
        // When part of the population is at log-zero, the reachable ESS is
        // capped by the finite count; aim at the same fraction of it.
        let target = config.ess_target * (finite.min(n) as f64);

        let remaining = 1.0 - beta;
        let delta = if incremental_ess(&loglik, remaining) >= target {
            remaining
        } else {
            let (mut lo, mut hi) = (0.0, remaining);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if incremental_ess(&loglik, mid) >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo.max(remaining * 1e-12)
        };
        let beta_new = if (beta + delta - 1.0).abs() < 1e-12 { 1.0 } else { beta + delta };

        // Evidence increment: log mean of exp(Δβ·ℓ) over the (uniform)
        // population.
        let max = loglik.iter().copied().fold(math::LOG_ZERO, f64::max);
        let mut weights: Vec<f64> = loglik
            .iter()
            .map(|&l| if l == math::LOG_ZERO { 0.0 } else { math::exp(delta * (l - max)) })
            .collect();
        let wsum: f64 = weights.iter().sum();
        log_evidence += delta * max + math::ln(wsum / n as f64);
        for w in weights.iter_mut() {
            *w /= wsum;
        }
        let ess = effective_sample_size(&weights);

        // Resample to uniform weights.
        let ancestors = systematic_resample(&mut stage_rng, &weights);
        particles = ancestors
            .iter()
            .map(|&a| Particle {
                u: particles[a].u.clone(),
                params: particles[a].params.clone(),
                log_prior_jac: particles[a].log_prior_jac,
                log_lik: particles[a].log_lik,
            })
            .collect();

        // Ensemble covariance (unscaled), shared by both proposal kinds.
        let cov = {
            let mut mean = vec![0.0; dim];
            for p in &particles {
                for (m, &v) in mean.iter_mut().zip(&p.u) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= n as f64;
            }
            let mut cov = Matrix::zeros(dim, dim);
            for p in &particles {
                for i in 0..dim {
                    let di = p.u[i] - mean[i];
                    for j in 0..=i {
                        cov[(i, j)] += di * (p.u[j] - mean[j]);
                    }
                }
            }
            for i in 0..dim {
                for j in 0..=i {
                    let v = cov[(i, j)] / n as f64;
                    cov[(i, j)] = v;
                    cov[(j, i)] = v;
                }
            }
            cov
        };
        // Independence proposal: Gaussian fitted to the ensemble (slightly
        // widened), with the triangular factor kept for density evaluation.
        let (imh_mean, imh_chol) = {
            let mut mean = vec![0.0; dim];
            for p in &particles {
                for (m, &v) in mean.iter_mut().zip(&p.u) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= n as f64;
            }
            let mut widened = cov.clone();
            for i in 0..dim {
                for j in 0..dim {
                    widened[(i, j)] *= 1.21;
                }
                widened[(i, i)] += 1e-6;
            }
            (mean, cholesky(&widened).expect("widened covariance is positive definite"))
        };

        // Global proposal: 2.38²/d × ensemble covariance + 1e-6·I.
        let chol = {
            let mut scaled = cov.clone();
            let scale = 2.38 * 2.38 / dim.max(1) as f64;
            for i in 0..dim {
                for j in 0..dim {
                    scaled[(i, j)] *= scale;
                }
                scaled[(i, i)] += 1e-6;
            }
            cholesky(&scaled).expect("regularized covariance is positive definite")
        };
        // Blocked proposals: per-block marginal covariance, 2.38²/d_b scaled.
        let blocks = coordinate_blocks(&layout);
        if block_scales.is_empty() {
            block_scales = vec![1.0; blocks.len()];
        }
        let block_chols: Vec<Matrix> = blocks
            .iter()
            .zip(&block_scales)
            .map(|(idx, &bscale)| {
                let d = idx.len();
                let mut sub = Matrix::zeros(d, d);
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        sub[(a, b)] = cov[(i, j)] * (2.38 * 2.38 / d as f64) * bscale * bscale;
                    }
                    sub[(a, a)] += 1e-6 * bscale * bscale;
                }
                cholesky(&sub).expect("regularized block covariance is positive definite")
            })
            .collect();

        // Mutate: full-covariance random-walk steps plus per-node blocked
        // sweeps, all Metropolis moves targeting π_{β_new} in u-space.
        let mut accepted = 0usize;
        let mut block_accepts: Vec<usize> = vec![0; blocks.len()];
        let block_moves: usize = config.block_sweeps * blocks.len();
        let total_proposals =
            n * (config.mutation_steps + block_moves + config.independent_steps);

        // Whitened log-density of the independence proposal (up to the
        // common normalizing constant, which cancels in the MH ratio).
        let imh_logq = |u: &[f64]| -> f64 {
            let mut y = vec![0.0; dim];
            for i in 0..dim {
                let mut acc = u[i] - imh_mean[i];
                for j in 0..i {
                    acc -= imh_chol[(i, j)] * y[j];
                }
                y[i] = acc / imh_chol[(i, i)];
            }
            -0.5 * y.iter().map(|v| v * v).sum::<f64>()
        };
        for (p, rng) in particles.iter_mut().zip(particle_rngs.iter_mut()) {
            let mut log_target = p.log_prior_jac
                + if p.log_lik == math::LOG_ZERO { math::LOG_ZERO } else { beta_new * p.log_lik };

            let try_move = |p: &mut Particle,
                                log_target: &mut f64,
                                rng: &mut rand_chacha::ChaCha8Rng,
                                proposal: Vec<f64>,
                                log_q_correction: f64|
             -> bool {
                let Ok((cand_params, cand_jac)) = layout.constrain(structure, &proposal) else {
                    let _ = sample::uniform_01(rng);
                    return false;
                };
                let cand_prior_jac = prior.log_density(&cand_params) + cand_jac;
                let cand_lik = if cand_prior_jac == math::LOG_ZERO {
                    math::LOG_ZERO
                } else {
                    evaluator.log_likelihood(structure, &cand_params)
                };
                let cand_target = if cand_prior_jac == math::LOG_ZERO || cand_lik == math::LOG_ZERO
                {
                    math::LOG_ZERO
                } else {
                    cand_prior_jac + beta_new * cand_lik
                };
                let accept_ln = cand_target - *log_target + log_q_correction;
                let u = sample::uniform_01(rng);
                if accept_ln.is_finite() && math::ln(u) < accept_ln {
                    p.u = proposal;
                    p.params = cand_params;
                    p.log_prior_jac = cand_prior_jac;
                    p.log_lik = cand_lik;
                    *log_target = cand_target;
                    true
                } else {
                    false
                }
            };

            for _ in 0..config.mutation_steps {
                let z: Vec<f64> = (0..dim).map(|_| sample::standard_normal(rng)).collect();
                let mut proposal = p.u.clone();
                for i in 0..dim {
                    let mut step = 0.0;
                    for j in 0..=i {
                        step += chol[(i, j)] * z[j];
                    }
                    proposal[i] += step;
                }
                if try_move(p, &mut log_target, rng, proposal, 0.0) {
                    accepted += 1;
                }
            }
            for _ in 0..config.independent_steps {
                let z: Vec<f64> = (0..dim).map(|_| sample::standard_normal(rng)).collect();
                let mut proposal = imh_mean.clone();
                for i in 0..dim {
                    let mut step = 0.0;
                    for j in 0..=i {
                        step += imh_chol[(i, j)] * z[j];
                    }
                    proposal[i] += step;
                }
                // Independence MH: correct for the asymmetric proposal.
                let q_new = -0.5 * z.iter().map(|v| v * v).sum::<f64>();
                let q_old = imh_logq(&p.u);
                if try_move(p, &mut log_target, rng, proposal, q_old - q_new) {
                    accepted += 1;
                }
            }
            for _ in 0..config.block_sweeps {
                for (bi, (idx, bchol)) in blocks.iter().zip(&block_chols).enumerate() {
                    let d = idx.len();
                    let z: Vec<f64> = (0..d).map(|_| sample::standard_normal(rng)).collect();
                    let mut proposal = p.u.clone();
                    for (a, &i) in idx.iter().enumerate() {
                        let mut step = 0.0;
                        for b in 0..=a {
                            step += bchol[(a, b)] * z[b];
                        }
                        proposal[i] += step;
                    }
                    if try_move(p, &mut log_target, rng, proposal, 0.0) {
                        accepted += 1;
                        block_accepts[bi] += 1;
                    }
                }
            }
        }

        // Robbins-Monro update of per-block scales toward 0.44 acceptance.
        if config.block_sweeps > 0 {
            stage_index += 1;
            let gain = 1.0 / math::sqrt((stage_index as f64).max(1.0));
            let trials = (n * config.block_sweeps) as f64;
            for (scale, &acc) in block_scales.iter_mut().zip(&block_accepts) {
                let rate = acc as f64 / trials;
                *scale *= math::exp(gain * (rate - 0.44));
                *scale = scale.clamp(1e-3, 1e3);
            }
        }

        beta = beta_new;
        beta_schedule.push(beta);
        stages.push(StageDiagnostics {
            beta,
            ess,
            acceptance: accepted as f64 / total_proposals as f64,
        });

        if beta >= 1.0 {
            let weights = vec![1.0 / n as f64; n];
            return Ok(ParticleEnsemble {
                unconstrained: particles.iter().map(|p| p.u.clone()).collect(),
                log_likelihoods: particles.iter().map(|p| p.log_lik).collect(),
                particles: particles.into_iter().map(|p| p.params).collect(),
                weights,
                beta_schedule,
                log_evidence,
                stages,
            });
        }
    }

    Err(SmcError::NonConvergence { stages: config.max_stages, beta })
}
