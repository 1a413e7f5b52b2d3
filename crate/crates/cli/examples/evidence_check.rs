//! Evidence cross-check: Laplace approximation and self-normalized
//! importance sampling (multivariate-t proposal around the posterior mode)
//! for one structure of the bundled steel case. An independent reference
//! when judging SMC evidence quality; the importance-sampling ESS tells you
//! how seriously to take the number.
//!
//!     cargo run --release -p mfa-cli --example evidence_check -- 0100 200000

use mfa_core::likelihood::Evaluator;
use mfa_core::linalg::{cholesky, LuFactors, Matrix};
use mfa_core::math;
use mfa_core::sample::{standard_normal, stream_rng};
use mfa_core::transform::ParamLayout;
use rand_core::RngCore;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = args.get(1).map(|s| s.as_str()).unwrap_or("0100");
    let n_is: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200_000);
    let cfg = mfa_cli::config::load(std::path::Path::new("crates/cli/data/steel/config.toml")).unwrap();
    let structure = cfg.topology.structure(code.parse().unwrap()).unwrap();
    let prior = cfg.bundle.restrict_to_structure(&structure).unwrap();
    let layout = ParamLayout::for_structure(&structure);
    let eval = Evaluator::new(&structure, &cfg.dataset, &cfg.policy);
    let dim = layout.dim();

    let kernel = |u: &[f64]| -> f64 {
        let (params, log_jac) = layout.constrain(&structure, u).unwrap();
        let lp = prior.log_density(&params) + log_jac;
        if lp == math::LOG_ZERO { return math::LOG_ZERO; }
        let ll = eval.log_likelihood(&structure, &params);
        if ll == math::LOG_ZERO { math::LOG_ZERO } else { lp + ll }
    };

    // Mode search: coordinate random search with per-coordinate step decay.
    let mut rng = stream_rng(917, 0);
    let p0 = prior.sample(&mut rng);
    let mut u = layout.unconstrain(&p0).unwrap();
    let mut best = kernel(&u);
    let mut scale = vec![1.0f64; dim];
    for _ in 0..500_000 {
        let k = (rng.next_u64() as usize) % dim;
        let old = u[k];
        u[k] += scale[k] * standard_normal(&mut rng);
        let cand = kernel(&u);
        if cand > best { best = cand; scale[k] *= 1.05; }
        else { u[k] = old; scale[k] = (scale[k] * 0.985).max(0.003); }
    }
    eprintln!("mode kernel: {best:.3}");

    // Numerical Hessian (central differences).
    let h = 1e-4;
    let mut hess = Matrix::zeros(dim, dim);
    let f0 = kernel(&u);
    for i in 0..dim {
        for j in i..dim {
            let mut up = u.clone();
            let val = if i == j {
                up[i] = u[i] + h; let fpp = kernel(&up);
                up[i] = u[i] - h; let fmm = kernel(&up);
                (fpp - 2.0 * f0 + fmm) / (h * h)
            } else {
                up[i] = u[i] + h; up[j] = u[j] + h; let fpp = kernel(&up);
                up[j] = u[j] - h; let fpm = kernel(&up);
                up[i] = u[i] - h; up[j] = u[j] + h; let fmp = kernel(&up);
                up[j] = u[j] - h; let fmm = kernel(&up);
                (fpp - fpm - fmp + fmm) / (4.0 * h * h)
            };
            hess[(i, j)] = val;
            hess[(j, i)] = val;
        }
    }
    // Proposal covariance = 1.3^2 * (-H)^-1, regularized.
    let mut neg_h = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim { neg_h[(i, j)] = -hess[(i, j)]; }
    }
    for i in 0..dim { neg_h[(i, i)] += 1e-6; }
    let cov = match LuFactors::new(&neg_h) { Ok(lu) => lu.inverse(), Err(_) => { eprintln!("hessian singular"); return; } };
    let mut widened = cov.clone();
    for i in 0..dim {
        for j in 0..dim { widened[(i, j)] *= 1.69; }
        widened[(i, i)] += 1e-8;
    }
    let chol = match cholesky(&widened) { Ok(c) => c, Err(_) => { eprintln!("cov not PD"); return; } };
    // log det of proposal covariance via chol diag
    let mut logdet = 0.0;
    for i in 0..dim { logdet += 2.0 * math::ln(chol[(i, i)]); }

    // Pure Laplace approximation for reference (unwidened covariance).
    let laplace = {
        let mut ld = 0.0;
        let c = cholesky(&cov).unwrap();
        for i in 0..dim { ld += 2.0 * math::ln(c[(i, i)]); }
        f0 + 0.5 * dim as f64 * math::LN_2PI + 0.5 * ld
    };
    eprintln!("laplace approximation: {laplace:.3}");

    // Self-normalized IS from a multivariate t (nu = 5): heavy tails keep
    // the weights bounded where a Gaussian proposal collapses.
    let nu = 5.0f64;
    let mut rng = stream_rng(918, 0);
    let mut terms: Vec<f64> = Vec::with_capacity(n_is);
    for _ in 0..n_is {
        let z: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
        let g = mfa_core::sample::gamma(&mut rng, 0.5 * nu) / (0.5 * nu);
        let r = 1.0 / math::sqrt(g);
        let mut us = u.clone();
        for i in 0..dim {
            let mut step = 0.0;
            for j in 0..=i { step += chol[(i, j)] * z[j]; }
            us[i] += r * step;
        }
        let k = kernel(&us);
        if k == math::LOG_ZERO { terms.push(math::LOG_ZERO); continue; }
        let z2: f64 = z.iter().map(|v| v * v).sum();
        let d = dim as f64;
        // log density of the multivariate t at radius^2 = z'z * 1 (in the
        // whitened frame the draw is z/sqrt(g)): mahalanobis^2 = z2 / g.
        let maha2 = z2 / g;
        let logq = math::ln_gamma(0.5 * (nu + d))
            - math::ln_gamma(0.5 * nu)
            - 0.5 * d * math::ln(nu * core::f64::consts::PI)
            - 0.5 * logdet
            - 0.5 * (nu + d) * math::ln_1p(maha2 / nu);
        terms.push(k - logq);
    }
    let log_z = math::log_sum_exp(&terms) - math::ln(n_is as f64);
    // IS diagnostics: effective sample size of the weights.
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wsum: f64 = terms.iter().map(|&t| if t == math::LOG_ZERO {0.0} else {math::exp(t - max)}).sum();
    let wsum2: f64 = terms.iter().map(|&t| if t == math::LOG_ZERO {0.0} else {math::exp(2.0*(t - max))}).sum();
    let ess = wsum * wsum / wsum2;
    println!("{code}: gold log evidence = {log_z:.3} (IS ESS {ess:.0} of {n_is})");
}
