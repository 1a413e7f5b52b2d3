//! Posterior-mode probe: coordinate search on one structure's posterior
//! kernel, then a residual table of the worst-fitting records. Useful when
//! assembling or editing a dataset.
//!
//!     cargo run --release -p mfa-cli --example fit_report -- 0100 200000

use mfa_core::likelihood::{predict_observables, Evaluator};
use mfa_core::sample::{stream_rng, standard_normal, uniform_01};
use rand_core::RngCore;
use mfa_core::transform::ParamLayout;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = args.get(1).map(|s| s.as_str()).unwrap_or("0100");
    let iters: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200_000);
    let cfg = mfa_cli::config::load(std::path::Path::new("crates/cli/data/steel/config.toml")).unwrap();
    let structure = cfg.topology.structure(code.parse().unwrap()).unwrap();
    let prior = cfg.bundle.restrict_to_structure(&structure).unwrap();
    let layout = ParamLayout::for_structure(&structure);
    let eval = Evaluator::new(&structure, &cfg.dataset, &cfg.policy);
    let mut rng = stream_rng(7, 0);

    // Start at the prior mean-ish pointhen coordinate hill-climb in u-space.
    let p0 = prior.sample(&mut rng);
    let mut u = layout.unconstrain(&p0).unwrap();
    let dim = u.len();
    let ll_of = |u: &[f64]| -> f64 {
        let (params, log_jac) = layout.constrain(&structure, u).unwrap();
        prior.log_density(&params) + log_jac + eval.log_likelihood(&structure, &params)
    };
    let mut best = ll_of(&u);
    let mut scale = vec![1.0f64; dim];
    for it in 0..iters {
        let k = (rng.next_u64() as usize) % dim;
        let old = u[k];
        u[k] += scale[k] * standard_normal(&mut rng);
        let cand = ll_of(&u);
        if cand > best {
            best = cand;
            scale[k] *= 1.05;
        } else {
            u[k] = old;
            scale[k] *= 0.98;
            if scale[k] < 0.01 { scale[k] = 0.01; }
        }
        if it % 40000 == 0 { println!("iter {it}: ll {best:.2}"); }
    }
    println!("final log posterior kernel: {best:.2}");
    let (params, _) = layout.constrain(&structure, &u).unwrap();
    println!("pure log likelihood: {:.2}", eval.log_likelihood(&structure, &params));
    let (params, _) = layout.constrain(&structure, &u).unwrap();
    let preds = predict_observables(&structure, &params, &cfg.dataset).unwrap();
    let mut rows: Vec<(f64, String)> = Vec::new();
    for (k, g) in preds {
        let r = &cfg.dataset.records()[k];
        let z = (r.value / g - 1.0) / r.sigma;
        rows.push((z.abs(), format!("{:>6.2} sigma  y={:<8} G={:<10.3} {}", z, r.value, g, r.id)));
    }
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    println!("worst remaining records:");
    for (_, line) in rows.iter().take(12) { println!("{line}"); }
}
