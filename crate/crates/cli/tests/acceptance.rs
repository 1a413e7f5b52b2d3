//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured numbers. The steel-case criteria share one pipeline run.
//!
//! 1. SMC evidence matches deterministic quadrature on five benchmark
//!    problems (±0.05 nats, 5 seeds each, under two minutes).
//! 2. Polynomial-degree selection picks the cubic on noisy cubic data in
//!    at least 9 of 10 seeds while degree 6 always wins training RMSE.
//! 3. Property suites: mass balance, simplex closure, prior and posterior
//!    normalization, ratio antisymmetry, evidence-shift invariance,
//!    attribution duality, rectified fixed points, attribution
//!    completeness, and perturbation invariance.
//! 4. Steel case: structure 0100 tops the posterior (>= 0.5) and every
//!    structure without the scrap-to-BOF connection is decisively rejected
//!    (log10 PR <= -2 against 0100).
//! 5. Steel case: model-averaged total emissions 153 +/- 15 Mt CO2eq mean,
//!    sd within 7.1 +/- 3.
//! 6. Steel case: top decision option per metric (maximin automotive,
//!    certainty Other, mean and maximax steel products).
//! 7. Determinism: reruns with one master seed are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use once_cell::sync::Lazy;

use mfa_cli::commands::{self, InferSelection};
use mfa_cli::config;
use mfa_core::likelihood::{log_likelihood, DataRecord, Dataset, MissingRecordPolicy, RecordKind};
use mfa_core::math;
use mfa_core::network::{NodeClass, NodeId, NodeInfo, ParameterState, QoiSpec, StructureCode, Topology};
use mfa_core::priors::{DirichletSpec, PriorBundle, TruncNormalSpec};
use mfa_core::sample;
use mfa_core::smc::{run_smc, SmcConfig};

fn steel_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/steel/config.toml")
}

/// Shared steel pipeline run (enumerate through decide) under the bundled
/// master seed.
static STEEL_RUN: Lazy<PathBuf> = Lazy::new(|| {
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("steel_acceptance");
    let _ = std::fs::remove_dir_all(&out);
    std::fs::create_dir_all(&out).unwrap();
    let mut cfg = config::load(&steel_config_path()).unwrap();
    cfg.out_dir = out.clone();
    commands::cmd_enumerate(&cfg).unwrap();
    commands::cmd_infer(&cfg, InferSelection::All, None).unwrap();
    commands::cmd_select(&cfg).unwrap();
    commands::cmd_average(&cfg).unwrap();
    commands::cmd_impact(&cfg).unwrap();
    commands::cmd_decide(&cfg).unwrap();
    out
});

// ---------------------------------------------------------------------
// Criterion 1: evidence oracle on low-dimensional benchmarks.
// ---------------------------------------------------------------------

struct Bench {
    name: &'static str,
    topology: Arc<Topology>,
    bundle: PriorBundle,
    dataset: Dataset,
    /// Deterministic quadrature of the evidence.
    oracle: f64,
}

fn node(key: &str, class: NodeClass) -> NodeInfo {
    NodeInfo { key: key.into(), name: key.into(), class }
}

/// hub -> {left, right} fork with one allocation simplex and one inflow.
fn fork(alpha: (f64, f64), q: (f64, f64)) -> (Arc<Topology>, PriorBundle) {
    let topo = Topology::new(
        vec![
            node("hub", NodeClass::Process),
            node("left", NodeClass::TerminalConsumption),
            node("right", NodeClass::TerminalConsumption),
        ],
        vec![(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2))],
        vec![],
        vec![NodeId(0)],
    )
    .unwrap();
    let bundle = PriorBundle::new(
        &topo,
        vec![DirichletSpec { node: NodeId(0), concentration: vec![alpha.0, alpha.1] }],
        vec![TruncNormalSpec { node: NodeId(0), mean: q.0, sd: q.1 }],
        vec![],
    )
    .unwrap();
    (topo, bundle)
}

/// chain a -> b with only the inflow uncertain.
fn chain(q: (f64, f64)) -> (Arc<Topology>, PriorBundle) {
    let topo = Topology::new(
        vec![node("a", NodeClass::Process), node("b", NodeClass::TerminalConsumption)],
        vec![(NodeId(0), NodeId(1))],
        vec![],
        vec![NodeId(0)],
    )
    .unwrap();
    let bundle = PriorBundle::new(
        &topo,
        vec![DirichletSpec { node: NodeId(0), concentration: vec![1.0] }],
        vec![TruncNormalSpec { node: NodeId(0), mean: q.0, sd: q.1 }],
        vec![],
    )
    .unwrap();
    (topo, bundle)
}

fn ratio_record(y: f64, sigma: f64) -> DataRecord {
    DataRecord {
        id: format!("ratio:{y}"),
        kind: RecordKind::Ratio,
        qoi: QoiSpec::Ratio(
            Box::new(QoiSpec::ConnectionFlow(NodeId(0), NodeId(1))),
            Box::new(QoiSpec::NodalFlow(NodeId(0))),
        ),
        value: y,
        sigma,
        source: "bench".into(),
    }
}

fn flow_record(y: f64, sigma: f64) -> DataRecord {
    DataRecord {
        id: format!("flow:{y}"),
        kind: RecordKind::Flow,
        qoi: QoiSpec::ConnectionFlow(NodeId(0), NodeId(1)),
        value: y,
        sigma,
        source: "bench".into(),
    }
}

fn input_record(y: f64, sigma: f64) -> DataRecord {
    DataRecord {
        id: format!("input:{y}"),
        kind: RecordKind::ExternalInput,
        qoi: QoiSpec::ExternalInput(NodeId(0)),
        value: y,
        sigma,
        source: "bench".into(),
    }
}

/// Midpoint quadrature over (phi, q) for the fork problems; integrates the
/// same prior and likelihood the sampler sees, through an independent path.
fn fork_quadrature(
    topo: &Arc<Topology>,
    dataset: &Dataset,
    alpha: (f64, f64),
    q: (f64, f64),
    grid: usize,
) -> f64 {
    let structure = topo.structure(StructureCode::all_absent(0)).unwrap();
    let q_hi = q.0 + 12.0 * q.1;
    let h_phi = 1.0 / grid as f64;
    let h_q = q_hi / grid as f64;
    let mut total = 0.0;
    for i in 0..grid {
        let phi = (i as f64 + 0.5) * h_phi;
        let prior_phi =
            math::exp(sample::dirichlet_log_pdf(&[phi, 1.0 - phi], &[alpha.0, alpha.1]));
        for j in 0..grid {
            let qv = (j as f64 + 0.5) * h_q;
            let prior_q = math::exp(sample::truncated_normal_log_pdf(qv, q.0, q.1));
            let params = ParameterState {
                allocation: vec![vec![phi, 1.0 - phi], vec![], vec![]],
                inputs: vec![qv],
            };
            let like = math::exp(log_likelihood(
                &structure,
                &params,
                dataset,
                &MissingRecordPolicy::Exclude,
            ));
            total += prior_phi * prior_q * like * h_phi * h_q;
        }
    }
    math::ln(total)
}

fn chain_quadrature(topo: &Arc<Topology>, dataset: &Dataset, q: (f64, f64), grid: usize) -> f64 {
    let structure = topo.structure(StructureCode::all_absent(0)).unwrap();
    let q_hi = q.0 + 12.0 * q.1;
    let h = q_hi / grid as f64;
    let mut total = 0.0;
    for j in 0..grid {
        let qv = (j as f64 + 0.5) * h;
        let prior_q = math::exp(sample::truncated_normal_log_pdf(qv, q.0, q.1));
        let params = ParameterState { allocation: vec![vec![1.0], vec![]], inputs: vec![qv] };
        let like = math::exp(log_likelihood(
            &structure,
            &params,
            dataset,
            &MissingRecordPolicy::Exclude,
        ));
        total += prior_q * like * h;
    }
    math::ln(total)
}

fn benchmarks() -> Vec<Bench> {
    let mut out = Vec::new();

    // 1. Uniform allocation, one scale-free ratio record.
    let (topo, bundle) = fork((1.0, 1.0), (1.0, 0.5));
    let dataset = Dataset::new(vec![ratio_record(0.6, 0.1)]).unwrap();
    let oracle = fork_quadrature(&topo, &dataset, (1.0, 1.0), (1.0, 0.5), 2000);
    out.push(Bench { name: "uniform ratio", topology: topo, bundle, dataset, oracle });

    // 2. Informative allocation, sharper ratio record.
    let (topo, bundle) = fork((3.0, 2.0), (1.0, 0.5));
    let dataset = Dataset::new(vec![ratio_record(0.35, 0.15)]).unwrap();
    let oracle = fork_quadrature(&topo, &dataset, (3.0, 2.0), (1.0, 0.5), 2000);
    out.push(Bench { name: "informative ratio", topology: topo, bundle, dataset, oracle });

    // 3. Flow plus inflow records: both parameters constrained.
    let (topo, bundle) = fork((2.0, 2.0), (1.0, 0.4));
    let dataset =
        Dataset::new(vec![flow_record(0.7, 0.1), input_record(1.0, 0.1)]).unwrap();
    let oracle = fork_quadrature(&topo, &dataset, (2.0, 2.0), (1.0, 0.4), 2000);
    out.push(Bench { name: "flow and inflow", topology: topo, bundle, dataset, oracle });

    // 4. Conflicting flow records on the same connection.
    let (topo, bundle) = fork((1.0, 1.0), (2.0, 0.8));
    let dataset =
        Dataset::new(vec![flow_record(1.2, 0.1), flow_record(0.9, 0.2)]).unwrap();
    let oracle = fork_quadrature(&topo, &dataset, (1.0, 1.0), (2.0, 0.8), 2000);
    out.push(Bench { name: "conflicting flows", topology: topo, bundle, dataset, oracle });

    // 5. Single-parameter chain: inflow against one flow record.
    let (topo, bundle) = chain((1.0, 0.5));
    let dataset = Dataset::new(vec![flow_record(1.2, 0.1)]).unwrap();
    let oracle = chain_quadrature(&topo, &dataset, (1.0, 0.5), 200_000);
    out.push(Bench { name: "single chain", topology: topo, bundle, dataset, oracle });

    out
}

#[test]
fn criterion_1_evidence_matches_quadrature() {
    let start = Instant::now();
    let seeds = [101u64, 102, 103, 104, 105];
    let mut worst: (f64, &str) = (0.0, "");
    for bench in benchmarks() {
        let structure = bench.topology.structure(StructureCode::all_absent(0)).unwrap();
        let prior = bench.bundle.restrict_to_structure(&structure).unwrap();
        let mut mean = 0.0;
        for &seed in &seeds {
            let cfg = SmcConfig { particles: 2000, seed, ..SmcConfig::default() };
            let ensemble = run_smc(
                &prior,
                &bench.dataset,
                &structure,
                &MissingRecordPolicy::Exclude,
                &cfg,
            )
            .unwrap();
            mean += ensemble.log_evidence;
        }
        mean /= seeds.len() as f64;
        let gap = math::abs(mean - bench.oracle);
        if gap > worst.0 {
            worst = (gap, bench.name);
        }
        assert!(
            gap <= 0.05,
            "benchmark {}: SMC {mean:.4} vs quadrature {:.4} (gap {gap:.4})",
            bench.name,
            bench.oracle
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "criterion 1 took {elapsed:?}, budget is 2 minutes");
    eprintln!(
        "ACCEPTANCE 1 evidence-oracle: PASS (worst gap {:.4} nats on {:?}; {elapsed:?} total)",
        worst.0, worst.1
    );
}

// ---------------------------------------------------------------------
// Criterion 2: polynomial-degree selection.
// ---------------------------------------------------------------------

#[test]
fn criterion_2_polynomial_selection() {
    let cubic = |x: f64| 2.0 + 1.5 * x - 2.0 * x * x + 4.0 * x * x * x;
    let rel_noise = 0.1;
    let n = 60;
    let mut cubic_wins = 0;
    for seed in 1..=10u64 {
        let mut rng = sample::stream_rng(seed, 0);
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| cubic(x) * (1.0 + rel_noise * sample::standard_normal(&mut rng)))
            .collect();
        let scale = math::sqrt(ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64);
        let rows = mfa_core::polyfit::degree_sweep(&xs, &ys, 1..=6, rel_noise * scale).unwrap();

        let rmse6 = rows.iter().find(|r| r.0 == 6).unwrap().2;
        for &(d, _, rmse) in &rows {
            if d != 6 {
                assert!(rmse6 < rmse, "seed {seed}: degree-6 RMSE must be strictly lowest");
            }
        }
        let best = rows.iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap().0;
        if best == 3 {
            cubic_wins += 1;
        }
    }
    assert!(cubic_wins >= 9, "cubic won the posterior in only {cubic_wins}/10 seeds");
    eprintln!("ACCEPTANCE 2 polynomial-selection: PASS (cubic wins {cubic_wins}/10, degree-6 RMSE always lowest)");
}

// ---------------------------------------------------------------------
// Criterion 3: property suites.
// ---------------------------------------------------------------------

#[test]
fn criterion_3_property_suites() {
    use mfa_core::impact::{
        consumption_demand, consumption_eii, io_matrices, rectified_eii, rectified_eii_all,
        rectified_system_impact, supply_driven_eii,
    };
    use rand_core::RngCore;

    let mut rng = sample::stream_rng(33_000, 0);

    // Random dissipative layered networks (same construction as the core
    // property suite, kept self-contained here).
    fn random_network(
        rng: &mut impl RngCore,
        allow_cycles: bool,
    ) -> (Arc<Topology>, ParameterState) {
        let n_process = 2 + (rng.next_u64() % 8) as usize;
        let n_terminal = 1 + (rng.next_u64() % 3) as usize;
        let n = n_process + n_terminal;
        let mut nodes = Vec::new();
        for i in 0..n_process {
            nodes.push(node(&format!("p{i}"), NodeClass::Process));
        }
        for i in 0..n_terminal {
            nodes.push(node(&format!("t{i}"), NodeClass::TerminalConsumption));
        }
        let mut edges = Vec::new();
        for i in 0..n_process {
            let forward = 1 + (rng.next_u64() % 3) as usize;
            let mut dests = Vec::new();
            for _ in 0..forward {
                let lo = i + 1;
                let dest = lo + (rng.next_u64() as usize % (n - lo));
                if dest != i && !dests.contains(&dest) {
                    dests.push(dest);
                }
            }
            if dests.is_empty() {
                dests.push(n - 1);
            }
            for d in dests {
                edges.push((NodeId(i), NodeId(d)));
            }
            if allow_cycles && i > 0 && rng.next_u64() % 4 == 0 {
                let back = (rng.next_u64() as usize) % i;
                if !edges.contains(&(NodeId(i), NodeId(back))) {
                    edges.push((NodeId(i), NodeId(back)));
                }
            }
        }
        let inputs: Vec<NodeId> = (0..n).map(NodeId).collect();
        let topo = Topology::new(nodes, edges, vec![], inputs).unwrap();
        let structure = topo.structure(StructureCode::all_absent(0)).unwrap();
        let mut allocation = Vec::new();
        for i in 0..n {
            let outs = structure.out_edges(NodeId(i)).to_vec();
            if outs.is_empty() {
                allocation.push(Vec::new());
                continue;
            }
            let mut row: Vec<f64> =
                outs.iter().map(|_| 0.05 + sample::uniform_01(rng)).collect();
            for (slot, dest) in outs.iter().enumerate() {
                if dest.0 <= i {
                    row[slot] *= 0.3;
                }
            }
            let total: f64 = row.iter().sum();
            let mut acc = 0.0;
            for v in row.iter_mut().take(outs.len() - 1) {
                *v /= total;
                acc += *v;
            }
            let last = row.len() - 1;
            row[last] = 1.0 - acc;
            allocation.push(row);
        }
        let q = (0..n).map(|_| 0.1 + 10.0 * sample::uniform_01(rng)).collect();
        (topo, ParameterState { allocation, inputs: q })
    }

    // Mass balance + simplex closure + nonnegativity on 1000 networks.
    for _ in 0..1000 {
        let (topo, params) = random_network(&mut rng, true);
        let s = topo.structure(StructureCode::all_absent(0)).unwrap();
        let sol = s.solve_mass_flows(&params).unwrap();
        let q = s.input_vector(&params);
        let mut inflow = q.clone();
        for (&(_, to), &flow) in &sol.z {
            inflow[to.0] += flow;
        }
        for j in 0..s.node_count() {
            assert!(math::abs(inflow[j] - sol.x[j]) <= 1e-9 * sol.x[j].max(1.0));
            assert!(sol.x[j] >= 0.0);
        }
        for row in &params.allocation {
            if !row.is_empty() {
                assert!(math::abs(row.iter().sum::<f64>() - 1.0) <= 1e-12);
            }
        }
    }

    // Demand/supply duality on 1000 acyclic networks (1e-8 relative).
    let mut duality_checks = 0;
    for _ in 0..1000 {
        let (topo, params) = random_network(&mut rng, false);
        let s = topo.structure(StructureCode::all_absent(0)).unwrap();
        let sol = s.solve_mass_flows(&params).unwrap();
        let n = s.node_count();
        let e: Vec<f64> = (0..n).map(|_| 2.0 * sample::uniform_01(&mut rng)).collect();
        let io = io_matrices(&s, &params, &sol, None).unwrap();
        for (id, info) in topo.nodes() {
            if !info.class.is_terminal() {
                continue;
            }
            let demand = consumption_eii(&e, &io, id);
            let supply =
                supply_driven_eii(&s, &params, &sol, &e, &vec![0.0; n], id).unwrap();
            let scale = math::abs(demand).max(math::abs(supply)).max(1e-12);
            assert!(math::abs(demand - supply) / scale <= 1e-8);
            duality_checks += 1;
        }
    }
    assert!(duality_checks >= 1000);

    // Rectified attribution: fixed point, completeness, delta invariance.
    for trial in 0..200 {
        let (topo, params) = random_network(&mut rng, false);
        // Re-declare the last terminal as a loss node.
        let loss = topo
            .nodes()
            .filter(|(_, info)| info.class.is_terminal())
            .map(|(id, _)| id)
            .last()
            .unwrap();
        let s = topo.structure(StructureCode::all_absent(0)).unwrap();
        let sol = s.solve_mass_flows(&params).unwrap();
        let n = s.node_count();
        let e: Vec<f64> = (0..n)
            .map(|i| if NodeId(i) == loss { 0.0 } else { 2.0 * sample::uniform_01(&mut rng) })
            .collect();
        let io = io_matrices(&s, &params, &sol, Some(loss)).unwrap();
        let f_cons = consumption_demand(&s, &sol, Some(loss));
        let total = rectified_system_impact(&e, &io, &f_cons).unwrap();
        let all = rectified_eii_all(&e, &io).unwrap();
        // Completeness: EII-weighted consumption reproduces the total.
        let attributed: f64 = topo
            .nodes()
            .filter(|(id, info)| info.class.is_terminal() && *id != loss)
            .map(|(id, _)| all[id.0] * f_cons[id.0])
            .sum();
        assert!(
            math::abs(attributed - total) <= 1e-8 * total.max(1e-9),
            "trial {trial}: attributed {attributed} vs total {total}"
        );
        // Difference-quotient path agrees and is delta invariant (1e-9).
        let probe_node = topo
            .nodes()
            .find(|(id, info)| info.class.is_terminal() && *id != loss && f_cons[id.0] > 0.1)
            .map(|(id, _)| id);
        if let Some(cons) = probe_node {
            let small = rectified_eii(&e, &io, &f_cons, cons, 0.01).unwrap();
            let large = rectified_eii(&e, &io, &f_cons, cons, 0.1).unwrap();
            let scale = math::abs(small).max(1e-12);
            assert!(math::abs(small - large) / scale <= 1e-9);
            assert!(math::abs(all[cons.0] - small) <= 1e-8 * scale.max(1.0));
        }
    }

    // Structure-prior normalization (1e-12), posterior normalization
    // (1e-10), shift invariance (1e-12), ratio antisymmetry (exact).
    use mfa_core::priors::{structure_prior, ConnectionBelief};
    use mfa_core::selection::{posterior_ratio, structure_posterior, EvidenceRow, EvidenceTable};
    for _ in 0..200 {
        let n_l = 1 + (rng.next_u64() % 8) as usize;
        let beliefs: Vec<ConnectionBelief> = (0..n_l)
            .map(|index| ConnectionBelief {
                index,
                p_exist: 0.02 + 0.96 * sample::uniform_01(&mut rng),
            })
            .collect();
        let mut rows = Vec::new();
        let mut total = 0.0;
        for word in 0..(1u32 << n_l) {
            let bits: Vec<bool> = (0..n_l).map(|l| word >> (n_l - 1 - l) & 1 == 1).collect();
            let code = StructureCode::new(bits);
            let p = structure_prior(&beliefs, &code);
            total += p;
            rows.push(EvidenceRow {
                code: code.to_string(),
                log_evidence: -50.0 + 30.0 * sample::uniform_01(&mut rng),
                prior: p,
            });
        }
        assert!(math::abs(total - 1.0) <= 1e-12);

        let table = EvidenceTable::new(rows.clone()).unwrap();
        let posterior = structure_posterior(&table).unwrap();
        let psum: f64 = posterior.iter().map(|(_, p)| p).sum();
        assert!(math::abs(psum - 1.0) <= 1e-10);

        let shifted = EvidenceTable::new(
            rows.iter()
                .map(|r| EvidenceRow {
                    code: r.code.clone(),
                    log_evidence: r.log_evidence + 140.0,
                    prior: r.prior,
                })
                .collect(),
        )
        .unwrap();
        let shifted_posterior = structure_posterior(&shifted).unwrap();
        for (code, p) in posterior.iter() {
            assert!(math::abs(p - shifted_posterior.probability(code).unwrap()) <= 1e-12);
        }

        let a = &rows[0].code;
        let b = &rows[rows.len() - 1].code;
        let (v_ab, _) = posterior_ratio(&table, a, b).unwrap();
        let (v_ba, _) = posterior_ratio(&table, b, a).unwrap();
        assert_eq!(v_ab + v_ba, 0.0);
    }

    eprintln!("ACCEPTANCE 3 property-suites: PASS (mass balance, duality, rectification, priors/posteriors, antisymmetry)");
}

// ---------------------------------------------------------------------
// Criteria 4-6: the steel case at desk scale (shared pipeline run).
// ---------------------------------------------------------------------

fn read_posterior_map(out: &Path) -> BTreeMap<String, (f64, f64, f64)> {
    mfa_cli::artifacts::read_posterior(out)
        .unwrap()
        .into_iter()
        .map(|r| (r.code.clone(), (r.prior, r.log_evidence, r.posterior)))
        .collect()
}

#[test]
fn criterion_4_steel_structure_selection() {
    let out = STEEL_RUN.clone();
    let rows = read_posterior_map(&out);
    assert_eq!(rows.len(), 16);

    let (best_code, best_posterior) = rows
        .iter()
        .map(|(c, &(_, _, p))| (c.clone(), p))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    assert_eq!(best_code, "0100", "structure 0100 must top the posterior");
    assert!(
        best_posterior >= 0.5,
        "0100 posterior {best_posterior:.4} must be at least 0.5"
    );

    // Decisive evidence against every structure lacking scrap -> BOF
    // (second code bit 0): log10 PR <= -2 against 0100.
    let table = mfa_core::selection::EvidenceTable::new(
        rows.iter()
            .map(|(code, &(prior, le, _))| mfa_core::selection::EvidenceRow {
                code: code.clone(),
                log_evidence: le,
                prior,
            })
            .collect(),
    )
    .unwrap();
    let mut worst: f64 = f64::NEG_INFINITY;
    for code in rows.keys() {
        if code.as_bytes()[1] == b'1' {
            continue;
        }
        let (value, _) = mfa_core::selection::posterior_ratio(&table, code, "0100").unwrap();
        worst = worst.max(value);
        assert!(
            value <= -2.0,
            "structure {code} (no scrap->BOF) has log10 PR {value:.2} against 0100; must be <= -2"
        );
    }
    eprintln!(
        "ACCEPTANCE 4 steel-selection: PASS (0100 posterior {best_posterior:.3}; worst no-scrap-BOF log10 PR {worst:.2})"
    );
}

#[test]
fn criterion_5_steel_total_emissions() {
    let out = STEEL_RUN.clone();
    let text = std::fs::read_to_string(out.join("ei_total.csv")).unwrap();
    let line = text.lines().nth(1).unwrap();
    let fields: Vec<f64> =
        line.split(',').take(2).map(|v| v.parse().unwrap()).collect();
    let (mean, sd) = (fields[0], fields[1]);
    assert!(
        (mean - 153.0).abs() <= 15.0,
        "total EI mean {mean:.1} Mt CO2eq outside 153 +/- 15"
    );
    assert!(
        (sd - 7.1).abs() <= 3.0,
        "total EI sd {sd:.2} Mt CO2eq outside 7.1 +/- 3"
    );
    eprintln!("ACCEPTANCE 5 steel-emissions: PASS (mean {mean:.1} Mt, sd {sd:.2} Mt)");
}

#[test]
fn criterion_6_steel_decision_tops() {
    let out = STEEL_RUN.clone();
    let text = std::fs::read_to_string(out.join("decision.txt")).unwrap();
    let mut tops = BTreeMap::new();
    for line in text.lines() {
        let Some((label, ranking)) = line.split_once("  ") else { continue };
        let first = ranking.trim().split(" > ").next().unwrap_or("").to_string();
        tops.insert(label.trim().to_string(), first);
    }
    assert_eq!(tops["Maximize low savings"], "Automotive", "maximin top option");
    assert_eq!(tops["Maximize certainty of savings"], "Other", "certainty top option");
    assert_eq!(tops["Maximize expected savings"], "Steel Products", "mean top option");
    assert_eq!(tops["Maximize high savings"], "Steel Products", "maximax top option");
    eprintln!("ACCEPTANCE 6 steel-decision: PASS (maximin Automotive, certainty Other, mean/maximax Steel Products)");
}

// ---------------------------------------------------------------------
// Criterion 7: determinism.
// ---------------------------------------------------------------------

#[test]
fn criterion_7_determinism() {
    // Full pipeline byte-identity on the bundled toy dataset.
    let toy_cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/config.toml");
    let run = |dir: &Path| {
        let mut cfg = config::load(&toy_cfg_path).unwrap();
        cfg.out_dir = dir.to_path_buf();
        commands::cmd_enumerate(&cfg).unwrap();
        commands::cmd_infer(&cfg, InferSelection::All, Some(2)).unwrap();
        commands::cmd_select(&cfg).unwrap();
        commands::cmd_average(&cfg).unwrap();
        commands::cmd_impact(&cfg).unwrap();
        commands::cmd_decide(&cfg).unwrap();
    };
    let a = Path::new(env!("CARGO_TARGET_TMPDIR")).join("determinism_a");
    let b = Path::new(env!("CARGO_TARGET_TMPDIR")).join("determinism_b");
    for d in [&a, &b] {
        let _ = std::fs::remove_dir_all(d);
        std::fs::create_dir_all(d).unwrap();
        run(d);
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        let bytes_b = std::fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "artifact {name} differs between pipeline reruns");
    }

    // Steel-scale spot check: one structure re-inferred must be identical.
    let steel = STEEL_RUN.clone();
    let reference = std::fs::read(steel.join("ensemble_0000.csv")).unwrap();
    let rerun_dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("determinism_steel");
    let _ = std::fs::remove_dir_all(&rerun_dir);
    std::fs::create_dir_all(&rerun_dir).unwrap();
    let mut cfg = config::load(&steel_config_path()).unwrap();
    cfg.out_dir = rerun_dir.clone();
    commands::cmd_infer(&cfg, InferSelection::One("0000".into()), None).unwrap();
    let rerun = std::fs::read(rerun_dir.join("ensemble_0000.csv")).unwrap();
    assert_eq!(reference, rerun, "steel ensemble differs between reruns");

    eprintln!(
        "ACCEPTANCE 7 determinism: PASS ({} toy artifacts byte-identical; steel ensemble re-run identical)",
        names.len()
    );
}
