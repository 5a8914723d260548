//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every check compares against an independent oracle from `qagg-testkit`
//! (subset enumeration, exhaustive flow search, linear yield scans, a dense
//! density-matrix simulator) or against a closed form.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use qagg_core::concat::{aggregate_level, theta_min_cut, Lower};
use qagg_core::mincostflow::min_cost_flow;
use qagg_core::netgraph::{min_cut, Edge, NetworkGraph, NodeId};
use qagg_core::pathplan::{build_swap_schedule, decompose_flow, plan_channel_uses, SwapSchedule};
use qagg_core::rates::{asymptotic_rate, channel_capacity, ChannelModel, RATE_TOL};
use qagg_core::stabsim::{
    delivered_distance_exact, delta_budget, epsilon_exact, fidelity_estimate, run_schedule, NoiseModel,
    EXACT_QUBIT_LIMIT,
};
use qagg_core::yields::Yield;
use qagg_core::{FlowError, FlowSolution, Prob};
use qagg_testkit::dense::{delivered_report, DenseNoise};
use qagg_testkit::hier::{enlarge_lowers, flat_reference, random_two_level, random_yield};
use qagg_testkit::{
    brute_cut, brute_flow_costs, brute_min_cut, bundle_edge_sums, eval_yield, random_graph, rng, scan_min_uses,
    GraphSpec,
};
use rand::Rng;

/// Tolerance on f64 density-matrix results.
const DENSE_TOL: f64 = 1e-9;
const MC_TRIALS: u64 = 10_000;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        // written so that a NaN comparison fails
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    ensure!(elapsed.as_secs_f64() < limit_s as f64, "{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64());
    Ok(())
}

/// The shared corpus for criteria 2 to 5, with every feasible solver output.
struct FlowCorpus {
    graphs: Vec<NetworkGraph>,
    /// Per graph: min-cost flows for F = 0..=C.
    solutions: Vec<Vec<FlowSolution>>,
}

fn flow_corpus() -> FlowCorpus {
    let spec = GraphSpec { max_nodes: 7, max_edges: 8, max_capacity: 3, max_cost: 5 };
    let mut r = rng(0xacce97);
    let graphs: Vec<NetworkGraph> = (0..100).map(|_| random_graph(&mut r, spec)).collect();
    let solutions = graphs
        .iter()
        .map(|g| (0..=min_cut(g)).map(|f| min_cost_flow(g, f as i64).expect("feasible target")).collect())
        .collect();
    FlowCorpus { graphs, solutions }
}

fn c1_min_cut() -> Check {
    let spec = GraphSpec { max_nodes: 10, max_edges: 20, max_capacity: 5, max_cost: 5 };
    let mut r = rng(0xc1);
    let start = Instant::now();
    for i in 0..200 {
        let g = random_graph(&mut r, spec);
        let (got, want) = (min_cut(&g), brute_min_cut(&g));
        ensure!(got == want, "graph {i}: min_cut {got}, enumeration {want}");
    }
    within(start.elapsed(), 10, "200 graphs")?;
    Ok(format!("200 graphs, |V| <= 10, exact, {:.2} s", start.elapsed().as_secs_f64()))
}

fn c2_min_cost(corpus: &FlowCorpus) -> Check {
    let start = Instant::now();
    let mut checked = 0;
    for (i, (g, sols)) in corpus.graphs.iter().zip(&corpus.solutions).enumerate() {
        let oracle = brute_flow_costs(g);
        for (f, sol) in sols.iter().enumerate() {
            sol.check(g).map_err(|m| format!("graph {i} F={f}: {m}"))?;
            ensure!(Some(sol.total_cost) == oracle[f], "graph {i} F={f}: cost {} vs {:?}", sol.total_cost, oracle[f]);
            checked += 1;
        }
        ensure!(oracle.iter().skip(sols.len()).all(Option::is_none), "graph {i}: oracle finds flow above C");
    }
    within(start.elapsed(), 60, "100 graphs")?;
    Ok(format!("100 graphs, {checked} targets, exact, {:.2} s", start.elapsed().as_secs_f64()))
}

fn c3_max_flow(corpus: &FlowCorpus) -> Check {
    for (i, g) in corpus.graphs.iter().enumerate() {
        let c = min_cut(g);
        let sol = min_cost_flow(g, c as i64).map_err(|e| format!("graph {i}: {e}"))?;
        ensure!(sol.net_flow == c, "graph {i}: net flow {} at C={c}", sol.net_flow);
        let over = min_cost_flow(g, c as i64 + 1);
        let rejected = matches!(over, Err(FlowError::InfeasibleTarget { .. }));
        ensure!(rejected, "graph {i}: target C+1 accepted");
    }
    Ok("100 graphs, C attained, C+1 rejected".into())
}

fn c4_decomposition(corpus: &FlowCorpus) -> Check {
    let mut outputs = 0;
    for (i, (g, sols)) in corpus.graphs.iter().zip(&corpus.solutions).enumerate() {
        for sol in sols {
            let bundles = decompose_flow(g, sol).map_err(|e| format!("graph {i}: {e}"))?;
            let sums = bundle_edge_sums(&bundles);
            for (k, e) in g.edges().iter().enumerate() {
                let key = if e.a <= e.b { (e.a.clone(), e.b.clone()) } else { (e.b.clone(), e.a.clone()) };
                let got = sums.get(&key).copied().unwrap_or(0);
                ensure!(
                    got == sol.edge_flow[k],
                    "graph {i} F={}: edge {}-{} {got} vs {}",
                    sol.net_flow,
                    e.a,
                    e.b,
                    sol.edge_flow[k]
                );
            }
            let total: u64 = bundles.iter().map(|b| b.multiplicity).sum();
            ensure!(total == sol.net_flow, "graph {i}: multiplicities {total} vs {}", sol.net_flow);
            outputs += 1;
        }
    }
    Ok(format!("{outputs} solver outputs, exact"))
}

fn schedule_of(g: &NetworkGraph, sol: &FlowSolution) -> SwapSchedule {
    build_swap_schedule(g.source_id(), g.sink_id(), &decompose_flow(g, sol).expect("canonical flow"))
}

fn c5_noiseless(corpus: &FlowCorpus) -> Check {
    let start = Instant::now();
    let mut pairs = 0;
    for (i, (g, sols)) in corpus.graphs.iter().zip(&corpus.solutions).enumerate() {
        for sol in sols {
            let sched = schedule_of(g, sol);
            let out = run_schedule(&sched, &NoiseModel::noiseless(), i as u64).map_err(|e| e.to_string())?;
            ensure!(
                out.pairs.len() as u64 == sol.net_flow,
                "graph {i}: {} pairs for F={}",
                out.pairs.len(),
                sol.net_flow
            );
            ensure!(out.all_ideal(), "graph {i} F={}: a pair fails XX or ZZ", sol.net_flow);
            pairs += out.pairs.len();
        }
    }
    within(start.elapsed(), 60, "noiseless runs")?;
    Ok(format!("{pairs} pairs pass +XX,+ZZ, {:.2} s", start.elapsed().as_secs_f64()))
}

fn unit_graph(nodes: &[&str], edges: &[(&str, &str, u64)]) -> NetworkGraph {
    NetworkGraph::new(
        nodes.iter().map(|&n| NodeId::from(n)).collect(),
        edges.iter().map(|&(a, b, c)| Edge::new(a, b, c).cost(1)).collect(),
        "s".into(),
        "t".into(),
    )
    .expect("valid fixture")
}

fn exact_instances() -> Vec<(NetworkGraph, u64)> {
    vec![
        (unit_graph(&["s", "t"], &[("s", "t", 2)]), 2),
        (unit_graph(&["s", "r", "t"], &[("s", "r", 1), ("r", "t", 1)]), 1),
        (unit_graph(&["s", "r", "t"], &[("s", "r", 2), ("r", "t", 2)]), 2),
        (unit_graph(&["s", "a", "b", "t"], &[("s", "a", 1), ("a", "b", 1), ("b", "t", 1)]), 1),
        (unit_graph(&["s", "a", "b", "t"], &[("s", "a", 1), ("s", "b", 1), ("a", "t", 1), ("b", "t", 1)]), 2),
    ]
}

fn c6_error_bound() -> Check {
    let grid_p = [Prob::zero(), Prob::new(1, 20), Prob::new(1, 4), Prob::one()];
    let grid_d = [Prob::zero(), Prob::new(1, 20)];
    let mut cases = 0;
    let mut worst_z: f64 = 0.0;
    for (n, (g, f)) in exact_instances().into_iter().enumerate() {
        let sol = min_cost_flow(&g, f as i64).map_err(|e| e.to_string())?;
        let sched = schedule_of(&g, &sol);
        ensure!(sched.qubits <= EXACT_QUBIT_LIMIT, "instance {n} leaves the exact regime");
        let pairs = sched.delivered_pairs();
        for p in &grid_p {
            for d in &grid_d {
                let g = g.with_deltas(d);
                let noise = NoiseModel::from_graph(&g, p.clone());
                let delta = delta_budget(&g, &sol.active_edges());
                let eps = epsilon_exact(&sched, &noise).map_err(|e| e.to_string())?;
                let bound = &delta + &eps;
                let exact = delivered_distance_exact(&sched, &noise).map_err(|e| e.to_string())?;
                ensure!(exact <= bound, "instance {n} p={p} δ={d}: distance {exact} > {bound}");

                let dense = DenseNoise {
                    swap_p: p.to_f64(),
                    pair_delta: noise
                        .pair_error
                        .iter()
                        .map(|(k, v)| (k.clone(), v.to_f64()))
                        .collect::<BTreeMap<_, _>>(),
                };
                let measured = delivered_report(&sched, &dense, &pairs).distance();
                ensure!(
                    measured <= bound.to_f64() + DENSE_TOL,
                    "instance {n} p={p} δ={d}: dense distance {measured} > {}",
                    bound.to_f64()
                );
                ensure!((measured - exact.to_f64()).abs() <= DENSE_TOL, "instance {n}: dense {measured} vs {exact}");

                let est = fidelity_estimate(&sched, &noise, MC_TRIALS, 0xc6 + cases).map_err(|e| e.to_string())?;
                let truth = (1.0 - measured).clamp(0.0, 1.0);
                let sigma = (truth * (1.0 - truth) / MC_TRIALS as f64).sqrt();
                let dev = (est.all_pass_fraction - truth).abs();
                ensure!(
                    dev <= 3.0 * sigma + 1e-12,
                    "instance {n} p={p} δ={d}: MC {} vs {truth}",
                    est.all_pass_fraction
                );
                if sigma > 0.0 {
                    worst_z = worst_z.max(dev / sigma);
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} grid cases, distance <= δ+ε exactly, MC max |z| = {worst_z:.2} at 10^4 trials"))
}

fn c7_inversion() -> Check {
    let mut r = rng(0xc7);
    let mut checked = 0;
    for _ in 0..300 {
        let y = random_yield(&mut r);
        let max = r.gen_range(0..=12);
        for needed in 0..=eval_yield(&y, max) + 1 {
            let want = scan_min_uses(&y, needed, max);
            let got = y.min_uses_for(needed, Some(max)).ok();
            ensure!(got == want, "{y:?} max {max} need {needed}: {got:?} vs {want:?}");
            checked += 1;
        }
    }
    // the same inversion through plan_channel_uses on whole networks
    let spec = GraphSpec { max_nodes: 6, max_edges: 9, max_capacity: 3, max_cost: 4 };
    for i in 0..100 {
        let base = random_graph(&mut r, spec);
        let yields: Vec<(Yield, u64)> =
            base.edges().iter().map(|_| (random_yield(&mut r), r.gen_range(1..=8))).collect();
        let edges = base
            .edges()
            .iter()
            .zip(&yields)
            .map(|(e, (y, m))| {
                Edge::new(e.a.clone(), e.b.clone(), eval_yield(y, *m))
                    .milli_cost(e.unit_cost)
                    .max_uses(*m)
                    .yield_fn(y.clone())
            })
            .collect();
        let g = NetworkGraph::new(base.nodes().to_vec(), edges, base.source_id().clone(), base.sink_id().clone())
            .map_err(|e| e.to_string())?;
        let sol = min_cost_flow(&g, min_cut(&g) as i64).map_err(|e| e.to_string())?;
        let plan = plan_channel_uses(&g, &sol).map_err(|e| format!("graph {i}: {e}"))?;
        for u in &plan.edges {
            let (y, m) = &yields[u.edge];
            ensure!(Some(u.uses) == scan_min_uses(y, u.needed, *m), "graph {i} edge {}-{}: {} uses", u.a, u.b, u.uses);
            checked += 1;
        }
    }
    Ok(format!("{checked} inversions (identity, linear, table), exact"))
}

fn c8_flattening() -> Check {
    let mut r = rng(0xc8);
    let mut targets = 0;
    for i in 0..50 {
        let net = random_two_level(&mut r);
        let flat = flat_reference(&net);
        let theta = theta_min_cut(&net).map_err(|e| e.to_string())?;
        ensure!(theta == brute_min_cut(&flat), "network {i}: Θ {theta} vs {}", brute_min_cut(&flat));
        let oracle = brute_flow_costs(&flat);
        for target in 0..=theta {
            let agg = aggregate_level(&net, target as i64, &Prob::zero()).map_err(|e| format!("network {i}: {e}"))?;
            let reference = min_cost_flow(&flat, target as i64).map_err(|e| e.to_string())?;
            ensure!(
                agg.cost == reference.total_cost,
                "network {i} Ψ={target}: {} vs {}",
                agg.cost,
                reference.total_cost
            );
            ensure!(
                Some(agg.cost) == oracle[target as usize],
                "network {i} Ψ={target}: exhaustive {:?}",
                oracle[target as usize]
            );
            targets += 1;
        }
    }
    Ok(format!("50 networks, {targets} targets, exact"))
}

fn c9_level_independence() -> Check {
    let mut r = rng(0xc9);
    let mut compared = 0;
    for i in 0..50 {
        let mut net = random_two_level(&mut r);
        for h in &mut net.edges {
            if matches!(h.lower, Lower::Network(_)) && h.unit_cost.is_none() {
                h.unit_cost = Some(1000);
            }
        }
        let bigger = enlarge_lowers(&net);
        let theta = theta_min_cut(&net).map_err(|e| e.to_string())?;
        for target in 0..=theta {
            let a = aggregate_level(&net, target as i64, &Prob::zero()).map_err(|e| e.to_string())?;
            let b = aggregate_level(&bigger, target as i64, &Prob::zero()).map_err(|e| e.to_string())?;
            ensure!(
                a.budget.delta == b.budget.delta,
                "network {i} Ψ={target}: δ {} vs {}",
                a.budget.delta,
                b.budget.delta
            );
            compared += 1;
        }
    }
    Ok(format!("50 networks, {compared} targets, δ unchanged with lower networks 10x larger"))
}

fn c10_rates() -> Check {
    let spec = GraphSpec { max_nodes: 10, max_edges: 18, max_capacity: 4, max_cost: 1 };
    let close = |a: f64, b: f64| (a - b).abs() <= RATE_TOL * a.abs().max(b.abs()).max(1.0);
    let mut r = rng(0xca);
    for i in 0..200 {
        let g = random_graph(&mut r, spec);
        let models: Vec<ChannelModel> = g
            .edges()
            .iter()
            .map(|_| {
                let rate = r.gen_range(0.1..10.0);
                if r.gen_bool(0.5) {
                    ChannelModel::explicit(r.gen_range(0.0..3.0), rate)
                } else {
                    ChannelModel::pure_loss(r.gen_range(0.01..0.99), rate)
                }
            })
            .collect();
        let weights: Vec<f64> = models.iter().map(|m| m.rate() * channel_capacity(m)).collect();
        let got = asymptotic_rate(&g, &models).map_err(|e| e.to_string())?;
        let want = brute_cut(&g, &weights);
        ensure!(close(got, want), "graph {i}: rate {got} vs enumeration {want}");
        let lambda = r.gen_range(0.1..10.0);
        let scaled: Vec<ChannelModel> = models
            .iter()
            .map(|m| match *m {
                ChannelModel::Explicit { q, rate } => ChannelModel::explicit(q, lambda * rate),
                ChannelModel::PureLoss { eta, rate } => ChannelModel::pure_loss(eta, lambda * rate),
            })
            .collect();
        let s = asymptotic_rate(&g, &scaled).map_err(|e| e.to_string())?;
        ensure!(close(s, lambda * got), "graph {i}: scaled rate {s} vs {}", lambda * got);
    }
    let q = channel_capacity(&ChannelModel::pure_loss(0.5, 1.0));
    ensure!((q - 1.0).abs() <= RATE_TOL, "Q(η=0.5) = {q}");
    Ok("200 graphs within 1e-9 of enumeration, Q(η=0.5) = 1, linear in r".into())
}

fn c11_determinism() -> Check {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let f = |name: &str| fixtures.join(name).to_string_lossy().into_owned();
    let runs: Vec<Vec<String>> = vec![
        vec!["mincut".into(), "--input".into(), f("diamond.json")],
        vec!["flow".into(), "--input".into(), f("chain.json"), "--target".into(), "2".into()],
        vec!["maxflow".into(), "--input".into(), f("diamond.json"), "--format".into(), "dot".into()],
        vec!["price-scan".into(), "--input".into(), f("diamond.json")],
        vec!["plan".into(), "--input".into(), f("diamond.json"), "--format".into(), "text".into()],
        vec![
            "simulate".into(),
            "--input".into(),
            f("diamond.json"),
            "--noise-p".into(),
            "0.2".into(),
            "--delta-default".into(),
            "0.01".into(),
            "--trials".into(),
            "5000".into(),
            "--seed".into(),
            "42".into(),
        ],
        vec!["concat".into(), "--input".into(), f("hierarchical.json"), "--noise-p".into(), "0.01".into()],
        vec!["rate".into(), "--input".into(), f("channels.json")],
    ];
    for args in &runs {
        let out = |_: usize| {
            Command::new(env!("CARGO_BIN_EXE_qagg")).args(args).env_remove("QAGG_FORMAT").output().expect("binary runs")
        };
        let first = out(0);
        ensure!(first.status.success(), "{args:?}: {}", String::from_utf8_lossy(&first.stderr));
        for k in 1..3 {
            ensure!(out(k).stdout == first.stdout, "{args:?}: run {k} differs");
        }
    }
    Ok(format!("{} commands x 3 runs, byte-identical", runs.len()))
}

fn main() {
    let corpus = flow_corpus();
    let criteria: Vec<Criterion> = vec![
        ("min-cut oracle equivalence", Box::new(c1_min_cut)),
        ("min-cost-flow optimality", Box::new(|| c2_min_cost(&corpus))),
        ("max-flow consistency", Box::new(|| c3_max_flow(&corpus))),
        ("flow-decomposition reconstruction", Box::new(|| c4_decomposition(&corpus))),
        ("noiseless end-to-end delivery", Box::new(|| c5_noiseless(&corpus))),
        ("error-bound inequality", Box::new(c6_error_bound)),
        ("channel-use inversion", Box::new(c7_inversion)),
        ("concatenation flattening", Box::new(c8_flattening)),
        ("level-independence of error", Box::new(c9_level_independence)),
        ("asymptotic rate", Box::new(c10_rates)),
        ("determinism", Box::new(c11_determinism)),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
