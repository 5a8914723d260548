use std::collections::BTreeSet;
use std::fmt::Write;

use qagg_core::concat::{self, aggregate_level, plan_lower_uses, theta_min_cut, total_lower_cost};
use qagg_core::doc::NetworkDoc;
use qagg_core::mincostflow::{best_unit_price_target, cost_curve, min_cost_flow, min_cost_max_flow, unit_price};
use qagg_core::netgraph::{build_graph_with_default_delta, min_cut, min_cut_partition};
use qagg_core::pathplan::{build_swap_schedule, decompose_flow, plan_channel_uses, Instruction, SwapSchedule};
use qagg_core::rates::{self, asymptotic_rate, channel_capacity};
use qagg_core::stabsim::{
    delivered_distance_exact, epsilon_or_bound, fidelity_estimate, pair_fidelity_exact, NoiseModel, EXACT_QUBIT_LIMIT,
};
use qagg_core::{FlowSolution, NetworkGraph, NodeId, Prob};
use serde_json::{json, Value};

use crate::render::{self, dot, flow_dot, net_ab, price, units, EdgeStyle};
use crate::{CliError, Command, Input, Output, RunConfig, DEFAULT_TRIALS};

pub(crate) fn dispatch(cfg: &RunConfig, input: &Input, schedule: Option<&Input>) -> Result<Output, CliError> {
    match cfg.command {
        Command::Mincut => Ok(mincut(&graph(cfg, input)?)),
        Command::Flow => {
            let g = graph(cfg, input)?;
            let sol = solve(&g, cfg.target)?;
            Ok(flow(&g, &sol))
        }
        Command::Maxflow => {
            let g = graph(cfg, input)?;
            let sol = min_cost_max_flow(&g);
            Ok(flow(&g, &sol))
        }
        Command::PriceScan => price_scan(&graph(cfg, input)?),
        Command::Plan => plan(&graph(cfg, input)?, cfg.target),
        Command::Simulate => simulate(cfg, input, schedule),
        Command::Concat => concat(cfg, input),
        Command::Rate => rate(input),
    }
}

fn document(input: &Input) -> Result<NetworkDoc, CliError> {
    NetworkDoc::from_json(&input.text).map_err(|e| CliError::validation(format!("invalid network document: {e}")))
}

fn graph(cfg: &RunConfig, input: &Input) -> Result<NetworkGraph, CliError> {
    let doc = document(input)?;
    if doc.is_hierarchical() {
        return Err(CliError::validation("network has lower networks; use the concat command"));
    }
    let delta = cfg.delta_default.clone().unwrap_or_else(Prob::zero);
    Ok(build_graph_with_default_delta(&doc, &delta)?)
}

fn solve(g: &NetworkGraph, target: Option<i64>) -> Result<FlowSolution, CliError> {
    let target = target.unwrap_or_else(|| min_cut(g) as i64);
    Ok(min_cost_flow(g, target)?)
}

fn prob_text(p: &Prob) -> String {
    format!("{p} ({:.6})", p.to_f64())
}

fn mincut(g: &NetworkGraph) -> Output {
    let (c, side) = min_cut_partition(g);
    let inside: BTreeSet<&NodeId> = side.iter().collect();
    let crossing: Vec<usize> =
        (0..g.edge_count()).filter(|&k| inside.contains(&g.edges()[k].a) != inside.contains(&g.edges()[k].b)).collect();
    let cut_edges: Vec<Value> = crossing
        .iter()
        .map(|&k| {
            let e = &g.edges()[k];
            json!({"a": e.a, "b": e.b, "capacity": e.capacity})
        })
        .collect();

    let mut text = format!("C {c}\nsource side {}\ncut edges\n", join(side.iter().map(|v| v.as_str())));
    for &k in &crossing {
        let e = &g.edges()[k];
        let _ = writeln!(text, "  {} -- {}  capacity {}", e.a, e.b, e.capacity);
    }
    let dot = dot(g, |k| {
        let e = &g.edges()[k];
        EdgeStyle {
            label: format!("{} @ {}", e.capacity, units(e.unit_cost)),
            reversed: false,
            active: true,
            highlight: crossing.contains(&k),
        }
    });
    Output { result: json!({"C": c, "source_side": side, "cut_edges": cut_edges}), text, dot: Some(dot) }
}

fn join<'a>(items: impl Iterator<Item = &'a str>) -> String {
    items.collect::<Vec<_>>().join(" ")
}

fn flow_json(g: &NetworkGraph, sol: &FlowSolution) -> Value {
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            json!({
                "a": e.a, "b": e.b, "capacity": e.capacity, "unit_cost": e.unit_cost,
                "delta": e.gen_error, "flow": sol.edge_flow[k], "net_a_to_b": net_ab(g, sol, k),
            })
        })
        .collect();
    json!({
        "C": min_cut(g),
        "net_flow": sol.net_flow,
        "total_cost": sol.total_cost,
        "unit_price": unit_price(sol).map(|r| r.to_string()),
        "delta_budget": qagg_core::stabsim::delta_budget(g, &sol.active_edges()),
        "edges": edges,
    })
}

fn flow_text(g: &NetworkGraph, sol: &FlowSolution) -> String {
    let mut s = format!(
        "C {}\nnet_flow {}\ntotal_cost {}\nunit_price {}\nedges\n",
        min_cut(g),
        sol.net_flow,
        units(sol.total_cost),
        price(sol.total_cost, sol.net_flow)
    );
    for (k, e) in g.edges().iter().enumerate() {
        let arrow = match net_ab(g, sol, k) {
            d if d > 0 => "->",
            d if d < 0 => "<-",
            _ => "--",
        };
        let _ = writeln!(s, "  {} {arrow} {}  {}/{} @ {}", e.a, e.b, sol.edge_flow[k], e.capacity, units(e.unit_cost));
    }
    s
}

fn flow(g: &NetworkGraph, sol: &FlowSolution) -> Output {
    Output { result: flow_json(g, sol), text: flow_text(g, sol), dot: Some(flow_dot(g, sol)) }
}

fn price_scan(g: &NetworkGraph) -> Result<Output, CliError> {
    let curve = cost_curve(g);
    let (best, sol) = best_unit_price_target(g)?;
    let points: Vec<Value> = curve
        .iter()
        .enumerate()
        .map(|(f, &cost)| {
            let unit = (f > 0).then(|| num_ratio(cost, f as u64));
            json!({"F": f, "cost": cost, "unit_price": unit})
        })
        .collect();
    let mut text = String::from("F  cost  unit_price\n");
    for (f, &cost) in curve.iter().enumerate() {
        let _ = writeln!(text, "{f}  {}  {}", units(cost), price(cost, f as u64));
    }
    let _ = writeln!(text, "best F {best} cost {} unit_price {}", units(sol.total_cost), price(sol.total_cost, best));
    let result = json!({
        "C": curve.len() - 1,
        "curve": points,
        "best": {"F": best, "cost": sol.total_cost, "unit_price": num_ratio(sol.total_cost, best)},
    });
    Ok(Output { result, text, dot: Some(flow_dot(g, &sol)) })
}

fn num_ratio(cost: u64, f: u64) -> String {
    num_rational::Ratio::new(cost, f).to_string()
}

fn plan(g: &NetworkGraph, target: Option<i64>) -> Result<Output, CliError> {
    let sol = solve(g, target)?;
    let bundles = decompose_flow(g, &sol)?;
    let uses = plan_channel_uses(g, &sol)?;
    let sched = build_swap_schedule(g.source_id(), g.sink_id(), &bundles);
    let result = json!({
        "flow": flow_json(g, &sol),
        "bundles": bundles,
        "channel_uses": uses.edges,
        "total_uses": uses.total_uses(),
        "schedule": {
            "qubits": sched.qubits,
            "measurements": sched.measurements,
            "swaps": sched.measure_count(),
            "pairs": sched.delivered_pairs().len(),
            "text": sched.to_text(),
        },
    });
    Ok(Output { result, text: sched.to_text(), dot: Some(flow_dot(g, &sol)) })
}

fn looks_like_schedule(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("schedule "))
}

fn schedule_edges(sched: &SwapSchedule) -> BTreeSet<(NodeId, NodeId)> {
    sched
        .instructions
        .iter()
        .filter_map(|ins| match ins {
            Instruction::CreateBellPair { a, b, .. } if a <= b => Some((a.clone(), b.clone())),
            Instruction::CreateBellPair { a, b, .. } => Some((b.clone(), a.clone())),
            _ => None,
        })
        .collect()
}

fn simulate(cfg: &RunConfig, input: &Input, schedule: Option<&Input>) -> Result<Output, CliError> {
    let p = cfg.noise_p.clone().unwrap_or_else(Prob::zero);
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let mut planned = None;
    let (sched, noise) = if let Some(s) = schedule {
        if cfg.target.is_some() {
            return Err(CliError::usage("--target cannot be combined with --schedule"));
        }
        let g = graph(cfg, input)?;
        let sched = SwapSchedule::parse(&s.text)?;
        for (a, b) in schedule_edges(&sched) {
            let known = g.node_index(&a).zip(g.node_index(&b)).and_then(|(x, y)| g.edge_between(x, y));
            if known.is_none() {
                return Err(CliError::validation(format!("schedule uses {a}-{b}, which is not a network edge")));
            }
        }
        let noise = NoiseModel::from_graph(&g, p.clone());
        (sched, noise)
    } else if looks_like_schedule(&input.text) {
        if cfg.target.is_some() {
            return Err(CliError::usage("--target needs a network input"));
        }
        let sched = SwapSchedule::parse(&input.text)?;
        let mut noise = NoiseModel::swap_only(p.clone());
        if let Some(d) = &cfg.delta_default {
            for (a, b) in schedule_edges(&sched) {
                noise = noise.with_pair_error(&a, &b, d.clone());
            }
        }
        (sched, noise)
    } else {
        let g = graph(cfg, input)?;
        let sol = solve(&g, cfg.target)?;
        let bundles = decompose_flow(&g, &sol)?;
        let sched = build_swap_schedule(g.source_id(), g.sink_id(), &bundles);
        let noise = NoiseModel::from_graph(&g, p.clone());
        planned = Some((g, sol));
        (sched, noise)
    };

    let est = fidelity_estimate(&sched, &noise, trials, cfg.seed)?;
    let delta: Prob = schedule_edges(&sched).iter().map(|(a, b)| noise.pair_error_for(a, b)).sum();
    let (epsilon, epsilon_exact) = epsilon_or_bound(&sched, &p)?;
    let bound = &delta + &epsilon;
    let exact = if sched.qubits <= EXACT_QUBIT_LIMIT {
        let distance = delivered_distance_exact(&sched, &noise)?;
        let fidelity = pair_fidelity_exact(&sched, &noise)?;
        Some((distance, fidelity))
    } else {
        None
    };
    let pair_count = sched.delivered_pairs().len();

    let mut text = format!(
        "pairs {pair_count}\nqubits {}\nswaps {}\ntrials {}\nall_pass {}/{} [{:.6}, {:.6}]\n",
        sched.qubits,
        sched.measure_count(),
        est.trials,
        est.all_pass,
        est.trials,
        est.all_pass_interval.low,
        est.all_pass_interval.high
    );
    for pe in &est.pairs {
        let _ = writeln!(
            text,
            "  pair q{}-q{}  passes {}/{}  fidelity {:.6} [{:.6}, {:.6}]",
            pe.source_qubit, pe.sink_qubit, pe.passes, est.trials, pe.fidelity, pe.interval.low, pe.interval.high
        );
    }
    let _ = writeln!(text, "delta {}", prob_text(&delta));
    let _ = writeln!(text, "epsilon {} {}", prob_text(&epsilon), if epsilon_exact { "exact" } else { "bound" });
    let _ = writeln!(text, "bound {}", prob_text(&bound));
    if let Some((distance, _)) = &exact {
        let _ = writeln!(text, "distance {}", prob_text(distance));
    }

    let mut result = json!({
        "pair_count": pair_count,
        "qubits": sched.qubits,
        "swaps": sched.measure_count(),
        "estimate": est,
        "all_pass": est.all_pass == est.trials,
        "delta": delta,
        "epsilon": epsilon,
        "epsilon_exact": epsilon_exact,
        "bound": bound,
        "exact": exact.as_ref().map(|(distance, fidelity)| json!({
            "distance": distance,
            "pair_fidelity": fidelity,
            "bound_holds": *distance <= bound,
        })),
    });
    let dot = planned.as_ref().map(|(g, sol)| flow_dot(g, sol));
    if let Some((g, sol)) = &planned {
        result["flow"] = flow_json(g, sol);
    }
    Ok(Output { result, text, dot })
}

fn concat(cfg: &RunConfig, input: &Input) -> Result<Output, CliError> {
    let doc = document(input)?;
    let net = concat::from_doc(&doc)?;
    let p = cfg.noise_p.clone().unwrap_or_else(Prob::zero);
    let theta = theta_min_cut(&net)?;
    let target = cfg.target.unwrap_or(theta as i64);
    let agg = aggregate_level(&net, target, &p)?;
    let uses = plan_lower_uses(&net, &agg)?;
    let lower_cost = total_lower_cost(&uses);
    let edges: Vec<Value> = net
        .edges
        .iter()
        .enumerate()
        .map(|(i, h)| {
            json!({
                "a": h.a, "b": h.b, "theta": agg.flat.theta[i], "unit_cost": agg.flat.unit_cost[i],
                "psi": agg.psi[i], "delta_target": h.delta_target, "lower": agg.flat.lower[i],
            })
        })
        .collect();
    let result = json!({
        "level": net.level(),
        "total_nodes": net.total_nodes(),
        "Theta": theta,
        "target": agg.solution.net_flow,
        "cost": agg.cost,
        "edges": edges,
        "lower_uses": uses,
        "total_lower_cost": lower_cost,
        "delta": agg.budget.delta,
        "epsilon": agg.budget.epsilon,
        "epsilon_exact": agg.epsilon_exact,
        "bound": agg.budget.bound(),
    });

    let mut text = format!(
        "level {}\nTheta {theta}\ntarget {}\ncost {}\nedges\n",
        net.level(),
        agg.solution.net_flow,
        units(agg.cost)
    );
    for (i, h) in net.edges.iter().enumerate() {
        let _ = writeln!(
            text,
            "  {} -- {}  {}/{} @ {}",
            h.a,
            h.b,
            agg.psi[i],
            agg.flat.theta[i],
            units(agg.flat.unit_cost[i])
        );
    }
    for u in &uses {
        let _ = writeln!(text, "  uses {} -- {}  {} x {}", u.a, u.b, u.uses, units(u.per_use_cost));
    }
    let _ = writeln!(text, "total_lower_cost {}", units(lower_cost));
    let _ = writeln!(text, "delta {}", prob_text(&agg.budget.delta));
    let kind = if agg.epsilon_exact { "exact" } else { "bound" };
    let _ = writeln!(text, "epsilon {} {kind}", prob_text(&agg.budget.epsilon));
    let _ = writeln!(text, "bound {}", prob_text(&agg.budget.bound()));
    let dot = flow_dot(&agg.flat.graph, &agg.solution);
    Ok(Output { result, text, dot: Some(dot) })
}

fn rate(input: &Input) -> Result<Output, CliError> {
    let doc = document(input)?;
    if doc.is_hierarchical() {
        return Err(CliError::validation("rate takes a flat network"));
    }
    let (g, models) = rates::from_doc(&doc)?;
    let r = asymptotic_rate(&g, &models)?;
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .zip(&models)
        .map(|(e, m)| json!({"a": e.a, "b": e.b, "channel": m, "Q": channel_capacity(m), "weight": m.weight()}))
        .collect();
    let mut text = format!("rate {r:.9}\nprivate_rate {r:.9}\nedges\n");
    for (e, m) in g.edges().iter().zip(&models) {
        let _ = writeln!(
            text,
            "  {} -- {}  r {} Q {:.9} weight {:.9}",
            e.a,
            e.b,
            m.rate(),
            channel_capacity(m),
            m.weight()
        );
    }
    let dot = render::dot(&g, |k| EdgeStyle {
        label: format!("{:.3}", models[k].weight()),
        reversed: false,
        active: true,
        highlight: false,
    });
    Ok(Output { result: json!({"rate": r, "private_rate": r, "edges": edges}), text, dot: Some(dot) })
}
