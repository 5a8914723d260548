use proptest::prelude::*;
use qagg_core::mincostflow::{best_unit_price_target, cost_curve, min_cost_flow, min_cost_max_flow, FlowError};
use qagg_core::netgraph::{min_cut, NetworkGraph};
use qagg_testkit::{brute_flow_costs, random_graph, rng, GraphSpec};

const SPEC: GraphSpec = GraphSpec { max_nodes: 7, max_edges: 8, max_capacity: 3, max_cost: 5 };

fn check_against_oracle(g: &NetworkGraph) {
    let oracle = brute_flow_costs(g);
    let c = min_cut(g);
    for f in 0..=c {
        let sol = min_cost_flow(g, f as i64).expect("feasible up to the min-cut");
        sol.check(g).expect("solver output satisfies the flow constraints");
        assert_eq!(sol.net_flow, f);
        assert_eq!(Some(sol.total_cost), oracle[f as usize], "F = {f}");
    }
    // nothing above the min-cut is feasible
    assert!(oracle[c as usize + 1..].iter().all(Option::is_none));
    assert!(matches!(min_cost_flow(g, c as i64 + 1), Err(FlowError::InfeasibleTarget { .. })));
    assert_eq!(min_cost_max_flow(g).net_flow, c);
    let curve = cost_curve(g);
    assert_eq!(curve.len() as u64, c + 1);
    for (f, cost) in curve.iter().enumerate() {
        assert_eq!(Some(*cost), oracle[f]);
    }
}

#[test]
fn min_cost_flow_matches_enumeration_on_fixed_corpus() {
    let mut r = rng(2);
    for _ in 0..100 {
        check_against_oracle(&random_graph(&mut r, SPEC));
    }
}

#[test]
fn negative_target_is_rejected() {
    let g = random_graph(&mut rng(3), SPEC);
    assert_eq!(min_cost_flow(&g, -1), Err(FlowError::NegativeTarget(-1)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_cost_flow_is_optimal(seed in any::<u64>()) {
        check_against_oracle(&random_graph(&mut rng(seed), SPEC));
    }

    #[test]
    fn solver_flows_are_canonical(seed in any::<u64>()) {
        let g = random_graph(&mut rng(seed), SPEC);
        let sol = min_cost_max_flow(&g);
        prop_assert!(!sol.has_opposing_flow());
        prop_assert!(sol.edge_flow.iter().zip(g.edges()).all(|(f, e)| *f <= e.capacity));
    }

    #[test]
    fn best_unit_price_is_minimal(seed in any::<u64>()) {
        let g = random_graph(&mut rng(seed), SPEC);
        let oracle = brute_flow_costs(&g);
        match best_unit_price_target(&g) {
            Err(_) => prop_assert_eq!(min_cut(&g), 0),
            Ok((f, sol)) => {
                prop_assert_eq!(sol.net_flow, f);
                for (k, cost) in oracle.iter().enumerate().skip(1) {
                    if let Some(cost) = cost {
                        // sol.total_cost / f <= cost / k
                        prop_assert!(sol.total_cost as u128 * k as u128 <= *cost as u128 * f as u128);
                        if (k as u64) < f {
                            prop_assert!(sol.total_cost as u128 * (k as u128) < *cost as u128 * f as u128);
                        }
                    }
                }
            }
        }
    }
}
