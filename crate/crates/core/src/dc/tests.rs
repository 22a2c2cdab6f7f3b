use super::*;
use crate::formulation::compute_big_m;
use crate::lp::SimplexEngine;
use crate::model::testing::*;
use crate::model::Network;

fn engine() -> SimplexEngine {
    SimplexEngine::default()
}

fn two_bus(existing_rating: Option<f64>, candidate_rating: f64) -> Network<f64> {
    let mut circuits = Vec::new();
    if let Some(r) = existing_rating {
        circuits.push(existing(1, 1, 2, 1.0, r));
    }
    circuits.push(candidate(2, 1, 2, 1.0, candidate_rating, 10.0));
    Network::new(vec![bus(1), bus(2)], circuits, Some(0), 1.0)
}

fn triangle() -> Network<f64> {
    Network::new(
        vec![bus(1), bus(2), bus(3)],
        vec![existing(1, 1, 2, 1.0, 100.0), existing(2, 2, 3, 1.0, 100.0), existing(3, 1, 3, 1.0, 100.0)],
        Some(0),
        1.0,
    )
}

fn feasibility(net: &Network<f64>, plan: &TrialPlan, s: &OperationScenario<f64>) -> FeasibilityResult<f64> {
    solve_feasibility(&engine(), net, plan, s, 0, &compute_big_m(net)).unwrap()
}

#[test]
fn single_line_flow_and_overload() {
    let s = scenario(1, &[100.0, 0.0], &[0.0, 100.0]);
    let ok = two_bus(Some(150.0), 50.0);
    let st = dc_power_flow(&ok, &TrialPlan::empty(1), &s).unwrap();
    assert!((st.flows[0] - 100.0).abs() < 1e-9);
    assert!(st.is_secure());
    assert_eq!(st.flows[1], 0.0);

    let tight = two_bus(Some(80.0), 50.0);
    let st = dc_power_flow(&tight, &TrialPlan::empty(1), &s).unwrap();
    assert_eq!(st.overloads.len(), 1);
    assert!((st.overloads[0].excess - 20.0).abs() < 1e-9);
}

#[test]
fn triangle_splits_two_to_one() {
    let s = scenario(1, &[90.0, 0.0, 0.0], &[0.0, 0.0, 90.0]);
    let st = dc_power_flow(&triangle(), &TrialPlan::empty(0), &s).unwrap();
    assert!((st.flows[2] - 60.0).abs() < 1e-9);
    assert!((st.flows[0] - 30.0).abs() < 1e-9);
    assert!((st.flows[1] - 30.0).abs() < 1e-9);
}

#[test]
fn islanded_injection_is_singular() {
    let net = two_bus(None, 50.0);
    let s = scenario(7, &[100.0, 0.0], &[0.0, 100.0]);
    match dc_power_flow(&net, &TrialPlan::empty(1), &s) {
        Err(TepError::SingularSystem { scenario, .. }) => assert_eq!(scenario, 7),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn screening_keeps_order() {
    let net = two_bus(Some(80.0), 50.0);
    let scenarios = vec![
        scenario(1, &[50.0, 0.0], &[0.0, 50.0]),
        scenario(2, &[100.0, 0.0], &[0.0, 100.0]),
        scenario(3, &[70.0, 0.0], &[0.0, 70.0]),
        scenario(4, &[0.0, 90.0], &[90.0, 0.0]),
    ];
    assert_eq!(screen_scenarios(&net, &TrialPlan::empty(1), &scenarios).unwrap(), vec![1, 3]);
    assert!(screen_scenarios(&net, &TrialPlan::from_built(1, [0]), &scenarios).unwrap().is_empty());
}

#[test]
fn adequate_plan_sheds_nothing() {
    let net = two_bus(Some(80.0), 50.0);
    let s = scenario(1, &[100.0, 0.0], &[0.0, 100.0]);
    let r = feasibility(&net, &TrialPlan::from_built(1, [0]), &s);
    assert!(r.shed_total.abs() < 1e-9);
    assert!(!r.is_infeasible());
    assert!(r.cut.coefficients.iter().all(|c| *c == 0.0));
    // Flows agree with the DC solution.
    let st = dc_power_flow(&net, &TrialPlan::from_built(1, [0]), &s).unwrap();
    for (a, b) in r.flows.iter().zip(&st.flows) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn islanded_load_is_fully_shed() {
    let net = two_bus(None, 60.0);
    let s = scenario(1, &[100.0, 0.0], &[0.0, 100.0]);
    let r = feasibility(&net, &TrialPlan::empty(1), &s);
    assert!((r.shed_total - 100.0).abs() < 1e-9);
    assert_eq!(r.shed_bus_count, 1);
    assert!((r.cut.coefficients[0] + 60.0).abs() < 1e-9);
    // Slope matches the change in curtailment when the candidate is built.
    let built = feasibility(&net, &TrialPlan::from_built(1, [0]), &s);
    assert!((built.shed_total - 40.0).abs() < 1e-9);
    assert!((r.cut.evaluate(&TrialPlan::from_built(1, [0])) - built.shed_total).abs() < 1e-9);
}

#[test]
fn existing_limit_leaves_residual_shed() {
    let net = two_bus(Some(80.0), 50.0);
    let s = scenario(1, &[100.0, 0.0], &[0.0, 100.0]);
    let r = feasibility(&net, &TrialPlan::empty(1), &s);
    assert!((r.shed_total - 20.0).abs() < 1e-9);
    assert!(r.is_infeasible());
    let built = TrialPlan::from_built(1, [0]);
    assert!(r.cut.evaluate(&built) <= feasibility(&net, &built, &s).shed_total + 1e-9);
    assert!(r.cut.evaluate(&built) <= 0.0 + 1e-9);
    assert!((r.cut.evaluate(&TrialPlan::empty(1)) - 20.0).abs() < 1e-12);
}

#[test]
fn cuts_hold_for_every_plan() {
    let (net, scenarios) = mesh();
    let k = net.num_candidates();
    let big_m = compute_big_m(&net);
    let plans: Vec<TrialPlan> = (0..1u64 << k).map(|m| TrialPlan::from_mask(k, m)).collect();
    let w: Vec<Vec<f64>> = plans
        .iter()
        .map(|p| {
            scenarios
                .iter()
                .enumerate()
                .map(|(i, s)| solve_feasibility(&engine(), &net, p, s, i, &big_m).unwrap().shed_total)
                .collect()
        })
        .collect();
    let mut nontrivial = 0;
    for anchor in &plans {
        for (i, s) in scenarios.iter().enumerate() {
            let r = solve_feasibility(&engine(), &net, anchor, s, i, &big_m).unwrap();
            if !r.is_infeasible() {
                continue;
            }
            nontrivial += 1;
            for (p, plan) in plans.iter().enumerate() {
                let bound = r.cut.evaluate(plan);
                assert!(w[p][i] >= bound - 1e-6, "scenario {i} anchor {anchor:?} plan {plan:?}: {} < {bound}", w[p][i]);
            }
        }
    }
    assert!(nontrivial > 10);

}

#[test]
fn closing_a_loop_can_increase_curtailment() {
    // Completing the transshipment route 1-5-4 creates a loop that draws
    // flow onto the weak 2-3 circuit.
    let (net, scenarios) = mesh();
    let big_m = compute_big_m(&net);
    let half = TrialPlan::from_built(5, [3]);
    let full = TrialPlan::from_built(5, [3, 4]);
    let w = |p: &TrialPlan| solve_feasibility(&engine(), &net, p, &scenarios[2], 2, &big_m).unwrap().shed_total;
    assert!(w(&half) < 1e-9);
    assert!(w(&full) > 5.0);
}

#[test]
fn dc_and_lp_agree_on_secure_plans() {
    let (net, scenarios) = mesh();
    let k = net.num_candidates();
    let big_m = compute_big_m(&net);
    for m in 0..1u64 << k {
        let plan = TrialPlan::from_mask(k, m);
        for (i, s) in scenarios.iter().enumerate() {
            let st = dc_power_flow(&net, &plan, s).unwrap();
            let r = solve_feasibility(&engine(), &net, &plan, s, i, &big_m).unwrap();
            assert_eq!(st.is_secure(), !r.is_infeasible(), "plan {m} scenario {i}");
            if st.is_secure() {
                for (a, b) in r.flows.iter().zip(&st.flows) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn non_binding_rows_have_zero_duals() {
    let (net, scenarios) = mesh();
    let big_m = compute_big_m(&net);
    let plan = TrialPlan::from_built(5, [2]);
    for s in &scenarios {
        let (lp, _) = feasibility_lp(&net, &plan, s, &big_m);
        let sol = engine().solve_lp(&lp);
        for (i, row) in lp.rows.iter().enumerate() {
            let slack = (lp.row_activity(i, &sol.primal) - row.rhs).abs();
            if row.relation != crate::lp::Relation::Eq && slack > 1e-6 {
                assert!(sol.duals[i].abs() < 1e-9, "{}", row.name);
            }
        }
    }
}

#[test]
fn assessment_collects_infeasible_scenarios() {
    let (net, scenarios) = mesh();
    let big_m = compute_big_m(&net);
    let a = assess_plan(&engine(), &net, &TrialPlan::empty(5), &scenarios, &big_m).unwrap();
    assert!(!a.is_robust());
    assert_eq!(a.severe.len(), a.results.len());
    for r in a.infeasible() {
        assert!(a.severe.contains(&r.scenario));
    }
    let all = TrialPlan::from_built(5, 0..5);
    let b = assess_plan(&engine(), &net, &all, &scenarios, &big_m).unwrap();
    assert!(b.is_robust(), "{:?}", b.results.iter().map(|r| r.shed_total).collect::<Vec<_>>());
}

#[test]
fn folded_constant_matches_evaluation() {
    let (net, scenarios) = mesh();
    let big_m = compute_big_m(&net);
    let plan = TrialPlan::from_built(5, [1, 3]);
    let r = solve_feasibility(&engine(), &net, &plan, &scenarios[3], 3, &big_m).unwrap();
    let x = TrialPlan::from_built(5, [0, 2, 4]);
    let direct = r.cut.evaluate(&x);
    let folded = r.cut.constant() + x.built().map(|k| r.cut.coefficients[k]).sum::<f64>();
    assert!((direct - folded).abs() < 1e-9);
}
