use super::*;
use crate::lp::SimplexEngine;
use crate::model::testing::*;
use crate::model::{CircuitStatus, Network};

fn two_bus() -> Network<f64> {
    Network::new(
        vec![bus(1), bus(2)],
        vec![existing(1, 1, 2, 1.0, 80.0), candidate(2, 1, 2, 1.0, 50.0, 10.0)],
        Some(0),
        1.0,
    )
}

#[test]
fn big_m_follows_existing_path() {
    let net = two_bus();
    let m = compute_big_m(&net);
    assert_eq!(m.methods, vec![BigMMethod::PathBound]);
    assert!((m.values[0] - 80.0).abs() < 1e-12);

    // Two-hop path: 1-2 (rating 100, b 2) and 2-3 (rating 60, b 1).
    let net = Network::new(
        vec![bus(1), bus(2), bus(3)],
        vec![existing(1, 1, 2, 2.0, 100.0), existing(2, 2, 3, 1.0, 60.0), candidate(3, 1, 3, 4.0, 50.0, 1.0)],
        Some(0),
        100.0,
    );
    let m = compute_big_m(&net);
    // b_k * (100/200 + 60/100) with b_k = 400.
    assert!((m.values[0] - 400.0 * (0.5 + 0.6)).abs() < 1e-9);
    assert!((m.scaled(10.0).values[0] - 4400.0).abs() < 1e-9);
}

#[test]
fn big_m_falls_back_without_existing_path() {
    let net = Network::new(
        vec![bus(1), bus(2), transshipment(3)],
        vec![existing(1, 1, 2, 1.0, 100.0), candidate(2, 1, 3, 2.0, 50.0, 1.0), candidate(3, 3, 2, 1.0, 50.0, 1.0)],
        Some(0),
        1.0,
    );
    let m = compute_big_m(&net);
    assert_eq!(m.methods, vec![BigMMethod::FallbackGlobal; 2]);
    // Other circuits: 100/1 + 50/1 for the first, 100/1 + 50/2 for the second.
    assert!((m.values[0] - 2.0 * 150.0).abs() < 1e-9);
    assert!((m.values[1] - 125.0).abs() < 1e-9);
    let fixed = compute_big_m_with(&net, &BigMOptions { global_angle_budget: Some(std::f64::consts::PI) });
    assert!((fixed.values[1] - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn bottleneck_row_for_export_bus() {
    let net = Network::new(
        vec![bus(1), bus(2)],
        vec![
            existing(1, 1, 2, 1.0, 300.0),
            candidate(2, 1, 2, 1.0, 150.0, 5.0),
            candidate(3, 1, 2, 1.0, 150.0, 5.0),
        ],
        Some(0),
        1.0,
    );
    let scenarios = vec![scenario(1, &[500.0, 0.0], &[0.0, 500.0]), scenario(2, &[200.0, 0.0], &[0.0, 200.0])];
    let rows = bottleneck_constraints(&net, &scenarios);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.relation, Relation::Ge);
        assert_eq!(r.coeffs, vec![(0, 150.0), (1, 150.0)]);
        assert!((r.rhs - 200.0).abs() < 1e-12);
    }
    let data = bottleneck_data(&net, &scenarios);
    assert_eq!(data.delta_star, vec![500.0, 500.0]);
    assert!(bottleneck_constraints(&net, &scenarios[1..]).is_empty());
}

#[test]
fn connectivity_rows_at_transshipment_bus() {
    let net = Network::new(
        vec![bus(1), bus(2), transshipment(3)],
        vec![existing(1, 1, 2, 1.0, 100.0), candidate(2, 1, 3, 1.0, 50.0, 1.0), candidate(3, 3, 2, 1.0, 50.0, 1.0)],
        Some(0),
        1.0,
    );
    let rows = connectivity_constraints(&net).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].coeffs, vec![(0, 1.0), (1, -1.0)]);
    assert_eq!(rows[1].coeffs, vec![(1, 1.0), (0, -1.0)]);

    let lonely = Network::new(
        vec![bus(1), bus(2), transshipment(3)],
        vec![existing(1, 1, 2, 1.0, 100.0), candidate(2, 1, 3, 1.0, 50.0, 1.0)],
        Some(0),
        1.0,
    );
    match connectivity_constraints(&lonely) {
        Err(TepError::Validation(r)) => assert!(r.has(ViolationCode::IsolatedTransshipment)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn precedence_rows_follow_rank() {
    let mut circuits = vec![existing(1, 1, 2, 1.0, 100.0)];
    for (id, rank) in [(2, 2), (3, 1), (4, 3)] {
        let mut c = candidate(id, 1, 2, 1.0, 50.0, 1.0);
        c.corridor = "1-2".into();
        c.duplicate_rank = rank;
        circuits.push(c);
    }
    let net = Network::new(vec![bus(1), bus(2)], circuits, Some(0), 1.0);
    let rows: Vec<Row<f64>> = precedence_constraints(&net);
    assert_eq!(rows.len(), 2);
    // Rank order is candidate 1 (id 3), 0 (id 2), 2 (id 4).
    assert_eq!(rows[0].coeffs, vec![(0, 1.0), (1, -1.0)]);
    assert_eq!(rows[1].coeffs, vec![(2, 1.0), (0, -1.0)]);
    assert!(net.candidates().iter().all(|c| c.status == CircuitStatus::Candidate));
}

#[test]
fn monolithic_builds_the_needed_line() {
    let net = two_bus();
    let scenarios = vec![scenario(1, &[100.0, 0.0], &[0.0, 100.0]), scenario(2, &[60.0, 0.0], &[0.0, 60.0])];
    let big_m = compute_big_m(&net);
    let out = solve_monolithic(&SimplexEngine::default(), &net, &scenarios, &big_m, &FormulationOptions::default(), 1e-6)
        .unwrap();
    assert_eq!(out.plan.decisions, vec![true]);
    assert_eq!(out.cost, 10.0);
    assert!(out.max_shed < 1e-9);
    assert!((out.objective - 10.0).abs() < 1e-9);

    let problem = build_monolithic(&net, &scenarios, &big_m, &FormulationOptions::default()).unwrap();
    assert_eq!(problem.blocks.len(), 2);
    assert_eq!(problem.lp.num_binaries(), 1);
    assert_eq!(problem.penalty, 100.0);
}

#[test]
fn cheap_penalty_prefers_shedding() {
    let net = two_bus();
    let scenarios = vec![scenario(1, &[100.0, 0.0], &[0.0, 100.0])];
    let options = FormulationOptions { penalty: Some(0.1), ..FormulationOptions::without_strengthening() };
    let out = solve_monolithic(&SimplexEngine::default(), &net, &scenarios, &compute_big_m(&net), &options, 1e-6)
        .unwrap();
    assert_eq!(out.plan.decisions, vec![false]);
    assert!((out.total_shed - 20.0).abs() < 1e-9);
}

#[test]
fn fixed_candidates_are_free_and_built() {
    let net = two_bus();
    let scenarios = vec![scenario(1, &[10.0, 0.0], &[0.0, 10.0])];
    let options = FormulationOptions { fixed_built: vec![0], ..FormulationOptions::default() };
    let out = solve_monolithic(&SimplexEngine::default(), &net, &scenarios, &compute_big_m(&net), &options, 1e-6)
        .unwrap();
    assert_eq!(out.plan.decisions, vec![true]);
    assert_eq!(out.cost, 0.0);
}

#[test]
fn row_budget_is_enforced() {
    let net = two_bus();
    let scenarios: Vec<_> = (1..=10).map(|i| scenario(i, &[10.0, 0.0], &[0.0, 10.0])).collect();
    let options = FormulationOptions { row_budget: 20, ..FormulationOptions::default() };
    match build_monolithic(&net, &scenarios, &compute_big_m(&net), &options) {
        Err(TepError::RowBudget { rows, budget }) => {
            assert_eq!(rows, 10 * rows_per_block(&net));
            assert_eq!(budget, 20);
        }
        other => panic!("unexpected {other:?}"),
    }
}
