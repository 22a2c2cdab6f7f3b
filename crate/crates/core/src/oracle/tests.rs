use super::*;
use crate::lp::SimplexEngine;
use crate::model::testing::*;

#[test]
fn enumerates_trap() {
    let (net, sc) = trap();
    let r = brute_force_oracle(&SimplexEngine::default(), &net, &sc, SHED_TOLERANCE).unwrap();
    assert_eq!(r.table.len(), 8);
    assert_eq!(r.optimal_cost, Some(25.0));
    assert_eq!(r.optimal_plans, vec![0b010]);
    assert!(r.table[0].max_shed > 1.0);
}

#[test]
fn refuses_large_sets() {
    let (mut net, sc) = trap();
    let extra: Vec<_> = (0..ORACLE_LIMIT).map(|i| candidate(100 + i, 1, 2, 1.0, 10.0, 1.0)).collect();
    let mut circuits = net.circuits().to_vec();
    circuits.extend(extra);
    net = Network::new(net.buses.clone(), circuits, net.slack_bus, net.base_mva);
    match brute_force_oracle(&SimplexEngine::default(), &net, &sc, SHED_TOLERANCE) {
        Err(TepError::OracleTooLarge { candidates, .. }) => assert_eq!(candidates, ORACLE_LIMIT + 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn frontier_when_nothing_is_robust() {
    let (net, mut sc) = trap();
    sc[0].generation[0] *= 3.0;
    sc[0].demand[1] *= 3.0;
    sc[0].demand[2] *= 3.0;
    let r = brute_force_oracle(&SimplexEngine::default(), &net, &sc, SHED_TOLERANCE).unwrap();
    assert!(r.optimal_plans.is_empty());
    assert!(r.frontier.len() >= 2);
    assert!(r.frontier.windows(2).all(|w| w[0].cost < w[1].cost && w[0].max_shed > w[1].max_shed));
}

#[test]
fn flipped_cut_is_caught() {
    let (net, sc) = mesh();
    let big_m = compute_big_m(&net);
    let engine = SimplexEngine::default();
    let plan = TrialPlan::empty(net.num_candidates());
    let p = (0..sc.len())
        .find(|&p| solve_feasibility(&engine, &net, &plan, &sc[p], p, &big_m).unwrap().is_infeasible())
        .unwrap();
    let r = solve_feasibility(&engine, &net, &plan, &sc[p], p, &big_m).unwrap();
    assert!(find_cut_violation(&engine, &net, &sc, &big_m, &r.cut, 100, 1).unwrap().is_none());
    let mut flipped = r.cut.clone();
    for c in &mut flipped.coefficients {
        *c = -*c;
    }
    assert!(find_cut_violation(&engine, &net, &sc, &big_m, &flipped, 100, 1).unwrap().is_some());
}

#[test]
fn fixtures_load() {
    let all = fixtures::<f64>().unwrap();
    assert_eq!(all.len(), 4);
    for fx in &all {
        assert!(!fx.scenarios.is_empty(), "{}", fx.name);
    }
}

#[test]
fn halved_big_m_binds() {
    let mut hits = 0;
    for fx in fixtures::<f64>().unwrap() {
        let net = fx.network();
        let full = compute_big_m(net);
        let half = full.scaled(0.5);
        for &mask in &fx.expected.optimal_plans {
            let plan = TrialPlan::from_mask(net.num_candidates(), mask);
            assert!(binding_big_m(net, &plan, &fx.scenarios, &full).unwrap().is_empty(), "{}", fx.name);
            hits += binding_big_m(net, &plan, &fx.scenarios, &half).unwrap().len();
        }
    }
    assert!(hits > 0);
}

#[test]
fn expected_files_match_enumeration() {
    let engine = SimplexEngine::default();
    for fx in fixtures::<f64>().unwrap() {
        let r = brute_force_oracle(&engine, fx.network(), &fx.scenarios, SHED_TOLERANCE).unwrap();
        assert_eq!(r.optimal_plans, fx.expected.optimal_plans, "{}", fx.name);
        assert_eq!(r.optimal_cost, fx.expected.optimal_cost, "{}", fx.name);
    }
}

#[test]
fn property_suites_pass() {
    let report = check_properties(&SimplexEngine::default(), "all", &fixtures::<f64>().unwrap()).unwrap();
    assert_eq!(report.checks.len(), SUITES.len() * 4);
    assert!(report.passed(), "{:#?}", report.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    assert!(check_properties::<f64, _>(&SimplexEngine::default(), "nonsense", &[]).is_err());
}

#[test]
fn no_candidates_gives_the_empty_plan() {
    let net = Network::new(vec![bus(1), bus(2)], vec![existing(1, 1, 2, 1.0, 100.0)], Some(0), 1.0);
    let sc = vec![scenario(1, &[80.0, 0.0], &[0.0, 80.0])];
    let r = brute_force_oracle(&SimplexEngine::default(), &net, &sc, SHED_TOLERANCE).unwrap();
    assert_eq!(r.optimal_plans, vec![0]);
    assert_eq!(r.optimal_cost, Some(0.0));
}

#[test]
fn islanded_load_needs_its_candidate() {
    let net = Network::new(vec![bus(1), bus(2)], vec![candidate(1, 1, 2, 1.0, 150.0, 10.0)], Some(0), 1.0);
    let sc = vec![scenario(1, &[100.0, 0.0], &[0.0, 100.0])];
    let r = brute_force_oracle(&SimplexEngine::default(), &net, &sc, SHED_TOLERANCE).unwrap();
    assert_eq!(r.optimal_plans, vec![1]);
    assert!((r.table[0].max_shed - 100.0).abs() < 1e-6);
}

#[test]
fn robust_entries_screen_clean() {
    let fx = load_fixture::<f64>("six_bus").unwrap();
    let net = fx.network();
    for e in fx.expected.table.iter().filter(|e| e.max_shed <= SHED_TOLERANCE) {
        let plan = TrialPlan::from_mask(net.num_candidates(), e.mask);
        assert!(screen_scenarios(net, &plan, &fx.scenarios).unwrap().is_empty(), "mask {}", e.mask);
    }
}
