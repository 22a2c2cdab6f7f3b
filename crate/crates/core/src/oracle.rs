//! Brute-force ground truth and invariant checks over shipped fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benders::{run_benders, BendersConfig, SelectionCriterion};
use crate::dc::{dc_power_flow, screen_scenarios, solve_feasibility, BendersCut, SHED_TOLERANCE};
use crate::error::{Result, TepError};
use crate::formulation::{compute_big_m, BigMData};
use crate::greedy::{prune_redundant, run_greedy, GreedyConfig};
use crate::io::{parse_network, parse_scenarios, NetworkFile};
use crate::lp::LpEngine;
use crate::model::{prepare, Network, OperationScenario, TrialPlan};
use crate::scalar::Real;

/// Largest candidate count the oracle enumerates.
pub const ORACLE_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    /// Bit `k` set when candidate `k` is built.
    pub mask: u64,
    pub cost: f64,
    pub max_shed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Masks of every cost-minimal robust plan, ascending.
    pub optimal_plans: Vec<u64>,
    pub optimal_cost: Option<f64>,
    /// Cost/max-shed Pareto frontier when no plan is robust.
    pub frontier: Vec<PlanEntry>,
    /// One entry per plan, by mask.
    pub table: Vec<PlanEntry>,
}

impl OracleResult {
    pub fn is_optimal(&self, plan: &TrialPlan) -> bool {
        self.optimal_plans.contains(&plan_mask(plan))
    }

    pub fn entry(&self, plan: &TrialPlan) -> &PlanEntry {
        &self.table[plan_mask(plan) as usize]
    }
}

pub fn plan_mask(plan: &TrialPlan) -> u64 {
    plan.built().fold(0, |m, k| m | (1 << k))
}

/// Maximum curtailment of `plan` over `scenarios`: screening first, the
/// feasibility LP only for overloaded scenarios.
pub fn max_shed<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    plan: &TrialPlan,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for p in screen_scenarios(network, plan, scenarios)? {
        let r = solve_feasibility(engine, network, plan, &scenarios[p], p, big_m)?;
        worst = worst.max(r.shed_total);
    }
    Ok(worst)
}

/// Enumerates all `2^K` plans.
pub fn brute_force_oracle<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    tolerance: T,
) -> Result<OracleResult> {
    let k = network.num_candidates();
    if k > ORACLE_LIMIT {
        return Err(TepError::OracleTooLarge { candidates: k, limit: ORACLE_LIMIT });
    }
    let big_m = compute_big_m(network);
    let table: Vec<PlanEntry> = (0..1u64 << k)
        .into_par_iter()
        .map(|mask| {
            let plan = TrialPlan::from_mask(k, mask);
            let shed = max_shed(engine, network, &plan, scenarios, &big_m)?;
            Ok(PlanEntry { mask, cost: network.plan_cost(&plan).as_f64(), max_shed: shed.as_f64() })
        })
        .collect::<Result<Vec<_>>>()?;

    let tol = tolerance.as_f64();
    let best = table.iter().filter(|e| e.max_shed <= tol).map(|e| e.cost).fold(f64::INFINITY, f64::min);
    let (optimal_plans, optimal_cost, frontier) = if best.is_finite() {
        let eps = 1e-9 * best.abs().max(1.0);
        let plans = table.iter().filter(|e| e.max_shed <= tol && e.cost <= best + eps).map(|e| e.mask).collect();
        (plans, Some(best), Vec::new())
    } else {
        let mut sorted: Vec<&PlanEntry> = table.iter().collect();
        sorted.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.max_shed.total_cmp(&b.max_shed)).then(a.mask.cmp(&b.mask)));
        let mut frontier: Vec<PlanEntry> = Vec::new();
        for e in sorted {
            if frontier.last().is_none_or(|f| e.max_shed < f.max_shed - 1e-9) {
                frontier.push(e.clone());
            }
        }
        (Vec::new(), None, frontier)
    };
    Ok(OracleResult { optimal_plans, optimal_cost, frontier, table })
}

/// A named network and scenario set shipped with the crate.
#[derive(Clone, Debug)]
pub struct Fixture<T> {
    pub name: &'static str,
    pub file: NetworkFile<T>,
    pub scenarios: Vec<OperationScenario<T>>,
    pub expected: OracleResult,
}

impl<T: Real> Fixture<T> {
    pub fn network(&self) -> &Network<T> {
        &self.file.network
    }
}

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(
            (
                $name,
                include_str!(concat!("../fixtures/", $name, "/network.toml")),
                include_str!(concat!("../fixtures/", $name, "/scenarios.csv")),
                include_str!(concat!("../fixtures/", $name, "/expected.json")),
            ),
        )*]
    };
}

const SHIPPED: &[(&str, &str, &str, &str)] = shipped!("two_bus", "triangle", "trap", "six_bus");

/// Names of the shipped fixtures.
pub fn fixture_names() -> Vec<&'static str> {
    SHIPPED.iter().map(|f| f.0).collect()
}

/// Raw file contents of a shipped fixture: network, scenarios, expected.
pub fn fixture_sources(name: &str) -> Option<(&'static str, &'static str, &'static str)> {
    SHIPPED.iter().find(|f| f.0 == name).map(|f| (f.1, f.2, f.3))
}

pub fn load_fixture<T: Real>(name: &str) -> Result<Fixture<T>> {
    let &(name, net, sc, exp) = SHIPPED
        .iter()
        .find(|f| f.0 == name)
        .ok_or_else(|| TepError::Parse { location: "fixture".into(), message: format!("unknown fixture '{name}'") })?;
    let mut file = parse_network::<T>(net)?;
    let scenarios = parse_scenarios(&file.network, sc.as_bytes())?;
    file.network = prepare(file.network, &scenarios)?;
    let expected = serde_json::from_str(exp)
        .map_err(|e| TepError::Parse { location: format!("{name}/expected.json"), message: e.to_string() })?;
    Ok(Fixture { name, file, scenarios, expected })
}

pub fn fixtures<T: Real>() -> Result<Vec<Fixture<T>>> {
    fixture_names().into_iter().map(load_fixture).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: String,
    pub fixture: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<CheckOutcome>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, suite: &str, fixture: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome { suite: suite.into(), fixture: fixture.into(), passed, detail: detail.into() });
    }
}

pub const SUITES: &[&str] = &["cut-validity", "bound-monotonicity", "big-m", "pruning", "symmetry", "connectivity"];

/// A plan violating `cut`, if any of `samples` random plans (plus the
/// anchor's neighbours) does.
pub fn find_cut_violation<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
    cut: &BendersCut<T>,
    samples: usize,
    seed: u64,
) -> Result<Option<(TrialPlan, T, T)>> {
    let k = network.num_candidates();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plans: Vec<TrialPlan> =
        (0..samples).map(|_| TrialPlan { decisions: (0..k).map(|_| rng.random_bool(0.5)).collect(), iteration: 0 }).collect();
    for j in 0..k {
        let mut p = cut.anchor.clone();
        p.decisions[j] = !p.decisions[j];
        plans.push(p);
    }
    let found = plans
        .par_iter()
        .map(|plan| -> Result<Option<(TrialPlan, T, T)>> {
            let w = solve_feasibility(engine, network, plan, &scenarios[cut.scenario], cut.scenario, big_m)?.shed_total;
            let bound = cut.evaluate(plan);
            let tol = T::lit(1e-6) * (T::one() + bound.abs());
            Ok((w < bound - tol).then(|| (plan.clone(), w, bound)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().next())
}

/// Scenario ids and candidates where an unbuilt candidate's angle spread at
/// `plan` exceeds its disjunctive constant.
pub fn binding_big_m<T: Real>(
    network: &Network<T>,
    plan: &TrialPlan,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
) -> Result<Vec<(usize, usize)>> {
    let reference = network.reference_bus(None);
    let mut out = Vec::new();
    for s in scenarios {
        let st = dc_power_flow(network, plan, s)?;
        // Buses outside the reference component carry angle zero by
        // convention; only connected spreads are meaningful.
        let connected = connected_component(network, plan, reference);
        for (k, c) in network.candidates().iter().enumerate() {
            if plan.is_built(k) || !connected[c.from] || !connected[c.to] {
                continue;
            }
            let spread = (network.flow_factor(c) * (st.angles[c.from] - st.angles[c.to])).abs();
            if spread > big_m.values[k] * (T::one() + T::lit(1e-9)) + T::lit(1e-9) {
                out.push((s.id, k));
            }
        }
    }
    Ok(out)
}

fn connected_component<T: Real>(network: &Network<T>, plan: &TrialPlan, root: usize) -> Vec<bool> {
    let ne = network.num_existing();
    let mut seen = vec![false; network.num_buses()];
    seen[root] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for (n, c) in network.circuits().iter().enumerate() {
            if n >= ne && !plan.is_built(n - ne) {
                continue;
            }
            if seen[c.from] != seen[c.to] {
                seen[c.from] = true;
                seen[c.to] = true;
                changed = true;
            }
        }
    }
    seen
}

/// Benders with an empty critical set, so every plan change comes from cuts.
pub fn cut_driven<T: Real>() -> BendersConfig<T> {
    BendersConfig {
        selection: SelectionCriterion { capacity: 0, ..SelectionCriterion::default() },
        gap: T::lit(1e-6),
        ..BendersConfig::default()
    }
}

/// Runs the named suite (or all suites for `"all"`) over `fixtures`.
pub fn check_properties<T: Real, E: LpEngine<T>>(
    engine: &E,
    suite: &str,
    fixtures: &[Fixture<T>],
) -> Result<PropertyReport> {
    let suites: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(TepError::Parse { location: "suite".into(), message: format!("unknown suite '{suite}'") });
    };
    let mut report = PropertyReport::default();
    for fx in fixtures {
        let net = fx.network();
        let big_m = compute_big_m(net);
        let tol = T::lit(SHED_TOLERANCE);
        for &s in &suites {
            match s {
                "cut-validity" => {
                    let out = run_benders(engine, net, &fx.scenarios, &cut_driven(), Vec::new())?;
                    let mut bad = None;
                    for (i, cut) in out.state.cuts.iter().enumerate() {
                        if let Some(v) = find_cut_violation(engine, net, &fx.scenarios, &big_m, cut, 100, i as u64)? {
                            bad = Some((i, v));
                            break;
                        }
                    }
                    match bad {
                        None => report.push(s, fx.name, true, format!("{} cuts checked", out.state.cuts.len())),
                        Some((i, (plan, w, bound))) => report.push(
                            s,
                            fx.name,
                            false,
                            format!("cut {i} at plan {:?}: shed {} < bound {}", plan.decisions, w.as_f64(), bound.as_f64()),
                        ),
                    }
                }
                "bound-monotonicity" => {
                    let out = run_benders(engine, net, &fx.scenarios, &cut_driven(), Vec::new())?;
                    let monotone = out.log().windows(2).all(|w| w[1].lower_bound >= w[0].lower_bound);
                    let slack = out.penalty * tol * T::lit(fx.scenarios.len() as f64);
                    let bounded = out.lower_bound <= out.cost + slack;
                    report.push(
                        s,
                        fx.name,
                        monotone && bounded,
                        format!("{} iterations, lb {} cost {}", out.iterations, out.lower_bound.as_f64(), out.cost.as_f64()),
                    );
                }
                "big-m" => {
                    let mut hits = Vec::new();
                    for &mask in &fx.expected.optimal_plans {
                        let plan = TrialPlan::from_mask(net.num_candidates(), mask);
                        hits.extend(binding_big_m(net, &plan, &fx.scenarios, &big_m)?);
                    }
                    report.push(s, fx.name, hits.is_empty(), format!("binding (scenario, candidate): {hits:?}"));
                }
                "pruning" => {
                    let all = TrialPlan::from_built(net.num_candidates(), 0..net.num_candidates());
                    let start = if max_shed(engine, net, &all, &fx.scenarios, &big_m)? <= tol {
                        all
                    } else {
                        match fx.expected.optimal_plans.first() {
                            Some(&m) => TrialPlan::from_mask(net.num_candidates(), m),
                            None => {
                                report.push(s, fx.name, true, "no robust plan");
                                continue;
                            }
                        }
                    };
                    let pruned = prune_redundant(engine, net, &fx.scenarios, &start, &[], &big_m)?;
                    let shed = max_shed(engine, net, &pruned.plan, &fx.scenarios, &big_m)?;
                    report.push(
                        s,
                        fx.name,
                        shed <= tol,
                        format!("{} -> {} built, max shed {}", start.num_built(), pruned.plan.num_built(), shed.as_f64()),
                    );
                }
                "symmetry" | "connectivity" => {
                    let greedy = run_greedy(engine, net, &fx.scenarios, &GreedyConfig::default());
                    let config = BendersConfig::default();
                    let benders = run_benders(engine, net, &fx.scenarios, &config, Vec::new());
                    let mut problems = Vec::new();
                    if let Ok(out) = &benders {
                        if s == "symmetry" {
                            for group in net.corridors() {
                                for pair in group.windows(2) {
                                    if out.plan.is_built(pair[1]) && !out.plan.is_built(pair[0]) {
                                        problems.push(format!("corridor order {pair:?}"));
                                    }
                                }
                            }
                        } else {
                            for n in net.transshipment_buses() {
                                let built = net.candidates_at(n).iter().filter(|&&k| out.plan.is_built(k)).count();
                                if built == 1 {
                                    problems.push(format!("bus {} has one built candidate", net.buses[n].id));
                                }
                            }
                        }
                    }
                    let detail = match (&greedy, &benders) {
                        (_, Err(e)) => format!("benders failed: {e}"),
                        (Err(e), _) => format!("greedy failed: {e}"),
                        _ if problems.is_empty() => "ok".into(),
                        _ => problems.join("; "),
                    };
                    report.push(s, fx.name, problems.is_empty() && benders.is_ok(), detail);
                }
                _ => unreachable!(),
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
