//! Greedy warm start: repeated restricted MILPs over the most critical
//! scenarios, then removal of redundant circuits with cut harvesting.

use serde::Serialize;

use crate::benders::{rank_critical, SelectionCriterion};
use crate::dc::{assess_plan, screen_scenarios, solve_feasibility_batch, BendersCut, FeasibilityResult};
use crate::error::{Result, TepError};
use crate::formulation::{build_restricted, compute_big_m, new_investment_cost, solve_problem, BigMData, FormulationOptions};
use crate::lp::LpEngine;
use crate::model::{Network, OperationScenario, TrialPlan};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct GreedyConfig<T> {
    pub selection: SelectionCriterion,
    pub gap: T,
    pub max_rounds: usize,
    pub formulation: FormulationOptions<T>,
    /// Penalty multiplications by ten allowed when a round makes no progress.
    pub max_escalations: usize,
    pub big_m: Option<BigMData<T>>,
}

impl<T: Real> Default for GreedyConfig<T> {
    fn default() -> Self {
        GreedyConfig {
            selection: SelectionCriterion::default(),
            gap: T::lit(0.03),
            max_rounds: 100,
            formulation: FormulationOptions::default(),
            max_escalations: 4,
            big_m: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord<T> {
    pub round: usize,
    /// Scenario ids embedded in this round's MILP.
    pub critical: Vec<usize>,
    pub infeasible_before: usize,
    pub built: Vec<usize>,
    pub cost: T,
    pub penalty: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneAction {
    Removed,
    Kept,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PruneRecord<T> {
    pub candidate: usize,
    pub circuit_id: usize,
    pub cost: T,
    pub action: PruneAction,
    /// Scenario ids overloaded by the removal.
    pub overloaded: Vec<usize>,
    pub cuts: usize,
}

impl<T: Real> PruneRecord<T> {
    pub fn line(&self) -> String {
        match self.action {
            PruneAction::Removed => format!("prune circuit {} cost {}: removed", self.circuit_id, self.cost.as_f64()),
            PruneAction::Kept => format!(
                "prune circuit {} cost {}: kept, overloads in scenarios {:?}, {} cuts",
                self.circuit_id,
                self.cost.as_f64(),
                self.overloaded,
                self.cuts
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PruneOutcome<T> {
    pub plan: TrialPlan,
    pub cuts: Vec<BendersCut<T>>,
    pub log: Vec<PruneRecord<T>>,
}

/// Tries to remove built candidates in decreasing cost order (ties: higher
/// index first). A removal is kept when no scenario overloads; otherwise the
/// candidate is restored and a cut is harvested at the removal plan for
/// every infeasible scenario. Candidates in `protected` are never removed.
pub fn prune_redundant<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    plan: &TrialPlan,
    protected: &[usize],
    big_m: &BigMData<T>,
) -> Result<PruneOutcome<T>> {
    let mut current = plan.clone();
    let mut order: Vec<usize> = plan.built().filter(|k| !protected.contains(k)).collect();
    order.sort_by(|&a, &b| {
        network
            .candidate(b)
            .cost
            .partial_cmp(&network.candidate(a).cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.cmp(&a))
    });
    let mut cuts = Vec::new();
    let mut log = Vec::new();
    for k in order {
        let mut trial = current.clone();
        trial.decisions[k] = false;
        let overloaded = screen_scenarios(network, &trial, scenarios)?;
        let c = network.candidate(k);
        if overloaded.is_empty() {
            current = trial;
            log.push(PruneRecord {
                candidate: k,
                circuit_id: c.id,
                cost: c.cost,
                action: PruneAction::Removed,
                overloaded: Vec::new(),
                cuts: 0,
            });
            continue;
        }
        let results = solve_feasibility_batch(engine, network, &trial, scenarios, &overloaded, big_m)?;
        let harvested: Vec<BendersCut<T>> =
            results.iter().filter(|r| r.is_infeasible()).map(|r| r.cut.clone()).collect();
        log.push(PruneRecord {
            candidate: k,
            circuit_id: c.id,
            cost: c.cost,
            action: PruneAction::Kept,
            overloaded: overloaded.iter().map(|&p| scenarios[p].id).collect(),
            cuts: harvested.len(),
        });
        cuts.extend(harvested);
    }
    Ok(PruneOutcome { plan: current, cuts, log })
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome<T> {
    pub plan: TrialPlan,
    pub cost: T,
    pub pre_prune_cost: T,
    pub rounds: Vec<RoundRecord<T>>,
    /// Cuts from scenarios still infeasible after each round.
    pub round_cuts: Vec<BendersCut<T>>,
    pub prune: PruneOutcome<T>,
    pub penalty: T,
}

impl<T: Real> GreedyOutcome<T> {
    /// Every harvested cut, round cuts first.
    pub fn cuts(&self) -> Vec<BendersCut<T>> {
        self.round_cuts.iter().chain(&self.prune.cuts).cloned().collect()
    }
}

fn scenario_ids<T: Real>(results: &[&FeasibilityResult<T>]) -> String {
    results.iter().map(|r| r.scenario_id.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn run_greedy<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    config: &GreedyConfig<T>,
) -> Result<GreedyOutcome<T>> {
    run_greedy_with(engine, network, scenarios, config, &mut |_| {})
}

pub fn run_greedy_with<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    config: &GreedyConfig<T>,
    observer: &mut dyn FnMut(&RoundRecord<T>),
) -> Result<GreedyOutcome<T>> {
    let big_m = config.big_m.clone().unwrap_or_else(|| compute_big_m(network));
    let protected = config.formulation.fixed_built.clone();
    let mut plan = TrialPlan::from_built(network.num_candidates(), protected.iter().copied());
    let mut options = config.formulation.clone();
    let mut penalty = options.penalty_for(network);
    let selection = SelectionCriterion { capacity: config.selection.capacity.max(1), ..config.selection };
    let mut rounds = Vec::new();
    let mut round_cuts = Vec::new();
    let mut escalations = 0;

    loop {
        let assessment = assess_plan(engine, network, &plan, scenarios, &big_m)?;
        let infeasible: Vec<&FeasibilityResult<T>> = assessment.infeasible().collect();
        if infeasible.is_empty() {
            break;
        }
        if !rounds.is_empty() {
            round_cuts.extend(infeasible.iter().map(|r| r.cut.clone()).filter(|c| !c.is_trivial()));
        }
        if rounds.len() >= config.max_rounds {
            return Err(TepError::Infeasible(format!(
                "greedy round limit {} reached with curtailment in scenarios {}",
                config.max_rounds,
                scenario_ids(&infeasible)
            )));
        }
        let critical = rank_critical(&assessment.results, &selection);

        options.penalty = Some(penalty);
        options.fixed_built = plan.built().collect();
        let problem = build_restricted(network, scenarios, &critical, &big_m, &options)?;
        let solved = solve_problem(engine, network, &problem, &options.fixed_built, config.gap, None)?;

        let record = RoundRecord {
            round: rounds.len() + 1,
            critical: critical.iter().map(|&p| scenarios[p].id).collect(),
            infeasible_before: infeasible.len(),
            built: solved.plan.built().collect(),
            cost: new_investment_cost(network, &solved.plan, &protected),
            penalty,
        };
        observer(&record);
        rounds.push(record);

        if solved.plan == plan {
            // Nothing new was built: the MILP preferred curtailment.
            if escalations >= config.max_escalations {
                let stuck: Vec<&FeasibilityResult<T>> =
                    infeasible.into_iter().filter(|r| critical.contains(&r.scenario)).collect();
                return Err(TepError::Infeasible(format!(
                    "candidates cannot remove curtailment in scenarios {}",
                    scenario_ids(&stuck)
                )));
            }
            escalations += 1;
            penalty *= T::lit(10.0);
            continue;
        }
        plan = solved.plan;
        plan.iteration = 0;
    }

    let pre_prune_cost = new_investment_cost(network, &plan, &protected);
    let prune = prune_redundant(engine, network, scenarios, &plan, &protected, &big_m)?;
    let plan = prune.plan.clone();
    Ok(GreedyOutcome {
        cost: new_investment_cost(network, &plan, &protected),
        plan,
        pre_prune_cost,
        rounds,
        round_cuts,
        prune,
        penalty,
    })
}
