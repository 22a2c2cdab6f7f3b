//! Benders decomposition with feasibility cuts and embedded critical scenarios.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::dc::{assess_plan, BendersCut, FeasibilityResult, PlanAssessment};
use crate::error::{Result, TepError};
use crate::formulation::{
    build_restricted, compute_big_m, new_investment_cost, solve_problem, BigMData, FormulationOptions,
    MonolithicProblem,
};
use crate::lp::{LinearProgram, LpEngine, Relation};
use crate::model::{Network, OperationScenario, TrialPlan};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Rank by total curtailment.
    ShedAmount,
    /// Rank by the number of buses with curtailment.
    ShedSpread,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SelectionCriterion {
    pub mode: SelectionMode,
    pub capacity: usize,
}

impl Default for SelectionCriterion {
    fn default() -> Self {
        SelectionCriterion { mode: SelectionMode::ShedAmount, capacity: 5 }
    }
}

/// Orders infeasible results by the chosen key, descending, ties by scenario
/// id, and returns the first `capacity` positions.
pub fn rank_critical<T: Real>(results: &[FeasibilityResult<T>], criterion: &SelectionCriterion) -> Vec<usize> {
    let mut ranked: Vec<&FeasibilityResult<T>> = results.iter().filter(|r| r.is_infeasible()).collect();
    ranked.sort_by(|a, b| {
        let key = match criterion.mode {
            SelectionMode::ShedAmount => b.shed_total.partial_cmp(&a.shed_total).unwrap_or(std::cmp::Ordering::Equal),
            SelectionMode::ShedSpread => b.shed_bus_count.cmp(&a.shed_bus_count),
        };
        key.then(a.scenario_id.cmp(&b.scenario_id))
    });
    ranked.into_iter().take(criterion.capacity).map(|r| r.scenario).collect()
}

/// Screens `scenarios` at `plan`, solves the feasibility subproblem for the
/// overloaded ones and returns the ranked critical positions.
pub fn select_critical_scenarios<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    plan: &TrialPlan,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
    criterion: &SelectionCriterion,
) -> Result<Vec<usize>> {
    if criterion.capacity == 0 {
        return Ok(Vec::new());
    }
    let assessment = assess_plan(engine, network, plan, scenarios, big_m)?;
    Ok(rank_critical(&assessment.results, criterion))
}

/// A master problem with its index maps.
#[derive(Clone, Debug)]
pub struct MasterProblem<T> {
    pub model: MonolithicProblem<T>,
    pub delta: usize,
    pub cut_rows: Vec<usize>,
}

impl<T: Real> MasterProblem<T> {
    pub fn lp(&self) -> &LinearProgram<T> {
        &self.model.lp
    }
}

fn add_cuts<T: Real>(lp: &mut LinearProgram<T>, invest: &[usize], delta: usize, cuts: &[BendersCut<T>]) -> Vec<usize> {
    cuts.iter()
        .enumerate()
        .map(|(n, cut)| {
            let mut coeffs: Vec<(usize, T)> = cut
                .coefficients
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != T::zero())
                .map(|(k, c)| (invest[k], *c))
                .collect();
            coeffs.push((delta, -T::one()));
            lp.add_row(format!("cut{}_p{}_s{}", n + 1, cut.iteration, cut.scenario_id), coeffs, Relation::Le, -cut.constant())
        })
        .collect()
}

/// `min sum c_k x_k + penalty * delta` subject to one row per cut.
pub fn build_master_basic<T: Real>(network: &Network<T>, cuts: &[BendersCut<T>], penalty: T) -> MasterProblem<T> {
    let mut lp = LinearProgram::new();
    let invest: Vec<usize> =
        network.candidates().iter().map(|c| lp.add_binary(format!("x_c{}", c.id), c.cost)).collect();
    let delta = lp.add_var("delta", T::zero(), T::infinity(), penalty);
    let cut_rows = add_cuts(&mut lp, &invest, delta, cuts);
    let model = MonolithicProblem {
        lp,
        invest,
        blocks: Vec::new(),
        strengthening: Default::default(),
        penalty,
    };
    MasterProblem { model, delta, cut_rows }
}

/// Master with the OPF of the `critical` scenarios embedded, strengthening
/// rows from `options`, and the cut pool bounding the shared `delta`.
pub fn build_master_enhanced<T: Real>(
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    critical: &[usize],
    big_m: &BigMData<T>,
    cuts: &[BendersCut<T>],
    options: &FormulationOptions<T>,
) -> Result<MasterProblem<T>> {
    let mut model = build_restricted(network, scenarios, critical, big_m, options)?;
    let delta = model.lp.add_var("delta", T::zero(), T::infinity(), model.penalty);
    let cut_rows = add_cuts(&mut model.lp, &model.invest, delta, cuts);
    Ok(MasterProblem { model, delta, cut_rows })
}

#[derive(Clone, Debug)]
pub struct BendersConfig<T> {
    pub selection: SelectionCriterion,
    /// Relative MILP gap for master solves.
    pub gap: T,
    pub max_iterations: usize,
    /// Strengthening toggles, penalty, row budget and previously built
    /// candidates.
    pub formulation: FormulationOptions<T>,
    /// Re-select critical scenarios at every trial plan (union with the
    /// current set).
    pub reselect: bool,
    /// Optional cutoff on the master objective, e.g. a greedy plan's cost.
    pub upper_bound: Option<T>,
    /// How many times the penalty is multiplied by ten when the master keeps
    /// returning the same curtailing plan.
    pub max_escalations: usize,
    pub big_m: Option<BigMData<T>>,
}

impl<T: Real> Default for BendersConfig<T> {
    fn default() -> Self {
        BendersConfig {
            selection: SelectionCriterion::default(),
            gap: T::lit(0.03),
            max_iterations: 200,
            formulation: FormulationOptions::default(),
            reselect: false,
            upper_bound: None,
            max_escalations: 4,
            big_m: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub master_objective: T,
    /// Running maximum of the master MILP bounds.
    pub lower_bound: T,
    pub plan_cost: T,
    pub built: Vec<usize>,
    pub max_shed: T,
    pub infeasible: usize,
    pub cuts_added: usize,
    pub cuts_total: usize,
    pub penalty: T,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl<T: Real> IterationRecord<T> {
    /// One log line without timing.
    pub fn line(&self) -> String {
        format!(
            "iter {:>3}  master {:>14.6}  lb {:>14.6}  cost {:>12.4}  max_shed {:>12.6}  infeasible {:>4}  cuts +{} ({})",
            self.iteration,
            self.master_objective.as_f64(),
            self.lower_bound.as_f64(),
            self.plan_cost.as_f64(),
            self.max_shed.as_f64(),
            self.infeasible,
            self.cuts_added,
            self.cuts_total,
        )
    }
}

/// State carried between master iterations.
#[derive(Clone, Debug)]
pub struct MasterState<T> {
    pub cuts: Vec<BendersCut<T>>,
    pub critical: Vec<usize>,
    pub delta: T,
    pub iteration: usize,
    pub incumbent: Option<TrialPlan>,
    pub history: Vec<IterationRecord<T>>,
}

#[derive(Clone, Debug)]
pub struct BendersOutcome<T> {
    pub plan: TrialPlan,
    pub cost: T,
    pub iterations: usize,
    pub lower_bound: T,
    pub master_objective: T,
    pub penalty: T,
    pub state: MasterState<T>,
    pub assessment: PlanAssessment<T>,
}

impl<T: Real> BendersOutcome<T> {
    pub fn log(&self) -> &[IterationRecord<T>] {
        &self.state.history
    }
}

pub fn run_benders<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    config: &BendersConfig<T>,
    initial_cuts: Vec<BendersCut<T>>,
) -> Result<BendersOutcome<T>> {
    run_benders_with(engine, network, scenarios, config, initial_cuts, &mut |_| {})
}

fn names<T: Real>(scenarios: &[OperationScenario<T>], results: &[&FeasibilityResult<T>]) -> String {
    let ids: Vec<String> = results.iter().map(|r| scenarios[r.scenario].id.to_string()).collect();
    ids.join(", ")
}

/// The decomposition loop; `observer` sees every iteration record.
pub fn run_benders_with<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    config: &BendersConfig<T>,
    initial_cuts: Vec<BendersCut<T>>,
    observer: &mut dyn FnMut(&IterationRecord<T>),
) -> Result<BendersOutcome<T>> {
    let start = Instant::now();
    let big_m = config.big_m.clone().unwrap_or_else(|| compute_big_m(network));
    let fixed = &config.formulation.fixed_built;
    let base_plan = TrialPlan::from_built(network.num_candidates(), fixed.iter().copied());
    let critical =
        select_critical_scenarios(engine, network, &base_plan, scenarios, &big_m, &config.selection)?;

    let mut options = config.formulation.clone();
    let mut penalty = options.penalty_for(network);
    let mut state = MasterState {
        cuts: initial_cuts,
        critical,
        delta: T::zero(),
        iteration: 0,
        incumbent: None,
        history: Vec::new(),
    };
    let mut lower_bound = T::neg_infinity();
    let mut seen: BTreeSet<Vec<bool>> = BTreeSet::new();
    let mut escalations = 0;

    loop {
        state.iteration += 1;
        options.penalty = Some(penalty);
        let master = build_master_enhanced(network, scenarios, &state.critical, &big_m, &state.cuts, &options)?;
        let solved = solve_problem(engine, network, &master.model, fixed, config.gap, config.upper_bound)?;
        let mut plan = solved.plan.clone();
        plan.iteration = state.iteration;
        state.delta = solved.milp.primal[master.delta];
        lower_bound = lower_bound.max(solved.milp.bound.min(solved.objective));

        let assessment = assess_plan(engine, network, &plan, scenarios, &big_m)?;
        let infeasible: Vec<&FeasibilityResult<T>> = assessment.infeasible().collect();
        let new_cuts: Vec<BendersCut<T>> =
            infeasible.iter().map(|r| r.cut.clone()).filter(|c| !c.is_trivial()).collect();

        let record = IterationRecord {
            iteration: state.iteration,
            master_objective: solved.objective,
            lower_bound,
            plan_cost: solved.cost,
            built: plan.built().collect(),
            max_shed: assessment.max_shed(),
            infeasible: infeasible.len(),
            cuts_added: new_cuts.len(),
            cuts_total: state.cuts.len() + new_cuts.len(),
            penalty,
            elapsed: start.elapsed(),
        };
        observer(&record);
        state.history.push(record);

        if infeasible.is_empty() {
            state.incumbent = Some(plan.clone());
            return Ok(BendersOutcome {
                cost: new_investment_cost(network, &plan, fixed),
                plan,
                iterations: state.iteration,
                lower_bound,
                master_objective: solved.objective,
                penalty,
                state,
                assessment,
            });
        }

        let repeated = !seen.insert(plan.decisions.clone());
        if repeated {
            if escalations >= config.max_escalations {
                return Err(TepError::Infeasible(format!(
                    "candidates cannot remove curtailment in scenarios {}",
                    names(scenarios, &infeasible)
                )));
            }
            escalations += 1;
            penalty *= T::lit(10.0);
            seen.clear();
        }
        if state.iteration >= config.max_iterations {
            return Err(TepError::Infeasible(format!(
                "iteration limit {} reached with curtailment in scenarios {}",
                config.max_iterations,
                names(scenarios, &infeasible)
            )));
        }
        if config.reselect {
            for p in rank_critical(&assessment.results, &config.selection) {
                if !state.critical.contains(&p) {
                    state.critical.push(p);
                }
            }
        }
        state.incumbent = Some(plan);
        state.cuts.extend(new_cuts);
    }
}
