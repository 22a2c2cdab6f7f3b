//! Monolithic multi-scenario MILP, its strengthening rows, and big-M sizing.
//!
//! The DC OPF block for one scenario is shared by every model in the crate:
//! the monolithic problem and the enhanced master embed it with investment
//! columns, the feasibility subproblem embeds it with the plan fixed.
//!
//! Power balance is written as `inflow - outflow + r - z = d - g`, i.e.
//! `-(A f) + r - z = d - g` with `A` the incidence matrix (+1 at the sending
//! bus), `r` the penalised load curtailment and `z` a cost-free generation
//! spill bounded by `g`.

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};

use crate::error::{Result, TepError};
use crate::lp::{LinearProgram, LpEngine, MilpSolution, MilpStatus, Relation, Row};
use crate::model::{Network, OperationScenario, TrialPlan, ValidationReport, Violation, ViolationCode, Subject};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BigMMethod {
    /// Shortest existing-circuit path between the terminals.
    PathBound,
    /// No existing path: global angle budget.
    FallbackGlobal,
}

/// Per-candidate disjunctive constants in MW.
#[derive(Clone, Debug, PartialEq)]
pub struct BigMData<T> {
    pub values: Vec<T>,
    pub methods: Vec<BigMMethod>,
}

impl<T: Real> BigMData<T> {
    pub fn scaled(&self, factor: T) -> Self {
        BigMData { values: self.values.iter().map(|m| *m * factor).collect(), methods: self.methods.clone() }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BigMOptions<T> {
    /// Angle budget (radians) for candidates without an existing path. When
    /// unset, the sum of `rating / flow_factor` over all other circuits is
    /// used, which bounds the angle spread along any simple path.
    pub global_angle_budget: Option<T>,
}

pub fn compute_big_m<T: Real>(network: &Network<T>) -> BigMData<T> {
    compute_big_m_with(network, &BigMOptions::default())
}

/// `M_k = b_k * L_ij`, with `L_ij` the shortest path between the terminals of
/// candidate `k` over existing circuits, edge weight `rating / b`. Existing
/// circuits are always in service, so the bound holds for every plan.
pub fn compute_big_m_with<T: Real>(network: &Network<T>, options: &BigMOptions<T>) -> BigMData<T> {
    let mut graph: UnGraph<(), T> = UnGraph::new_undirected();
    let nodes: Vec<NodeIndex> = (0..network.num_buses()).map(|_| graph.add_node(())).collect();
    for c in network.existing() {
        graph.add_edge(nodes[c.from], nodes[c.to], c.rating / network.flow_factor(c));
    }
    let budgets: Vec<T> = network.circuits().iter().map(|c| c.rating / network.flow_factor(c)).collect();
    let total_budget: T = budgets.iter().copied().sum();

    let mut values = Vec::with_capacity(network.num_candidates());
    let mut methods = Vec::with_capacity(network.num_candidates());
    for (k, cand) in network.candidates().iter().enumerate() {
        let b = network.flow_factor(cand);
        let dist = dijkstra(&graph, nodes[cand.from], Some(nodes[cand.to]), |e| *e.weight());
        match dist.get(&nodes[cand.to]) {
            Some(&l) => {
                values.push(b * l);
                methods.push(BigMMethod::PathBound);
            }
            None => {
                let own = budgets[network.num_existing() + k];
                let budget = options.global_angle_budget.unwrap_or(total_budget - own);
                values.push(b * budget);
                methods.push(BigMMethod::FallbackGlobal);
            }
        }
    }
    BigMData { values, methods }
}

/// Largest net injection magnitude per bus over the scenarios, with the
/// incident circuit sets.
#[derive(Clone, Debug, PartialEq)]
pub struct BottleneckData<T> {
    pub delta_star: Vec<T>,
    /// Id of the first scenario attaining `delta_star` at each bus.
    pub attained: Vec<Option<usize>>,
    pub candidates: Vec<Vec<usize>>,
    pub existing: Vec<Vec<usize>>,
}

pub fn bottleneck_data<T: Real>(network: &Network<T>, scenarios: &[OperationScenario<T>]) -> BottleneckData<T> {
    let nb = network.num_buses();
    let mut delta_star = vec![T::zero(); nb];
    let mut attained = vec![None; nb];
    for s in scenarios {
        for m in 0..nb {
            let net = (s.generation[m] - s.demand[m]).abs();
            if net > delta_star[m] {
                delta_star[m] = net;
                attained[m] = Some(s.id);
            }
        }
    }
    BottleneckData {
        delta_star,
        attained,
        candidates: (0..nb).map(|m| network.candidates_at(m)).collect(),
        existing: (0..nb).map(|m| network.existing_at(m)).collect(),
    }
}

// Strengthening rows are expressed over candidate indices; `add_candidate_rows`
// maps them onto LP columns.

/// Export/import bottleneck rows: `sum_{K_m} rating_k x_k >= delta*_m - sum_{J_m} rating_n`
/// for every bus whose existing incident capacity is below `delta*_m`.
pub fn bottleneck_constraints<T: Real>(network: &Network<T>, scenarios: &[OperationScenario<T>]) -> Vec<Row<T>> {
    let data = bottleneck_data(network, scenarios);
    let mut rows = Vec::new();
    for m in 0..network.num_buses() {
        let existing_cap: T = data.existing[m].iter().map(|&j| network.existing()[j].rating).sum();
        let need = data.delta_star[m] - existing_cap;
        if need <= T::primal_tol() * (T::one() + data.delta_star[m]) {
            continue;
        }
        rows.push(Row {
            name: format!("bottleneck_b{}_s{}", network.buses[m].id, data.attained[m].unwrap_or(0)),
            coeffs: data.candidates[m].iter().map(|&k| (k, network.candidate(k).rating)).collect(),
            relation: Relation::Ge,
            rhs: need,
        });
    }
    rows
}

/// Disconnected-path rows: at each transshipment bus `n`, for every incident
/// candidate `i`, `x_i <= sum_{j in D_n, j != i} x_j`.
pub fn connectivity_constraints<T: Real>(network: &Network<T>) -> Result<Vec<Row<T>>> {
    let mut rows = Vec::new();
    let mut report = ValidationReport::default();
    for n in network.transshipment_buses() {
        let incident = network.candidates_at(n);
        if incident.len() < 2 {
            report.violations.push(Violation {
                code: ViolationCode::IsolatedTransshipment,
                subject: Subject::Bus(network.buses[n].id),
                detail: format!("{} incident candidates", incident.len()),
            });
            continue;
        }
        for &i in &incident {
            let mut coeffs = vec![(i, T::one())];
            coeffs.extend(incident.iter().filter(|&&j| j != i).map(|&j| (j, -T::one())));
            rows.push(Row {
                name: format!("connect_b{}_k{}", network.buses[n].id, network.candidate(i).id),
                coeffs,
                relation: Relation::Le,
                rhs: T::zero(),
            });
        }
    }
    report.into_result()?;
    Ok(rows)
}

/// Symmetry-breaking rows `x^{r+1} <= x^r` for consecutive duplicates.
pub fn precedence_constraints<T: Real>(network: &Network<T>) -> Vec<Row<T>> {
    let mut rows = Vec::new();
    for group in network.corridors() {
        for pair in group.windows(2) {
            rows.push(Row {
                name: format!("precede_k{}_k{}", network.candidate(pair[1]).id, network.candidate(pair[0]).id),
                coeffs: vec![(pair[1], T::one()), (pair[0], -T::one())],
                relation: Relation::Le,
                rhs: T::zero(),
            });
        }
    }
    rows
}

/// Appends candidate-indexed rows, returning their LP row indices.
pub fn add_candidate_rows<T: Real>(lp: &mut LinearProgram<T>, rows: &[Row<T>], invest: &[usize]) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let coeffs = r.coeffs.iter().map(|&(k, a)| (invest[k], a)).collect();
            lp.add_row(r.name.clone(), coeffs, r.relation, r.rhs)
        })
        .collect()
}

/// Default load-curtailment penalty: ten times the largest candidate cost per
/// MW (10 per MW when no candidate has a cost).
pub fn default_penalty<T: Real>(network: &Network<T>) -> T {
    let c = network.max_candidate_cost();
    T::lit(10.0) * if c > T::zero() { c } else { T::one() }
}

/// How the investment decisions enter an operation block.
#[derive(Clone, Copy, Debug)]
pub enum Investment<'a> {
    /// LP columns of the binaries `x_k`.
    Columns(&'a [usize]),
    /// A trial plan treated as data.
    Fixed(&'a TrialPlan),
}

/// Column and row indices of one scenario's OPF block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationBlock {
    /// Position of the scenario in the input slice.
    pub scenario: usize,
    /// Flow column per circuit, existing first.
    pub flows: Vec<usize>,
    pub angles: Vec<usize>,
    pub shed: Vec<usize>,
    /// Spill column at buses with positive generation.
    pub spill: Vec<Option<usize>>,
    pub balance: Vec<usize>,
    pub kirchhoff: Vec<usize>,
    /// `(+, -)` rows of `|f_k - b_k dtheta_k| <= M_k (1 - x_k)`.
    pub disjunctive: Vec<(usize, usize)>,
    /// `(+, -)` rows of `|f_k| <= rating_k x_k`.
    pub capacity: Vec<(usize, usize)>,
}

impl OperationBlock {
    pub fn total_shed<T: Real>(&self, x: &[T]) -> T {
        self.shed.iter().map(|&c| x[c]).sum()
    }
}

pub fn rows_per_block<T: Real>(network: &Network<T>) -> usize {
    network.num_buses() + network.num_existing() + 4 * network.num_candidates()
}

/// Adds one scenario's DC OPF with load curtailment at `shed_cost` per MW.
pub fn add_operation_block<T: Real>(
    lp: &mut LinearProgram<T>,
    network: &Network<T>,
    scenario: &OperationScenario<T>,
    position: usize,
    big_m: &BigMData<T>,
    investment: Investment<'_>,
    shed_cost: T,
) -> OperationBlock {
    let s = scenario.id;
    let nb = network.num_buses();
    let reference = network.reference_bus(None);
    let ne = network.num_existing();

    let flows: Vec<usize> = network
        .circuits()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if n < ne {
                lp.add_var(format!("f_s{s}_c{}", c.id), -c.rating, c.rating, T::zero())
            } else {
                lp.add_free(format!("f_s{s}_c{}", c.id), T::zero())
            }
        })
        .collect();
    let angles: Vec<usize> = (0..nb)
        .map(|i| {
            let name = format!("th_s{s}_b{}", network.buses[i].id);
            if i == reference {
                lp.add_var(name, T::zero(), T::zero(), T::zero())
            } else {
                lp.add_free(name, T::zero())
            }
        })
        .collect();
    let shed: Vec<usize> = (0..nb)
        .map(|i| lp.add_var(format!("r_s{s}_b{}", network.buses[i].id), T::zero(), scenario.demand[i], shed_cost))
        .collect();

    let spill: Vec<Option<usize>> = (0..nb)
        .map(|i| {
            let g = scenario.generation[i];
            (g > T::zero()).then(|| lp.add_var(format!("z_s{s}_b{}", network.buses[i].id), T::zero(), g, T::zero()))
        })
        .collect();

    let mut balance_terms: Vec<Vec<(usize, T)>> = (0..nb)
        .map(|i| {
            let mut terms = vec![(shed[i], T::one())];
            if let Some(z) = spill[i] {
                terms.push((z, -T::one()));
            }
            terms
        })
        .collect();
    for (n, c) in network.circuits().iter().enumerate() {
        balance_terms[c.from].push((flows[n], -T::one()));
        balance_terms[c.to].push((flows[n], T::one()));
    }
    let balance: Vec<usize> = balance_terms
        .into_iter()
        .enumerate()
        .map(|(i, terms)| {
            let rhs = scenario.demand[i] - scenario.generation[i];
            lp.add_row(format!("bal_s{s}_b{}", network.buses[i].id), terms, Relation::Eq, rhs)
        })
        .collect();

    let kirchhoff: Vec<usize> = network
        .existing()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let b = network.flow_factor(c);
            lp.add_row(
                format!("kvl_s{s}_c{}", c.id),
                vec![(flows[j], T::one()), (angles[c.from], -b), (angles[c.to], b)],
                Relation::Eq,
                T::zero(),
            )
        })
        .collect();

    let mut disjunctive = Vec::with_capacity(network.num_candidates());
    let mut capacity = Vec::with_capacity(network.num_candidates());
    for (k, c) in network.candidates().iter().enumerate() {
        let b = network.flow_factor(c);
        let f = flows[ne + k];
        let m = big_m.values[k];
        let (tf, tt) = (angles[c.from], angles[c.to]);
        let plus = vec![(f, T::one()), (tf, -b), (tt, b)];
        let minus = vec![(f, -T::one()), (tf, b), (tt, -b)];
        let cap_plus = vec![(f, T::one())];
        let cap_minus = vec![(f, -T::one())];
        let pair = match investment {
            Investment::Columns(cols) => {
                let x = cols[k];
                let mut p = plus;
                p.push((x, m));
                let mut q = minus;
                q.push((x, m));
                let mut cp = cap_plus;
                cp.push((x, -c.rating));
                let mut cm = cap_minus;
                cm.push((x, -c.rating));
                (
                    (
                        lp.add_row(format!("disj_p_s{s}_c{}", c.id), p, Relation::Le, m),
                        lp.add_row(format!("disj_m_s{s}_c{}", c.id), q, Relation::Le, m),
                    ),
                    (
                        lp.add_row(format!("cap_p_s{s}_c{}", c.id), cp, Relation::Le, T::zero()),
                        lp.add_row(format!("cap_m_s{s}_c{}", c.id), cm, Relation::Le, T::zero()),
                    ),
                )
            }
            Investment::Fixed(plan) => {
                let xk = if plan.is_built(k) { T::one() } else { T::zero() };
                let slack = m * (T::one() - xk);
                let cap = c.rating * xk;
                (
                    (
                        lp.add_row(format!("disj_p_s{s}_c{}", c.id), plus, Relation::Le, slack),
                        lp.add_row(format!("disj_m_s{s}_c{}", c.id), minus, Relation::Le, slack),
                    ),
                    (
                        lp.add_row(format!("cap_p_s{s}_c{}", c.id), cap_plus, Relation::Le, cap),
                        lp.add_row(format!("cap_m_s{s}_c{}", c.id), cap_minus, Relation::Le, cap),
                    ),
                )
            }
        };
        disjunctive.push(pair.0);
        capacity.push(pair.1);
    }

    OperationBlock { scenario: position, flows, angles, shed, spill, balance, kirchhoff, disjunctive, capacity }
}

#[derive(Clone, Debug)]
pub struct FormulationOptions<T> {
    /// Curtailment penalty per MW; defaults to [`default_penalty`].
    pub penalty: Option<T>,
    pub bottleneck: bool,
    pub connectivity: bool,
    pub precedence: bool,
    /// Assembly is refused beyond this many rows.
    pub row_budget: usize,
    /// Candidates forced to be built (and not charged again).
    pub fixed_built: Vec<usize>,
}

impl<T: Real> Default for FormulationOptions<T> {
    fn default() -> Self {
        FormulationOptions {
            penalty: None,
            bottleneck: true,
            connectivity: true,
            precedence: true,
            row_budget: 6_000,
            fixed_built: Vec::new(),
        }
    }
}

impl<T: Real> FormulationOptions<T> {
    pub fn penalty_for(&self, network: &Network<T>) -> T {
        self.penalty.unwrap_or_else(|| default_penalty(network))
    }

    pub fn without_strengthening() -> Self {
        FormulationOptions { bottleneck: false, connectivity: false, precedence: false, ..Self::default() }
    }
}

/// Row indices of each strengthening family.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrengtheningRows {
    pub bottleneck: Vec<usize>,
    pub connectivity: Vec<usize>,
    pub precedence: Vec<usize>,
}

/// Investment columns, previously built candidates fixed at 1 with their
/// cost moved out of the objective.
pub fn add_investment_columns<T: Real>(
    lp: &mut LinearProgram<T>,
    network: &Network<T>,
    fixed_built: &[usize],
) -> Vec<usize> {
    network
        .candidates()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let j = lp.add_binary(format!("x_c{}", c.id), c.cost);
            if fixed_built.contains(&k) {
                lp.lower[j] = T::one();
                lp.objective[j] = T::zero();
            }
            j
        })
        .collect()
}

pub fn add_strengthening<T: Real>(
    lp: &mut LinearProgram<T>,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    invest: &[usize],
    options: &FormulationOptions<T>,
) -> Result<StrengtheningRows> {
    let mut rows = StrengtheningRows::default();
    if options.bottleneck {
        rows.bottleneck = add_candidate_rows(lp, &bottleneck_constraints(network, scenarios), invest);
    }
    if options.connectivity {
        rows.connectivity = add_candidate_rows(lp, &connectivity_constraints(network)?, invest);
    }
    if options.precedence {
        rows.precedence = add_candidate_rows(lp, &precedence_constraints(network), invest);
    }
    Ok(rows)
}

pub fn check_row_budget<T: Real>(network: &Network<T>, blocks: usize, extra: usize, budget: usize) -> Result<()> {
    let rows = blocks * rows_per_block(network) + extra;
    if rows > budget {
        return Err(TepError::RowBudget { rows, budget });
    }
    Ok(())
}

/// The assembled monolithic problem with its index maps.
#[derive(Clone, Debug)]
pub struct MonolithicProblem<T> {
    pub lp: LinearProgram<T>,
    pub invest: Vec<usize>,
    pub blocks: Vec<OperationBlock>,
    pub strengthening: StrengtheningRows,
    pub penalty: T,
}

impl<T: Real> MonolithicProblem<T> {
    pub fn plan(&self, x: &[T]) -> TrialPlan {
        TrialPlan { decisions: self.invest.iter().map(|&j| x[j] > T::lit(0.5)).collect(), iteration: 0 }
    }

    pub fn total_shed(&self, x: &[T]) -> T {
        self.blocks.iter().map(|b| b.total_shed(x)).sum()
    }

    pub fn max_shed(&self, x: &[T]) -> T {
        self.blocks.iter().map(|b| b.total_shed(x)).fold(T::zero(), T::max)
    }
}

/// Minimise investment plus penalised curtailment over all `scenarios`.
pub fn build_monolithic<T: Real>(
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
    options: &FormulationOptions<T>,
) -> Result<MonolithicProblem<T>> {
    let all: Vec<usize> = (0..scenarios.len()).collect();
    build_restricted(network, scenarios, &all, big_m, options)
}

/// Like [`build_monolithic`] but embedding only the scenarios at positions
/// `embedded`. Strengthening rows still use every scenario.
pub fn build_restricted<T: Real>(
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    embedded: &[usize],
    big_m: &BigMData<T>,
    options: &FormulationOptions<T>,
) -> Result<MonolithicProblem<T>> {
    check_row_budget(network, embedded.len(), 0, options.row_budget)?;
    let penalty = options.penalty_for(network);
    let mut lp = LinearProgram::new();
    let invest = add_investment_columns(&mut lp, network, &options.fixed_built);
    let blocks = embedded
        .iter()
        .map(|&pos| {
            add_operation_block(&mut lp, network, &scenarios[pos], pos, big_m, Investment::Columns(&invest), penalty)
        })
        .collect();
    let strengthening = add_strengthening(&mut lp, network, scenarios, &invest, options)?;
    Ok(MonolithicProblem { lp, invest, blocks, strengthening, penalty })
}

#[derive(Clone, Debug)]
pub struct MonolithicOutcome<T> {
    pub plan: TrialPlan,
    /// Investment cost of newly built candidates.
    pub cost: T,
    pub objective: T,
    pub total_shed: T,
    pub max_shed: T,
    pub milp: MilpSolution<T>,
}

/// Investment cost of `plan` excluding candidates in `fixed_built`.
pub fn new_investment_cost<T: Real>(network: &Network<T>, plan: &TrialPlan, fixed_built: &[usize]) -> T {
    plan.built().filter(|k| !fixed_built.contains(k)).map(|k| network.candidate(k).cost).sum()
}

fn diagnose_infeasible<T: Real>(problem: &MonolithicProblem<T>) -> String {
    let short: Vec<String> = problem
        .strengthening
        .bottleneck
        .iter()
        .filter_map(|&i| {
            let row = &problem.lp.rows[i];
            let reach: T = row.coeffs.iter().map(|(_, a)| a.max(T::zero())).sum();
            (reach < row.rhs).then(|| format!("{} short by {} MW", row.name, (row.rhs - reach).as_f64()))
        })
        .collect();
    if short.is_empty() {
        "no investment plan satisfies the planning constraints".into()
    } else {
        format!("candidate capacity cannot meet bus injections: {}", short.join("; "))
    }
}

/// Solves an assembled planning model; `cutoff` discards worse solutions.
pub fn solve_problem<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    problem: &MonolithicProblem<T>,
    fixed_built: &[usize],
    gap_tol: T,
    cutoff: Option<T>,
) -> Result<MonolithicOutcome<T>> {
    let milp = engine.solve_milp_with_cutoff(&problem.lp, gap_tol, cutoff);
    match milp.status {
        MilpStatus::Optimal | MilpStatus::NodeLimit if milp.has_incumbent() => {}
        MilpStatus::Infeasible => return Err(TepError::Infeasible(diagnose_infeasible(problem))),
        other => return Err(TepError::Solver(format!("planning MILP ended with {other:?}"))),
    }
    let plan = problem.plan(&milp.primal);
    Ok(MonolithicOutcome {
        cost: new_investment_cost(network, &plan, fixed_built),
        objective: milp.objective,
        total_shed: problem.total_shed(&milp.primal),
        max_shed: problem.max_shed(&milp.primal),
        plan,
        milp,
    })
}

pub fn solve_monolithic<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
    options: &FormulationOptions<T>,
    gap_tol: T,
) -> Result<MonolithicOutcome<T>> {
    let problem = build_monolithic(network, scenarios, big_m, options)?;
    solve_problem(engine, network, &problem, &options.fixed_built, gap_tol, None)
}

#[cfg(test)]
mod tests;
