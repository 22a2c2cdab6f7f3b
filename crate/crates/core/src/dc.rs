//! DC power flow screening, the feasibility subproblem and Benders cuts.

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, TepError};
use crate::formulation::{add_operation_block, BigMData, Investment};
use crate::lp::{LinearProgram, LpEngine, LpStatus};
use crate::model::{Network, OperationScenario, TrialPlan};
use crate::scalar::Real;

/// Total curtailment (MW) below which a scenario counts as secure.
pub const SHED_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Overload<T> {
    /// Circuit index, existing first.
    pub circuit: usize,
    pub flow: T,
    pub excess: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowState<T> {
    pub angles: Vec<T>,
    /// Flow per circuit; zero for unbuilt candidates.
    pub flows: Vec<T>,
    pub overloads: Vec<Overload<T>>,
}

impl<T: Real> FlowState<T> {
    pub fn is_secure(&self) -> bool {
        self.overloads.is_empty()
    }

    pub fn max_excess(&self) -> T {
        self.overloads.iter().map(|o| o.excess).fold(T::zero(), T::max)
    }
}

fn overload_tol<T: Real>(rating: T) -> T {
    T::lit(1e-6) * T::one().max(rating)
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense<T: Real>(a: &mut [Vec<T>], b: &mut [T]) -> bool {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        if a[piv][col].abs() <= T::pivot_tol() {
            return false;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            let (top, rest) = a.split_at_mut(r);
            for (x, &v) in rest[0][col..n].iter_mut().zip(&top[col][col..n]) {
                *x -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut v = b[col];
        for c in col + 1..n {
            v -= a[col][c] * b[c];
        }
        b[col] = v / a[col][col];
    }
    true
}

/// Linear DC power flow with `plan` in service.
///
/// Buses outside the reference component (unbuilt transshipment buses) get
/// angle zero; a floating component with net injection is singular.
pub fn dc_power_flow<T: Real>(
    network: &Network<T>,
    plan: &TrialPlan,
    scenario: &OperationScenario<T>,
) -> Result<FlowState<T>> {
    let nb = network.num_buses();
    let ne = network.num_existing();
    let in_service: Vec<usize> =
        (0..network.circuits().len()).filter(|&n| n < ne || plan.is_built(n - ne)).collect();

    let mut uf = UnionFind::<usize>::new(nb);
    for &n in &in_service {
        let c = &network.circuits()[n];
        uf.union(c.from, c.to);
    }
    let reference = network.reference_bus(None);
    let root = uf.find(reference);
    let injection = scenario.injections();

    let scale = injection.iter().map(|p| p.abs()).fold(T::one(), T::max);
    for (i, p) in injection.iter().enumerate() {
        if uf.find(i) != root && p.abs() > T::lit(1e-9) * scale {
            return Err(TepError::SingularSystem {
                scenario: scenario.id,
                message: format!("bus {} is islanded with injection {}", network.buses[i].id, p),
            });
        }
    }

    let active: Vec<usize> = (0..nb).filter(|&i| i != reference && uf.find(i) == root).collect();
    let mut pos = vec![usize::MAX; nb];
    for (p, &i) in active.iter().enumerate() {
        pos[i] = p;
    }
    let n = active.len();
    let mut mat = vec![vec![T::zero(); n]; n];
    for &k in &in_service {
        let c = &network.circuits()[k];
        let b = network.flow_factor(c);
        let (pf, pt) = (pos[c.from], pos[c.to]);
        if pf != usize::MAX {
            mat[pf][pf] += b;
        }
        if pt != usize::MAX {
            mat[pt][pt] += b;
        }
        if pf != usize::MAX && pt != usize::MAX {
            mat[pf][pt] -= b;
            mat[pt][pf] -= b;
        }
    }
    let mut rhs: Vec<T> = active.iter().map(|&i| injection[i]).collect();
    if !solve_dense(&mut mat, &mut rhs) {
        return Err(TepError::SingularSystem { scenario: scenario.id, message: "singular susceptance matrix".into() });
    }
    let mut angles = vec![T::zero(); nb];
    for (p, &i) in active.iter().enumerate() {
        angles[i] = rhs[p];
    }

    let mut flows = vec![T::zero(); network.circuits().len()];
    let mut overloads = Vec::new();
    for &k in &in_service {
        let c = &network.circuits()[k];
        let f = network.flow_factor(c) * (angles[c.from] - angles[c.to]);
        flows[k] = f;
        let excess = f.abs() - c.rating;
        if excess > overload_tol(c.rating) {
            overloads.push(Overload { circuit: k, flow: f, excess });
        }
    }
    Ok(FlowState { angles, flows, overloads })
}

/// Positions (in `scenarios`) of scenarios with at least one overload or an
/// islanded injection.
pub fn screen_scenarios<T: Real>(
    network: &Network<T>,
    plan: &TrialPlan,
    scenarios: &[OperationScenario<T>],
) -> Result<Vec<usize>> {
    let flags: Vec<Result<bool>> =
        scenarios
            .par_iter()
            .map(|s| match dc_power_flow(network, plan, s) {
                Ok(st) => Ok(!st.is_secure()),
                Err(TepError::SingularSystem { .. }) => Ok(true),
                Err(e) => Err(e),
            })
            .collect();
    let mut out = Vec::new();
    for (pos, f) in flags.into_iter().enumerate() {
        if f? {
            out.push(pos);
        }
    }
    Ok(out)
}

/// Linearisation `w(x) >= shed + sum_k coefficients[k] (x_k - anchor_k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BendersCut<T> {
    /// Position of the scenario in the input slice.
    pub scenario: usize,
    pub scenario_id: usize,
    pub iteration: usize,
    pub shed: T,
    pub coefficients: Vec<T>,
    pub anchor: TrialPlan,
}

impl<T: Real> BendersCut<T> {
    /// Lower bound on the curtailment of `plan` implied by the cut.
    pub fn evaluate(&self, plan: &TrialPlan) -> T {
        self.evaluate_values(&plan.as_values())
    }

    pub fn evaluate_values(&self, x: &[T]) -> T {
        let mut v = self.shed;
        for (k, pi) in self.coefficients.iter().enumerate() {
            let a = if self.anchor.is_built(k) { T::one() } else { T::zero() };
            v += *pi * (x[k] - a);
        }
        v
    }

    /// Constant term once the anchor is folded in: `w >= constant + pi x`.
    pub fn constant(&self) -> T {
        let mut c = self.shed;
        for k in self.anchor.built() {
            c -= self.coefficients[k];
        }
        c
    }

    pub fn is_trivial(&self) -> bool {
        self.shed <= T::zero() && self.coefficients.iter().all(|c| *c == T::zero())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityResult<T> {
    pub scenario: usize,
    pub scenario_id: usize,
    /// Minimum total curtailment.
    pub shed_total: T,
    pub shed: Vec<T>,
    /// Buses with curtailment above the integrality tolerance.
    pub shed_bus_count: usize,
    /// Sum of the two disjunctive row duals per candidate.
    pub duals_big_m: Vec<T>,
    /// Sum of the two capacity row duals per candidate.
    pub duals_capacity: Vec<T>,
    pub flows: Vec<T>,
    pub angles: Vec<T>,
    pub cut: BendersCut<T>,
}

impl<T: Real> FeasibilityResult<T> {
    pub fn is_infeasible(&self) -> bool {
        self.shed_total > T::lit(SHED_TOLERANCE)
    }
}

/// The feasibility subproblem as an LP, exposed for inspection and export.
pub fn feasibility_lp<T: Real>(
    network: &Network<T>,
    plan: &TrialPlan,
    scenario: &OperationScenario<T>,
    big_m: &BigMData<T>,
) -> (LinearProgram<T>, crate::formulation::OperationBlock) {
    let mut lp = LinearProgram::new();
    let block = add_operation_block(&mut lp, network, scenario, 0, big_m, Investment::Fixed(plan), T::one());
    (lp, block)
}

/// Minimum curtailment of `scenario` under `plan`, with the derived cut.
pub fn solve_feasibility<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    plan: &TrialPlan,
    scenario: &OperationScenario<T>,
    position: usize,
    big_m: &BigMData<T>,
) -> Result<FeasibilityResult<T>> {
    let (lp, block) = feasibility_lp(network, plan, scenario, big_m);
    let sol = engine.solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        other => {
            return Err(TepError::Solver(format!("feasibility LP for scenario {} ended with {other:?}", scenario.id)))
        }
    }
    let shed: Vec<T> = block.shed.iter().map(|&c| sol.primal[c].max(T::zero())).collect();
    let shed_total = shed.iter().copied().sum();
    let shed_bus_count = shed.iter().filter(|r| **r > T::integrality_tol()).count();
    let duals_big_m = block.disjunctive.iter().map(|&(p, m)| sol.duals[p] + sol.duals[m]).collect();
    let duals_capacity = block.capacity.iter().map(|&(p, m)| sol.duals[p] + sol.duals[m]).collect();
    let mut result = FeasibilityResult {
        scenario: position,
        scenario_id: scenario.id,
        shed_total,
        shed,
        shed_bus_count,
        duals_big_m,
        duals_capacity,
        flows: block.flows.iter().map(|&c| sol.primal[c]).collect(),
        angles: block.angles.iter().map(|&c| sol.primal[c]).collect(),
        cut: BendersCut {
            scenario: position,
            scenario_id: scenario.id,
            iteration: plan.iteration,
            shed: T::zero(),
            coefficients: Vec::new(),
            anchor: plan.clone(),
        },
    };
    result.cut = compute_cut(&result, network, plan, big_m);
    Ok(result)
}

/// `pi_k = -M_k pi^M_k + rating_k pi^f_k`; all zero when nothing is shed.
pub fn compute_cut<T: Real>(
    result: &FeasibilityResult<T>,
    network: &Network<T>,
    plan: &TrialPlan,
    big_m: &BigMData<T>,
) -> BendersCut<T> {
    let coefficients = if result.shed_total > T::zero() {
        (0..network.num_candidates())
            .map(|k| -big_m.values[k] * result.duals_big_m[k] + network.candidate(k).rating * result.duals_capacity[k])
            .collect()
    } else {
        vec![T::zero(); network.num_candidates()]
    };
    BendersCut {
        scenario: result.scenario,
        scenario_id: result.scenario_id,
        iteration: plan.iteration,
        shed: result.shed_total,
        coefficients,
        anchor: plan.clone(),
    }
}

/// Screening plus feasibility solves for the overloaded scenarios.
#[derive(Clone, Debug)]
pub struct PlanAssessment<T> {
    /// Positions of overloaded scenarios.
    pub severe: Vec<usize>,
    /// Feasibility results for `severe`, same order.
    pub results: Vec<FeasibilityResult<T>>,
}

impl<T: Real> PlanAssessment<T> {
    pub fn infeasible(&self) -> impl Iterator<Item = &FeasibilityResult<T>> {
        self.results.iter().filter(|r| r.is_infeasible())
    }

    pub fn is_robust(&self) -> bool {
        self.infeasible().next().is_none()
    }

    pub fn max_shed(&self) -> T {
        self.results.iter().map(|r| r.shed_total).fold(T::zero(), T::max)
    }

    pub fn total_shed(&self) -> T {
        self.results.iter().map(|r| r.shed_total).sum()
    }
}

pub fn solve_feasibility_batch<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    plan: &TrialPlan,
    scenarios: &[OperationScenario<T>],
    positions: &[usize],
    big_m: &BigMData<T>,
) -> Result<Vec<FeasibilityResult<T>>> {
    positions
        .par_iter()
        .map(|&p| solve_feasibility(engine, network, plan, &scenarios[p], p, big_m))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn assess_plan<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    plan: &TrialPlan,
    scenarios: &[OperationScenario<T>],
    big_m: &BigMData<T>,
) -> Result<PlanAssessment<T>> {
    let severe = screen_scenarios(network, plan, scenarios)?;
    let results = solve_feasibility_batch(engine, network, plan, scenarios, &severe, big_m)?;
    Ok(PlanAssessment { severe, results })
}

#[cfg(test)]
mod tests;
