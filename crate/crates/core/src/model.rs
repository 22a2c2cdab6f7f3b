//! Network and scenario data model, validation, and incidence construction.
//!
//! Buses are addressed internally by a zero-based index; the one-based `id`
//! carried by [`Bus`] is what files and reports show. Circuits are kept with
//! all existing circuits first, followed by the candidates in input order, so
//! candidate `k` is `circuits[num_existing + k]`.

use std::collections::BTreeMap;
use std::fmt;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TepError};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BusKind {
    Connected,
    /// A candidate substation: no existing circuit, no injection.
    #[serde(alias = "transshipment")]
    CandidateTransshipment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub name: String,
    pub kind: BusKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitStatus {
    Existing,
    Candidate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit<T> {
    pub id: usize,
    /// Bus index (zero-based) of the sending terminal.
    pub from: usize,
    /// Bus index (zero-based) of the receiving terminal.
    pub to: usize,
    /// Per-unit susceptance on the network MVA base.
    pub susceptance: T,
    /// Thermal rating in MW.
    pub rating: T,
    pub status: CircuitStatus,
    /// Annualized investment cost; zero for existing circuits.
    pub cost: T,
    pub corridor: String,
    pub duplicate_rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub buses: Vec<Bus>,
    circuits: Vec<Circuit<T>>,
    num_existing: usize,
    /// Bus index of the angle reference.
    pub slack_bus: Option<usize>,
    pub base_mva: T,
}

impl<T: Real> Network<T> {
    /// Assembles a network, reordering circuits so existing ones come first.
    /// Input order is preserved within each status group.
    pub fn new(buses: Vec<Bus>, circuits: Vec<Circuit<T>>, slack_bus: Option<usize>, base_mva: T) -> Self {
        let (mut existing, candidates): (Vec<_>, Vec<_>) =
            circuits.into_iter().partition(|c| c.status == CircuitStatus::Existing);
        let num_existing = existing.len();
        existing.extend(candidates);
        Network { buses, circuits: existing, num_existing, slack_bus, base_mva }
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_existing(&self) -> usize {
        self.num_existing
    }

    pub fn num_candidates(&self) -> usize {
        self.circuits.len() - self.num_existing
    }

    /// All circuits, existing first.
    pub fn circuits(&self) -> &[Circuit<T>] {
        &self.circuits
    }

    pub fn existing(&self) -> &[Circuit<T>] {
        &self.circuits[..self.num_existing]
    }

    pub fn candidates(&self) -> &[Circuit<T>] {
        &self.circuits[self.num_existing..]
    }

    pub fn candidate(&self, k: usize) -> &Circuit<T> {
        &self.circuits[self.num_existing + k]
    }

    /// Susceptance in MW per radian: `base_mva * susceptance`.
    pub fn flow_factor(&self, circuit: &Circuit<T>) -> T {
        self.base_mva * circuit.susceptance
    }

    pub fn is_transshipment(&self, bus: usize) -> bool {
        self.buses[bus].kind == BusKind::CandidateTransshipment
    }

    pub fn transshipment_buses(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.buses.len()).filter(|&b| self.is_transshipment(b))
    }

    /// Candidate indices incident to `bus`.
    pub fn candidates_at(&self, bus: usize) -> Vec<usize> {
        self.candidates()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.from == bus || c.to == bus)
            .map(|(k, _)| k)
            .collect()
    }

    /// Existing circuit indices incident to `bus`.
    pub fn existing_at(&self, bus: usize) -> Vec<usize> {
        self.existing()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.from == bus || c.to == bus)
            .map(|(j, _)| j)
            .collect()
    }

    /// Candidate indices grouped by corridor, each group ordered by
    /// duplicate rank. Groups are ordered by their first candidate.
    pub fn corridors(&self) -> Vec<Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (k, c) in self.candidates().iter().enumerate() {
            groups.entry(c.corridor.as_str()).or_default().push(k);
        }
        let mut out: Vec<Vec<usize>> = groups
            .into_values()
            .map(|mut g| {
                g.sort_by_key(|&k| (self.candidate(k).duplicate_rank, k));
                g
            })
            .collect();
        out.sort_by_key(|g| g.iter().copied().min().unwrap_or(0));
        out
    }

    /// Bus index used as the angle reference.
    ///
    /// An explicit `slack_bus` wins. Otherwise: the lowest-index connected
    /// bus with nonzero generation in the first scenario, falling back to the
    /// lowest-index connected bus.
    pub fn reference_bus(&self, first: Option<&OperationScenario<T>>) -> usize {
        if let Some(s) = self.slack_bus {
            return s;
        }
        let connected = |b: &usize| self.buses[*b].kind == BusKind::Connected;
        if let Some(sc) = first {
            if let Some(b) = (0..self.buses.len())
                .filter(connected)
                .find(|&b| sc.generation.get(b).is_some_and(|g| *g > T::zero()))
            {
                return b;
            }
        }
        (0..self.buses.len()).find(connected).unwrap_or(0)
    }

    /// Investment cost of a plan.
    pub fn plan_cost(&self, plan: &TrialPlan) -> T {
        plan.built().map(|k| self.candidate(k).cost).fold(T::zero(), |a, b| a + b)
    }

    pub fn max_candidate_cost(&self) -> T {
        self.candidates().iter().map(|c| c.cost).fold(T::zero(), T::max)
    }

    pub fn incidence(&self) -> Incidence {
        build_incidence(self)
    }
}

/// Per-year dispatch snapshot: bus generation and demand in MW.
#[derive(Clone, Debug, PartialEq)]
pub struct OperationScenario<T> {
    pub id: usize,
    pub generation: Vec<T>,
    pub demand: Vec<T>,
    pub year: u32,
    pub label: Option<ScenarioLabel>,
}

/// Provenance of a generated scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioLabel {
    pub month: u32,
    pub block: u32,
    pub draw: u32,
}

impl<T: Real> OperationScenario<T> {
    pub fn new(id: usize, generation: Vec<T>, demand: Vec<T>) -> Self {
        OperationScenario { id, generation, demand, year: 1, label: None }
    }

    /// Net injection `g - d` at every bus.
    pub fn injections(&self) -> Vec<T> {
        self.generation.iter().zip(&self.demand).map(|(g, d)| *g - *d).collect()
    }

    pub fn total_demand(&self) -> T {
        self.demand.iter().copied().sum()
    }
}

/// Binary investment vector over candidates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialPlan {
    pub decisions: Vec<bool>,
    /// Benders iteration that produced the plan; 0 otherwise.
    pub iteration: usize,
}

impl TrialPlan {
    pub fn empty(num_candidates: usize) -> Self {
        TrialPlan { decisions: vec![false; num_candidates], iteration: 0 }
    }

    pub fn from_built(num_candidates: usize, built: impl IntoIterator<Item = usize>) -> Self {
        let mut plan = Self::empty(num_candidates);
        for k in built {
            plan.decisions[k] = true;
        }
        plan
    }

    /// Plan whose `k`-th bit is bit `k` of `mask`.
    pub fn from_mask(num_candidates: usize, mask: u64) -> Self {
        TrialPlan {
            decisions: (0..num_candidates).map(|k| mask >> k & 1 == 1).collect(),
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn is_built(&self, k: usize) -> bool {
        self.decisions[k]
    }

    pub fn built(&self) -> impl Iterator<Item = usize> + '_ {
        self.decisions.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| k)
    }

    pub fn num_built(&self) -> usize {
        self.decisions.iter().filter(|b| **b).count()
    }

    /// 0/1 vector in the scalar type.
    pub fn as_values<T: Real>(&self) -> Vec<T> {
        self.decisions.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()
    }
}

/// Sparse bus-circuit incidence matrix of dimension I x (J + K).
///
/// Column `n` has +1 at the sending bus and -1 at the receiving bus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    pub rows: usize,
    /// `(from, to)` bus indices of each column.
    pub columns: Vec<(usize, usize)>,
}

impl Incidence {
    pub fn entry(&self, row: usize, col: usize) -> i8 {
        let (f, t) = self.columns[col];
        if row == f {
            1
        } else if row == t {
            -1
        } else {
            0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        (0..self.rows).map(|i| (0..self.columns.len()).map(|n| self.entry(i, n)).collect()).collect()
    }

    /// `A * f`: net outflow at each bus.
    pub fn apply<T: Real>(&self, flows: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (&(f, t), &v) in self.columns.iter().zip(flows) {
            out[f] += v;
            out[t] -= v;
        }
        out
    }
}

pub fn build_incidence<T: Real>(network: &Network<T>) -> Incidence {
    Incidence {
        rows: network.num_buses(),
        columns: network.circuits().iter().map(|c| (c.from, c.to)).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    DanglingEndpoint,
    SelfLoop,
    NonPositiveSusceptance,
    NonPositiveRating,
    InvalidCost,
    CorridorMismatch,
    CorridorRankGap,
    ExistingAtTransshipment,
    InjectionAtTransshipment,
    IsolatedTransshipment,
    DisconnectedGrid,
    InvalidSlack,
    ScenarioLength,
    NegativeInjection,
    ScenarioImbalance,
    NonFinite,
}

impl ViolationCode {
    pub fn reason(self) -> &'static str {
        match self {
            ViolationCode::DanglingEndpoint => "dangling circuit endpoint",
            ViolationCode::SelfLoop => "circuit connects a bus to itself",
            ViolationCode::NonPositiveSusceptance => "non-positive susceptance",
            ViolationCode::NonPositiveRating => "non-positive rating",
            ViolationCode::InvalidCost => "candidate cost missing or negative",
            ViolationCode::CorridorMismatch => "corridor members differ",
            ViolationCode::CorridorRankGap => "corridor duplicate ranks not 1..w",
            ViolationCode::ExistingAtTransshipment => "existing circuit at transshipment bus",
            ViolationCode::InjectionAtTransshipment => "injection at transshipment bus",
            ViolationCode::IsolatedTransshipment => "transshipment bus has fewer than two candidates",
            ViolationCode::DisconnectedGrid => "existing grid is not connected",
            ViolationCode::InvalidSlack => "slack bus is not a connected bus",
            ViolationCode::ScenarioLength => "scenario vector length mismatch",
            ViolationCode::NegativeInjection => "negative generation or demand",
            ViolationCode::ScenarioImbalance => "generation does not match demand",
            ViolationCode::NonFinite => "non-finite value",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "id")]
pub enum Subject {
    Network,
    Bus(usize),
    Circuit(usize),
    Scenario(usize),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Network => write!(f, "network"),
            Subject::Bus(id) => write!(f, "bus {id}"),
            Subject::Circuit(id) => write!(f, "circuit {id}"),
            Subject::Scenario(id) => write!(f, "scenario {id}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub subject: Subject,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, subject: Subject, detail: impl Into<String>) {
        self.violations.push(Violation { code, subject, detail: detail.into() });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(TepError::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.subject, v.code.reason())?;
            if !v.detail.is_empty() {
                write!(f, " ({})", v.detail)?;
            }
        }
        Ok(())
    }
}

pub fn validate_network<T: Real>(network: &Network<T>, scenarios: &[OperationScenario<T>]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let nb = network.num_buses();

    for c in network.circuits() {
        let subj = Subject::Circuit(c.id);
        if c.from >= nb || c.to >= nb {
            report.push(ViolationCode::DanglingEndpoint, subj, format!("{} -> {}", c.from + 1, c.to + 1));
            continue;
        }
        if c.from == c.to {
            report.push(ViolationCode::SelfLoop, subj, "");
        }
        if !c.susceptance.is_finite() || !c.rating.is_finite() || !c.cost.is_finite() {
            report.push(ViolationCode::NonFinite, subj, "");
            continue;
        }
        if c.susceptance <= T::zero() {
            report.push(ViolationCode::NonPositiveSusceptance, subj, format!("{}", c.susceptance));
        }
        if c.rating <= T::zero() {
            report.push(ViolationCode::NonPositiveRating, subj, format!("{}", c.rating));
        }
        if c.status == CircuitStatus::Candidate && c.cost < T::zero() {
            report.push(ViolationCode::InvalidCost, subj, format!("{}", c.cost));
        }
        if c.status == CircuitStatus::Existing
            && (network.is_transshipment(c.from) || network.is_transshipment(c.to))
        {
            report.push(ViolationCode::ExistingAtTransshipment, subj, "");
        }
    }
    if !report.is_ok() {
        // Later checks index buses through circuit endpoints.
        if report.has(ViolationCode::DanglingEndpoint) {
            return report;
        }
    }

    for group in network.corridors() {
        let first = network.candidate(group[0]);
        for &k in &group[1..] {
            let c = network.candidate(k);
            let same_ends = (c.from, c.to) == (first.from, first.to);
            if !same_ends || c.susceptance != first.susceptance || c.rating != first.rating || c.cost != first.cost {
                report.push(
                    ViolationCode::CorridorMismatch,
                    Subject::Circuit(c.id),
                    format!("corridor '{}'", c.corridor),
                );
            }
        }
        for (pos, &k) in group.iter().enumerate() {
            let c = network.candidate(k);
            if c.duplicate_rank != pos + 1 {
                report.push(
                    ViolationCode::CorridorRankGap,
                    Subject::Circuit(c.id),
                    format!("corridor '{}' rank {} at position {}", c.corridor, c.duplicate_rank, pos + 1),
                );
                break;
            }
        }
    }

    for n in network.transshipment_buses() {
        let count = network.candidates_at(n).len();
        if count < 2 {
            report.push(
                ViolationCode::IsolatedTransshipment,
                Subject::Bus(network.buses[n].id),
                format!("{count} incident candidates"),
            );
        }
    }

    if let Some(s) = network.slack_bus {
        if s >= nb || network.is_transshipment(s) {
            report.push(ViolationCode::InvalidSlack, Subject::Bus(s + 1), "");
        }
    }

    // One synchronous island over connected buses.
    let connected: Vec<usize> = (0..nb).filter(|&b| !network.is_transshipment(b)).collect();
    if connected.len() > 1 {
        let mut uf = UnionFind::<usize>::new(nb);
        for c in network.existing() {
            uf.union(c.from, c.to);
        }
        let root = uf.find(connected[0]);
        let stray: Vec<String> = connected
            .iter()
            .filter(|&&b| uf.find(b) != root)
            .map(|&b| network.buses[b].id.to_string())
            .collect();
        if !stray.is_empty() {
            report.push(
                ViolationCode::DisconnectedGrid,
                Subject::Network,
                format!("buses not reached by existing circuits: {}", stray.join(", ")),
            );
        }
    }

    for s in scenarios {
        let subj = Subject::Scenario(s.id);
        if s.generation.len() != nb || s.demand.len() != nb {
            report.push(
                ViolationCode::ScenarioLength,
                subj,
                format!("expected {nb}, got {}/{}", s.generation.len(), s.demand.len()),
            );
            continue;
        }
        if s.generation.iter().chain(&s.demand).any(|v| !v.is_finite()) {
            report.push(ViolationCode::NonFinite, subj, "");
            continue;
        }
        if s.generation.iter().chain(&s.demand).any(|v| *v < T::zero()) {
            report.push(ViolationCode::NegativeInjection, subj, "");
        }
        for n in network.transshipment_buses() {
            if s.generation[n] != T::zero() || s.demand[n] != T::zero() {
                report.push(
                    ViolationCode::InjectionAtTransshipment,
                    subj,
                    format!("bus {}", network.buses[n].id),
                );
            }
        }
        let g: T = s.generation.iter().copied().sum();
        let d: T = s.demand.iter().copied().sum();
        let tol = T::lit(1e-6).max(T::primal_tol()) * T::one().max(d.abs());
        if (g - d).abs() > tol {
            report.push(ViolationCode::ScenarioImbalance, subj, format!("generation {g}, demand {d}"));
        }
    }
    report
}

/// Validates and pins the slack bus, returning a network ready for solving.
pub fn prepare<T: Real>(mut network: Network<T>, scenarios: &[OperationScenario<T>]) -> Result<Network<T>> {
    validate_network(&network, scenarios).into_result()?;
    let slack = network.reference_bus(scenarios.first());
    network.slack_bus = Some(slack);
    Ok(network)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn bus(id: usize) -> Bus {
        Bus { id, name: format!("B{id}"), kind: BusKind::Connected }
    }

    pub fn transshipment(id: usize) -> Bus {
        Bus { id, name: format!("T{id}"), kind: BusKind::CandidateTransshipment }
    }

    /// Circuit between one-based bus ids with base-1 susceptance.
    pub fn existing(id: usize, from: usize, to: usize, susceptance: f64, rating: f64) -> Circuit<f64> {
        Circuit {
            id,
            from: from - 1,
            to: to - 1,
            susceptance,
            rating,
            status: CircuitStatus::Existing,
            cost: 0.0,
            corridor: format!("e{id}"),
            duplicate_rank: 1,
        }
    }

    pub fn candidate(id: usize, from: usize, to: usize, susceptance: f64, rating: f64, cost: f64) -> Circuit<f64> {
        Circuit {
            id,
            from: from - 1,
            to: to - 1,
            susceptance,
            rating,
            status: CircuitStatus::Candidate,
            cost,
            corridor: format!("c{id}"),
            duplicate_rank: 1,
        }
    }

    pub fn scenario(id: usize, generation: &[f64], demand: &[f64]) -> OperationScenario<f64> {
        OperationScenario::new(id, generation.to_vec(), demand.to_vec())
    }

    /// Four buses plus a transshipment bus, three existing lines and five
    /// candidates including a duplicate pair and a two-leg route.
    /// Redundancy trap: the cheap fix for the worst scenario becomes
    /// redundant once the tie line needed by the second scenario is built.
    pub fn trap() -> (Network<f64>, Vec<OperationScenario<f64>>) {
        let net = Network::new(
            vec![bus(1), bus(2), bus(3)],
            vec![
                existing(1, 1, 2, 1.0, 110.0),
                existing(2, 1, 3, 1.0, 110.0),
                existing(3, 2, 3, 0.1, 25.0),
                candidate(4, 1, 2, 1.0, 110.0, 10.0),
                candidate(5, 2, 3, 10.0, 200.0, 25.0),
                candidate(6, 1, 3, 1.0, 110.0, 30.0),
            ],
            Some(0),
            1.0,
        );
        let scenarios = vec![
            scenario(1, &[200.0, 0.0, 0.0], &[0.0, 150.0, 50.0]),
            scenario(2, &[180.0, 0.0, 0.0], &[0.0, 50.0, 130.0]),
        ];
        (net, scenarios)
    }

    pub fn mesh() -> (Network<f64>, Vec<OperationScenario<f64>>) {
        let net = Network::new(
            vec![bus(1), bus(2), bus(3), bus(4), transshipment(5)],
            vec![
                existing(1, 1, 2, 2.0, 60.0),
                existing(2, 2, 3, 1.0, 40.0),
                existing(3, 3, 4, 1.5, 50.0),
                candidate(4, 1, 3, 1.0, 50.0, 30.0),
                candidate(5, 1, 3, 1.0, 50.0, 30.0),
                candidate(6, 2, 4, 2.0, 40.0, 25.0),
                candidate(7, 1, 5, 3.0, 70.0, 15.0),
                candidate(8, 5, 4, 3.0, 70.0, 15.0),
            ],
            Some(0),
            1.0,
        );
        let scenarios = vec![
            scenario(1, &[120.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 20.0, 40.0, 60.0, 0.0]),
            scenario(2, &[90.0, 30.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 90.0, 30.0, 0.0]),
            scenario(3, &[60.0, 0.0, 0.0, 50.0, 0.0], &[0.0, 70.0, 40.0, 0.0, 0.0]),
            scenario(4, &[150.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 30.0, 30.0, 90.0, 0.0]),
        ];
        (net, scenarios)
    }
}
