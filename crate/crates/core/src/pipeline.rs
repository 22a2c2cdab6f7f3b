//! Year-chained planning runs and plan reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::benders::{run_benders_with, BendersConfig, IterationRecord, SelectionCriterion};
use crate::dc::{assess_plan, SHED_TOLERANCE};
use crate::error::{Result, TepError};
use crate::formulation::{compute_big_m, solve_monolithic, BigMData, FormulationOptions};
use crate::greedy::{run_greedy_with, GreedyConfig, PruneAction, PruneRecord, RoundRecord};
use crate::lp::LpEngine;
use crate::model::{Network, OperationScenario, TrialPlan};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanningMode {
    Monolithic,
    Benders,
    GreedyBenders,
}

impl PlanningMode {
    pub fn name(self) -> &'static str {
        match self {
            PlanningMode::Monolithic => "monolithic",
            PlanningMode::Benders => "benders",
            PlanningMode::GreedyBenders => "greedy-benders",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig<T> {
    pub mode: PlanningMode,
    pub selection: SelectionCriterion,
    pub gap: T,
    pub penalty: Option<T>,
    /// Years to plan, in order; all years present in the scenarios when
    /// empty.
    pub years: Vec<u32>,
    pub bottleneck: bool,
    pub connectivity: bool,
    pub precedence: bool,
    pub row_budget: usize,
    pub max_iterations: usize,
    pub max_escalations: usize,
    /// Use the greedy plan's cost as a master cutoff.
    pub greedy_upper_bound: bool,
    pub big_m_scale: T,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        let f = FormulationOptions::<T>::default();
        PipelineConfig {
            mode: PlanningMode::GreedyBenders,
            selection: SelectionCriterion::default(),
            gap: T::lit(0.03),
            penalty: None,
            years: Vec::new(),
            bottleneck: f.bottleneck,
            connectivity: f.connectivity,
            precedence: f.precedence,
            row_budget: f.row_budget,
            max_iterations: 200,
            max_escalations: 4,
            greedy_upper_bound: false,
            big_m_scale: T::one(),
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    fn formulation(&self, fixed_built: Vec<usize>) -> FormulationOptions<T> {
        FormulationOptions {
            penalty: self.penalty,
            bottleneck: self.bottleneck,
            connectivity: self.connectivity,
            precedence: self.precedence,
            row_budget: self.row_budget,
            fixed_built,
        }
    }
}

/// Progress lines for the caller's log sink.
#[derive(Clone, Debug)]
pub enum LogEvent<'a, T> {
    Year(u32, usize),
    Round(&'a RoundRecord<T>),
    Prune(&'a PruneRecord<T>),
    Iteration(&'a IterationRecord<T>),
}

impl<T: Real> LogEvent<'_, T> {
    pub fn line(&self) -> String {
        match self {
            LogEvent::Year(y, n) => format!("year {y}: {n} scenarios"),
            LogEvent::Round(r) => format!(
                "greedy round {}: {} infeasible, critical {:?}, cost {}",
                r.round,
                r.infeasible_before,
                r.critical,
                r.cost.as_f64()
            ),
            LogEvent::Prune(p) => p.line(),
            LogEvent::Iteration(i) => i.line(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltCircuit {
    pub circuit: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    pub corridor: String,
    pub cost: f64,
    pub rating: f64,
    pub entry_year: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioShed {
    pub scenario: usize,
    pub shed: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub mode: String,
    pub iterations: usize,
    pub greedy_rounds: usize,
    pub pruned: usize,
    pub cuts: usize,
    pub lower_bound: Option<f64>,
    pub gap: f64,
    pub penalty: f64,
    pub wall_time_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearReport {
    pub year: u32,
    pub built: Vec<BuiltCircuit>,
    pub cost: f64,
    pub max_shed: f64,
    pub residual_shed: Vec<ScenarioShed>,
    pub stats: SolverStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub network: Option<String>,
    pub years: Vec<YearReport>,
    pub total_cost: f64,
}

impl PlanReport {
    pub fn built(&self) -> impl Iterator<Item = &BuiltCircuit> {
        self.years.iter().flat_map(|y| &y.built)
    }

    /// Drops wall-clock fields so reruns compare equal.
    pub fn without_timing(mut self) -> Self {
        for y in &mut self.years {
            y.stats.wall_time_ms = None;
        }
        self
    }
}

/// Plans one year's scenarios on top of `fixed` candidates.
#[allow(clippy::too_many_arguments)]
pub fn plan_year<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    fixed: &[usize],
    big_m: &BigMData<T>,
    config: &PipelineConfig<T>,
    log: &mut dyn FnMut(LogEvent<'_, T>),
) -> Result<(TrialPlan, SolverStats)> {
    let options = config.formulation(fixed.to_vec());
    let mut stats = SolverStats { mode: config.mode.name().into(), gap: config.gap.as_f64(), ..SolverStats::default() };
    let benders = |initial, upper_bound, log: &mut dyn FnMut(LogEvent<'_, T>)| {
        let bc = BendersConfig {
            selection: config.selection,
            gap: config.gap,
            max_iterations: config.max_iterations,
            formulation: options.clone(),
            reselect: false,
            upper_bound,
            max_escalations: config.max_escalations,
            big_m: Some(big_m.clone()),
        };
        run_benders_with(engine, network, scenarios, &bc, initial, &mut |r| log(LogEvent::Iteration(r)))
    };
    match config.mode {
        PlanningMode::Monolithic => {
            let mut options = options.clone();
            let mut penalty = options.penalty_for(network);
            for attempt in 0..=config.max_escalations {
                options.penalty = Some(penalty);
                let out = solve_monolithic(engine, network, scenarios, big_m, &options, config.gap)?;
                stats.iterations = attempt + 1;
                stats.lower_bound = Some(out.milp.bound.as_f64());
                stats.penalty = penalty.as_f64();
                if out.max_shed <= T::lit(SHED_TOLERANCE) {
                    return Ok((out.plan, stats));
                }
                penalty *= T::lit(10.0);
            }
            Err(TepError::Infeasible("monolithic optimum keeps curtailing load at every penalty".into()))
        }
        PlanningMode::Benders => {
            let out = benders(Vec::new(), None, log)?;
            stats.iterations = out.iterations;
            stats.cuts = out.state.cuts.len();
            stats.lower_bound = Some(out.lower_bound.as_f64());
            stats.penalty = out.penalty.as_f64();
            Ok((out.plan, stats))
        }
        PlanningMode::GreedyBenders => {
            let gc = GreedyConfig {
                selection: config.selection,
                gap: config.gap,
                max_rounds: config.max_iterations,
                formulation: options.clone(),
                max_escalations: config.max_escalations,
                big_m: Some(big_m.clone()),
            };
            let greedy = run_greedy_with(engine, network, scenarios, &gc, &mut |r| log(LogEvent::Round(r)))?;
            for p in &greedy.prune.log {
                log(LogEvent::Prune(p));
            }
            let ub = config.greedy_upper_bound.then(|| {
                greedy.cost * (T::one() + T::lit(1e-9)) + T::lit(1e-9)
            });
            let out = benders(greedy.cuts(), ub, log)?;
            stats.greedy_rounds = greedy.rounds.len();
            stats.pruned = greedy.prune.log.iter().filter(|p| p.action == PruneAction::Removed).count();
            stats.iterations = out.iterations;
            stats.cuts = out.state.cuts.len();
            stats.lower_bound = Some(out.lower_bound.as_f64());
            stats.penalty = out.penalty.as_f64();
            Ok((out.plan, stats))
        }
    }
}

/// Plans every year in order, fixing earlier builds, and verifies each plan
/// against all of its year's scenarios.
pub fn run_pipeline<T: Real, E: LpEngine<T>>(
    engine: &E,
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    config: &PipelineConfig<T>,
    log: &mut dyn FnMut(LogEvent<'_, T>),
) -> Result<PlanReport> {
    let years: Vec<u32> = if config.years.is_empty() {
        scenarios.iter().map(|s| s.year).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        config.years.clone()
    };
    let big_m = compute_big_m(network).scaled(config.big_m_scale);
    let mut fixed: Vec<usize> = Vec::new();
    let mut reports = Vec::new();
    for year in years {
        let subset: Vec<OperationScenario<T>> = scenarios.iter().filter(|s| s.year == year).cloned().collect();
        if subset.is_empty() {
            return Err(TepError::Parse { location: "years".into(), message: format!("no scenarios for year {year}") });
        }
        log(LogEvent::Year(year, subset.len()));
        let start = Instant::now();
        let (plan, mut stats) = plan_year(engine, network, &subset, &fixed, &big_m, config, log)
            .map_err(|e| match e {
                TepError::Infeasible(msg) => TepError::Infeasible(format!("year {year}: {msg}")),
                other => other,
            })?;
        stats.wall_time_ms = Some(start.elapsed().as_millis() as u64);

        let check = assess_plan(engine, network, &plan, &subset, &big_m)?;
        let mut residual: Vec<ScenarioShed> =
            subset.iter().map(|s| ScenarioShed { scenario: s.id, shed: 0.0 }).collect();
        for r in &check.results {
            residual[r.scenario].shed = r.shed_total.as_f64();
        }
        if !check.is_robust() {
            return Err(TepError::Solver(format!("year {year}: returned plan curtails load")));
        }

        let new: Vec<usize> = plan.built().filter(|k| !fixed.contains(k)).collect();
        let built: Vec<BuiltCircuit> = new
            .iter()
            .map(|&k| {
                let c = network.candidate(k);
                BuiltCircuit {
                    circuit: c.id,
                    from_bus: network.buses[c.from].id,
                    to_bus: network.buses[c.to].id,
                    corridor: c.corridor.clone(),
                    cost: c.cost.as_f64(),
                    rating: c.rating.as_f64(),
                    entry_year: year,
                }
            })
            .collect();
        fixed.extend(new);
        fixed.sort_unstable();
        reports.push(YearReport {
            year,
            cost: built.iter().fold(0.0, |acc, b| acc + b.cost),
            built,
            max_shed: check.max_shed().as_f64(),
            residual_shed: residual,
            stats,
        });
    }
    let total_cost = reports.iter().fold(0.0, |acc, r| acc + r.cost);
    Ok(PlanReport { network: None, years: reports, total_cost })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Renders a report as a text table or pretty JSON.
pub fn render_plan_report(report: &PlanReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serialises");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut s = String::new();
            if let Some(name) = &report.network {
                let _ = writeln!(s, "network: {name}");
            }
            for y in &report.years {
                let _ = writeln!(s, "year {}  mode {}  cost {:.4}", y.year, y.stats.mode, y.cost);
                let _ = writeln!(
                    s,
                    "{:>8} {:>6} {:>6} {:<16} {:>12} {:>10} {:>6}",
                    "circuit", "from", "to", "corridor", "cost", "rating", "year"
                );
                for b in &y.built {
                    let _ = writeln!(
                        s,
                        "{:>8} {:>6} {:>6} {:<16} {:>12.4} {:>10.2} {:>6}",
                        b.circuit, b.from_bus, b.to_bus, b.corridor, b.cost, b.rating, b.entry_year
                    );
                }
                let nonzero = y.residual_shed.iter().filter(|r| r.shed > 0.0).count();
                let _ = writeln!(
                    s,
                    "scenarios {}  max residual shed {:.6}  nonzero {}",
                    y.residual_shed.len(),
                    y.max_shed,
                    nonzero
                );
                let _ = write!(
                    s,
                    "iterations {}  greedy rounds {}  pruned {}  cuts {}  gap {}",
                    y.stats.iterations, y.stats.greedy_rounds, y.stats.pruned, y.stats.cuts, y.stats.gap
                );
                if let Some(lb) = y.stats.lower_bound {
                    let _ = write!(s, "  lower bound {lb:.4}");
                }
                if let Some(ms) = y.stats.wall_time_ms {
                    let _ = write!(s, "  wall {ms} ms");
                }
                let _ = writeln!(s);
                let _ = writeln!(s);
            }
            let _ = writeln!(s, "total cost {:.4}", report.total_cost);
            s
        }
    }
}

/// Writes `<stem>.txt` and `<stem>.json`.
pub fn write_plan_report(report: &PlanReport, stem: &std::path::Path) -> Result<()> {
    std::fs::write(stem.with_extension("txt"), render_plan_report(report, ReportFormat::Text))?;
    std::fs::write(stem.with_extension("json"), render_plan_report(report, ReportFormat::Json))?;
    Ok(())
}

pub fn read_plan_report(text: &str) -> Result<PlanReport> {
    serde_json::from_str(text)
        .map_err(|e| TepError::Parse { location: format!("line {}", e.line()), message: e.to_string() })
}
