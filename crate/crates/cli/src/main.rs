use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use tep_core::benders::{SelectionCriterion, SelectionMode};
use tep_core::dc::{dc_power_flow, SHED_TOLERANCE};
use tep_core::io::{load_case, parse_network, parse_scenarios, write_scenarios};
use tep_core::model::validate_network;
use tep_core::oracle::{brute_force_oracle, check_properties, fixtures, load_fixture, SUITES};
use tep_core::pipeline::{render_plan_report, run_pipeline, write_plan_report, PlanningMode, ReportFormat};
use tep_core::scenario_gen::{generate_scenarios, ScenarioGenConfig};
use tep_core::{Engine, PipelineConfig, TepError, TrialPlan};

#[derive(Parser)]
#[command(name = "tep", version, about = "Robust transmission expansion planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Monolithic,
    Benders,
    GreedyBenders,
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    ShedAmount,
    ShedSpread,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network and optional scenario file for structural errors.
    Validate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Run DC power flow for a plan and list overloaded circuits.
    Screen {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        /// Built candidate circuit ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        built: Vec<usize>,
    },
    /// Compute a robust expansion plan.
    Plan {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, value_enum, default_value = "greedy-benders")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "shed-amount")]
        criterion: Criterion,
        /// Critical scenarios embedded in the master problem.
        #[arg(long)]
        max_critical: Option<usize>,
        /// Relative optimality gap.
        #[arg(long)]
        gap: Option<f64>,
        /// Curtailment penalty per MW.
        #[arg(long)]
        penalty: Option<f64>,
        /// Recorded in the log; the algorithms are deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Planning years in order, comma separated.
        #[arg(long, value_delimiter = ',')]
        years: Vec<u32>,
        /// Write `<stem>.txt` and `<stem>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write progress lines to this file.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
        /// Scale factor applied to every disjunctive constant.
        #[arg(long, default_value_t = 1.0)]
        big_m_scale: f64,
        #[arg(long)]
        no_bottleneck: bool,
        #[arg(long)]
        no_connectivity: bool,
        #[arg(long)]
        no_precedence: bool,
    },
    /// Generate month x block x draw scenarios from a profile file.
    GenScenarios {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enumerate every plan and report the robust optimum.
    Oracle {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant suites over the shipped fixtures.
    Check {
        /// One of the suite names, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        fixture: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<TepError>().map_or(3, TepError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| anyhow!(TepError::Io(e))).with_context(|| path.display().to_string())
}

fn run(command: Command) -> anyhow::Result<u8> {
    let engine = Engine::default();
    match command {
        Command::Validate { network, scenarios } => {
            let file = parse_network::<f64>(&read(&network)?)?;
            let list = match &scenarios {
                Some(p) => parse_scenarios(&file.network, read(p)?.as_bytes())?,
                None => Vec::new(),
            };
            let report = validate_network(&file.network, &list);
            println!("{report}");
            if report.is_ok() {
                println!(
                    "{} buses, {} existing, {} candidates, {} scenarios",
                    file.network.num_buses(),
                    file.network.num_existing(),
                    file.network.num_candidates(),
                    list.len()
                );
                Ok(0)
            } else {
                Ok(2)
            }
        }
        Command::Screen { network, scenarios, built } => {
            let (file, list) = load_case::<f64>(&network, &scenarios)?;
            let net = &file.network;
            let mut plan = TrialPlan::empty(net.num_candidates());
            for id in built {
                let k = net
                    .candidates()
                    .iter()
                    .position(|c| c.id == id)
                    .ok_or_else(|| TepError::Parse { location: "--built".into(), message: format!("no candidate {id}") })?;
                plan.decisions[k] = true;
            }
            let mut overloaded = 0;
            for s in &list {
                let st = dc_power_flow(net, &plan, s)?;
                if st.is_secure() {
                    continue;
                }
                overloaded += 1;
                for o in &st.overloads {
                    println!(
                        "scenario {}: circuit {} flow {:.4} exceeds rating by {:.4}",
                        s.id,
                        net.circuits()[o.circuit].id,
                        o.flow,
                        o.excess
                    );
                }
            }
            println!("{overloaded} of {} scenarios overloaded", list.len());
            Ok(0)
        }
        Command::Plan {
            network,
            scenarios,
            mode,
            criterion,
            max_critical,
            gap,
            penalty,
            seed,
            years,
            out,
            log,
            format,
            max_iterations,
            big_m_scale,
            no_bottleneck,
            no_connectivity,
            no_precedence,
        } => {
            let (file, list) = load_case::<f64>(&network, &scenarios)?;
            let defaults = PipelineConfig::default();
            let config = PipelineConfig {
                mode: match mode {
                    Mode::Monolithic => PlanningMode::Monolithic,
                    Mode::Benders => PlanningMode::Benders,
                    Mode::GreedyBenders => PlanningMode::GreedyBenders,
                },
                selection: SelectionCriterion {
                    mode: match criterion {
                        Criterion::ShedAmount => SelectionMode::ShedAmount,
                        Criterion::ShedSpread => SelectionMode::ShedSpread,
                    },
                    capacity: max_critical.or(file.options.max_critical).unwrap_or(defaults.selection.capacity),
                },
                gap: gap.or(file.options.gap).unwrap_or(defaults.gap),
                penalty: penalty.or(file.options.penalty),
                years,
                bottleneck: !no_bottleneck,
                connectivity: !no_connectivity,
                precedence: !no_precedence,
                max_iterations,
                big_m_scale,
                ..defaults
            };
            let mut sink = match &log {
                Some(p) => Some(fs::File::create(p).map_err(TepError::Io)?),
                None => None,
            };
            let mut emit = |line: String| {
                eprintln!("{line}");
                if let Some(f) = sink.as_mut() {
                    let _ = writeln!(f, "{line}");
                }
            };
            emit(format!("mode {} seed {seed} scenarios {}", config.mode.name(), list.len()));
            let result = run_pipeline(&engine, &file.network, &list, &config, &mut |e| emit(e.line()));
            let mut report = result?;
            report.network = file.name.clone();
            emit(format!("total cost {}", report.total_cost));
            let fmt = match format {
                Format::Text => ReportFormat::Text,
                Format::Json => ReportFormat::Json,
            };
            print!("{}", render_plan_report(&report, fmt));
            if let Some(stem) = out {
                write_plan_report(&report, &stem)?;
            }
            Ok(0)
        }
        Command::GenScenarios { network, config, seed, out } => {
            let file = parse_network::<f64>(&read(&network)?)?;
            validate_network(&file.network, &[]).into_result()?;
            let mut cfg = ScenarioGenConfig::from_toml(&read(&config)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let list = generate_scenarios(&file.network, &cfg)?;
            let f = fs::File::create(&out).map_err(TepError::Io)?;
            write_scenarios(&file.network, &list, std::io::BufWriter::new(f))?;
            eprintln!("wrote {} scenarios to {}", list.len(), out.display());
            Ok(0)
        }
        Command::Oracle { network, scenarios, out } => {
            let (file, list) = load_case::<f64>(&network, &scenarios)?;
            let result = brute_force_oracle(&engine, &file.network, &list, SHED_TOLERANCE)?;
            let ids = |mask: u64| -> Vec<usize> {
                TrialPlan::from_mask(file.network.num_candidates(), mask)
                    .built()
                    .map(|k| file.network.candidate(k).id)
                    .collect()
            };
            match result.optimal_cost {
                Some(cost) => {
                    println!("optimal cost {cost}");
                    for &m in &result.optimal_plans {
                        println!("optimal plan {:?}", ids(m));
                    }
                }
                None => {
                    println!("no robust plan; cost / max shed frontier:");
                    for e in &result.frontier {
                        println!("{:?} cost {} max shed {:.6}", ids(e.mask), e.cost, e.max_shed);
                    }
                }
            }
            if let Some(p) = out {
                let mut text = serde_json::to_string_pretty(&result)?;
                text.push('\n');
                fs::write(&p, text).map_err(TepError::Io)?;
            }
            Ok(if result.optimal_cost.is_some() { 0 } else { 1 })
        }
        Command::Check { suite, fixture } => {
            if suite != "all" && !SUITES.contains(&suite.as_str()) {
                return Err(TepError::Parse {
                    location: "--suite".into(),
                    message: format!("unknown suite '{suite}', expected one of {} or all", SUITES.join(", ")),
                }
                .into());
            }
            let list = match fixture {
                Some(name) => vec![load_fixture::<f64>(&name)?],
                None => fixtures::<f64>()?,
            };
            let report = check_properties(&engine, &suite, &list)?;
            for c in &report.checks {
                println!("{} {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.fixture, c.detail);
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}
