//! Robust transmission expansion planning under DC power flow.
//!
//! Core types are generic over the scalar through [`scalar::Real`]; the
//! aliases below fix it to `f64`.

pub mod benders;
pub mod dc;
pub mod error;
pub mod formulation;
pub mod greedy;
pub mod io;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod scenario_gen;

pub use error::{Result, TepError};
pub use model::{BusKind, CircuitStatus, TrialPlan};

pub type Network = model::Network<f64>;
pub type Circuit = model::Circuit<f64>;
pub type OperationScenario = model::OperationScenario<f64>;
pub type BigMData = formulation::BigMData<f64>;
pub type BendersCut = dc::BendersCut<f64>;
pub type FeasibilityResult = dc::FeasibilityResult<f64>;
pub type BendersConfig = benders::BendersConfig<f64>;
pub type BendersOutcome = benders::BendersOutcome<f64>;
pub type GreedyConfig = greedy::GreedyConfig<f64>;
pub type GreedyOutcome = greedy::GreedyOutcome<f64>;
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
pub type Fixture = oracle::Fixture<f64>;
pub type Engine = lp::SimplexEngine;
