//! Synthetic dispatch scenarios over months, load blocks and renewable draws.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TepError};
use crate::model::{Network, OperationScenario, ScenarioLabel, Subject, ValidationReport, Violation, ViolationCode};
use crate::scalar::Real;

/// Per-bus capacities and base load in MW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusProfile {
    /// Bus id.
    pub bus: usize,
    #[serde(default)]
    pub base_load: f64,
    #[serde(default)]
    pub dispatchable: f64,
    #[serde(default)]
    pub renewable: f64,
    /// Mean renewable capacity factor.
    #[serde(default)]
    pub capacity_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioGenConfig {
    pub months: u32,
    pub blocks: u32,
    pub draws: u32,
    pub seed: u64,
    #[serde(default = "default_year")]
    pub year: u32,
    /// Relative amplitude of the yearly load cycle.
    #[serde(default)]
    pub seasonal_amplitude: f64,
    /// Load factor of the last block; blocks fall linearly from 1.
    #[serde(default = "default_min_block")]
    pub min_block_factor: f64,
    /// Standard deviation of the renewable capacity factor per draw.
    #[serde(default)]
    pub renewable_volatility: f64,
    /// Relative standard deviation of bus loads per draw.
    #[serde(default)]
    pub load_volatility: f64,
    #[serde(default = "default_first_id")]
    pub first_id: usize,
    #[serde(rename = "bus")]
    pub profiles: Vec<BusProfile>,
}

fn default_year() -> u32 {
    1
}

fn default_min_block() -> f64 {
    0.6
}

fn default_first_id() -> usize {
    1
}

impl ScenarioGenConfig {
    pub fn count(&self) -> usize {
        (self.months * self.blocks * self.draws) as usize
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| TepError::Parse { location: "generator config".into(), message: e.message().into() })
    }

    fn validate<T: Real>(&self, network: &Network<T>) -> Result<Vec<Option<usize>>> {
        let mut report = ValidationReport::default();
        let mut at = Vec::new();
        for p in &self.profiles {
            match network.buses.iter().position(|b| b.id == p.bus) {
                Some(i) if network.is_transshipment(i) => report.violations.push(Violation {
                    code: ViolationCode::InjectionAtTransshipment,
                    subject: Subject::Bus(p.bus),
                    detail: "generator profile".into(),
                }),
                Some(i) => at.push(Some(i)),
                None => {
                    return Err(TepError::Parse {
                        location: "generator config".into(),
                        message: format!("unknown bus {}", p.bus),
                    })
                }
            }
            let values = [p.base_load, p.dispatchable, p.renewable, p.capacity_factor];
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) || p.capacity_factor > 1.0 {
                report.violations.push(Violation {
                    code: ViolationCode::NegativeInjection,
                    subject: Subject::Bus(p.bus),
                    detail: "profile values must be finite, non-negative, capacity factor <= 1".into(),
                });
            }
        }
        report.into_result()?;
        if self.months == 0 || self.blocks == 0 || self.draws == 0 {
            return Err(TepError::Parse { location: "generator config".into(), message: "counts must be positive".into() });
        }
        if !self.profiles.iter().any(|p| p.dispatchable > 0.0) {
            return Err(TepError::Parse {
                location: "generator config".into(),
                message: "at least one bus needs dispatchable capacity".into(),
            });
        }
        Ok(at)
    }
}

/// Generates `months * blocks * draws` balanced scenarios.
///
/// Loads follow `base * (1 + A cos(2 pi (m-1)/months)) * block_factor *
/// (1 + sigma_l z)`. Renewables produce `capacity * clamp(cf + sigma_r z, 0,
/// 1)` and are curtailed pro rata when they exceed the load. Dispatchable
/// units share the residual pro rata to capacity; the largest one absorbs any
/// residual beyond total dispatchable capacity.
pub fn generate_scenarios<T: Real>(network: &Network<T>, config: &ScenarioGenConfig) -> Result<Vec<OperationScenario<T>>> {
    let at = config.validate(network)?;
    let nb = network.num_buses();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let balancing = config
        .profiles
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.dispatchable.total_cmp(&b.1.dispatchable).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    let dispatch_cap: f64 = config.profiles.iter().map(|p| p.dispatchable).sum();

    let mut out = Vec::with_capacity(config.count());
    let mut id = config.first_id;
    for month in 1..=config.months {
        let season = 1.0 + config.seasonal_amplitude * (2.0 * PI * f64::from(month - 1) / f64::from(config.months)).cos();
        for block in 1..=config.blocks {
            let block_factor = if config.blocks == 1 {
                1.0
            } else {
                1.0 - (1.0 - config.min_block_factor) * f64::from(block - 1) / f64::from(config.blocks - 1)
            };
            for draw in 1..=config.draws {
                let mut load = Vec::with_capacity(config.profiles.len());
                let mut renew = Vec::with_capacity(config.profiles.len());
                for p in &config.profiles {
                    let zl: f64 = StandardNormal.sample(&mut rng);
                    let zr: f64 = StandardNormal.sample(&mut rng);
                    load.push((p.base_load * season * block_factor * (1.0 + config.load_volatility * zl)).max(0.0));
                    renew.push(p.renewable * (p.capacity_factor + config.renewable_volatility * zr).clamp(0.0, 1.0));
                }
                let total_load: f64 = load.iter().sum();
                let total_renew: f64 = renew.iter().sum();
                let mut gen = vec![0.0; config.profiles.len()];
                if total_renew >= total_load {
                    let scale = if total_renew > 0.0 { total_load / total_renew } else { 0.0 };
                    for (g, r) in gen.iter_mut().zip(&renew) {
                        *g = r * scale;
                    }
                } else {
                    let residual = total_load - total_renew;
                    let share = (residual / dispatch_cap).min(1.0);
                    for ((g, r), p) in gen.iter_mut().zip(&renew).zip(&config.profiles) {
                        *g = r + p.dispatchable * share;
                    }
                    gen[balancing] += (residual - dispatch_cap).max(0.0);
                }
                let imbalance = total_load - gen.iter().sum::<f64>();
                gen[balancing] += imbalance;

                let mut generation = vec![T::zero(); nb];
                let mut demand = vec![T::zero(); nb];
                for (n, i) in at.iter().enumerate() {
                    let i = i.expect("validated");
                    generation[i] += T::lit(gen[n]);
                    demand[i] += T::lit(load[n]);
                }
                let mut s = OperationScenario::new(id, generation, demand);
                s.year = config.year;
                s.label = Some(ScenarioLabel { month, block, draw });
                out.push(s);
                id += 1;
            }
        }
    }
    Ok(out)
}
