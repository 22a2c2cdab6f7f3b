#![allow(dead_code)]

use tep_core::oracle::fixtures;
use tep_core::Fixture;
use tep_core::scenario_gen::{generate_scenarios, ScenarioGenConfig};
use tep_core::{Network, OperationScenario};

pub struct Case {
    pub name: String,
    pub network: Network,
    pub scenarios: Vec<OperationScenario>,
}

pub fn fixture_dir(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn six_bus() -> Fixture {
    tep_core::oracle::load_fixture("six_bus").unwrap()
}

/// Scenarios from the six-bus profile file `file` with the given seed.
pub fn six_bus_generated(file: &str, seed: Option<u64>) -> Vec<OperationScenario> {
    let text = std::fs::read_to_string(fixture_dir("six_bus").join(file)).unwrap();
    let mut config = ScenarioGenConfig::from_toml(&text).unwrap();
    if let Some(s) = seed {
        config.seed = s;
    }
    generate_scenarios(six_bus().network(), &config).unwrap()
}

/// Shipped fixtures plus six-bus scenario sets drawn with extra seeds.
pub fn cases() -> Vec<Case> {
    let mut out: Vec<Case> = fixtures::<f64>()
        .unwrap()
        .into_iter()
        .map(|f| Case { name: f.name.to_string(), network: f.file.network, scenarios: f.scenarios })
        .collect();
    let net = six_bus().file.network;
    for seed in 1..=4 {
        out.push(Case {
            name: format!("six_bus/seed{seed}"),
            network: net.clone(),
            scenarios: six_bus_generated("scenarios.toml", Some(seed)),
        });
    }
    out
}
