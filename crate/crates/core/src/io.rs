//! Network (TOML) and scenario (CSV) files.
//!
//! Network documents carry `format = "tep-network/1"`, a `base_mva`, an
//! optional `slack_bus` id, `[[bus]]` and `[[circuit]]` tables and an
//! optional `[options]` table. Scenario files are CSV with one row per
//! (scenario, bus) and the header
//! `scenario,bus,generation,demand,year,month,block,draw`; lines starting
//! with `#` are comments, and a `# format=tep-scenarios/1` tag is checked
//! when present.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TepError};
use crate::model::{
    prepare, validate_network, Bus, BusKind, Circuit, CircuitStatus, Network, OperationScenario, ScenarioLabel,
};
use crate::scalar::Real;

pub const NETWORK_FORMAT: &str = "tep-network/1";
pub const SCENARIO_FORMAT: &str = "tep-scenarios/1";

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> TepError {
    TepError::Parse { location: location.into(), message: message.into() }
}

/// Planning defaults stored with a network.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkOptions {
    pub penalty: Option<f64>,
    pub gap: Option<f64>,
    pub max_critical: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: usize,
    #[serde(default)]
    name: Option<String>,
    #[serde(default = "default_kind")]
    kind: BusKind,
}

fn default_kind() -> BusKind {
    BusKind::Connected
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    id: usize,
    from: usize,
    to: usize,
    susceptance: f64,
    rating: f64,
    status: CircuitStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corridor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slack_bus: Option<usize>,
    #[serde(default, rename = "bus")]
    buses: Vec<RawBus>,
    #[serde(default, rename = "circuit")]
    circuits: Vec<RawCircuit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    options: Option<NetworkOptions>,
}

/// A parsed network document.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkFile<T> {
    pub name: Option<String>,
    pub network: Network<T>,
    pub options: NetworkOptions,
}

/// Parses a network document without validating it.
pub fn parse_network<T: Real>(text: &str) -> Result<NetworkFile<T>> {
    let raw: RawNetwork = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            }
            None => "document".into(),
        };
        parse_err(location, e.message().to_string())
    })?;
    if raw.format != NETWORK_FORMAT {
        return Err(parse_err("format", format!("expected '{NETWORK_FORMAT}', found '{}'", raw.format)));
    }
    if !(raw.base_mva > 0.0 && raw.base_mva.is_finite()) {
        return Err(parse_err("base_mva", "must be positive"));
    }

    let mut index = HashMap::new();
    let mut buses = Vec::with_capacity(raw.buses.len());
    for (pos, b) in raw.buses.iter().enumerate() {
        if index.insert(b.id, pos).is_some() {
            return Err(parse_err(format!("bus[{pos}]"), format!("duplicate bus id {}", b.id)));
        }
        buses.push(Bus { id: b.id, name: b.name.clone().unwrap_or_else(|| format!("bus{}", b.id)), kind: b.kind });
    }

    let mut seen = HashMap::new();
    let mut circuits = Vec::with_capacity(raw.circuits.len());
    for (pos, c) in raw.circuits.iter().enumerate() {
        let loc = format!("circuit[{pos}] (id {})", c.id);
        if seen.insert(c.id, pos).is_some() {
            return Err(parse_err(loc, "duplicate circuit id"));
        }
        let end = |id: usize| index.get(&id).copied().ok_or_else(|| parse_err(loc.clone(), format!("unknown bus {id}")));
        let (from, to) = (end(c.from)?, end(c.to)?);
        let cost = match (c.status, c.cost) {
            (CircuitStatus::Candidate, None) => return Err(parse_err(loc, "candidate circuit requires 'cost'")),
            (_, cost) => cost.unwrap_or(0.0),
        };
        let corridor = c.corridor.clone().unwrap_or_else(|| format!("c{}", c.id));
        circuits.push(Circuit {
            id: c.id,
            from,
            to,
            susceptance: T::lit(c.susceptance),
            rating: T::lit(c.rating),
            status: c.status,
            cost: T::lit(cost),
            corridor,
            duplicate_rank: c.rank.unwrap_or(1),
        });
    }

    let slack = match raw.slack_bus {
        Some(id) => Some(index.get(&id).copied().ok_or_else(|| parse_err("slack_bus", format!("unknown bus {id}")))?),
        None => None,
    };
    Ok(NetworkFile {
        name: raw.name,
        network: Network::new(buses, circuits, slack, T::lit(raw.base_mva)),
        options: raw.options.unwrap_or_default(),
    })
}

/// Reads and validates a network file.
pub fn load_network<T: Real>(path: &Path) -> Result<NetworkFile<T>> {
    let text = fs::read_to_string(path)?;
    let file = parse_network(&text)?;
    validate_network(&file.network, &[]).into_result()?;
    Ok(file)
}

/// Serialises a network back to the TOML document format.
pub fn write_network<T: Real>(file: &NetworkFile<T>) -> String {
    let raw = RawNetwork {
        format: NETWORK_FORMAT.into(),
        name: file.name.clone(),
        base_mva: file.network.base_mva.as_f64(),
        slack_bus: file.network.slack_bus.map(|s| file.network.buses[s].id),
        buses: file
            .network
            .buses
            .iter()
            .map(|b| RawBus { id: b.id, name: Some(b.name.clone()), kind: b.kind })
            .collect(),
        circuits: file
            .network
            .circuits()
            .iter()
            .map(|c| RawCircuit {
                id: c.id,
                from: file.network.buses[c.from].id,
                to: file.network.buses[c.to].id,
                susceptance: c.susceptance.as_f64(),
                rating: c.rating.as_f64(),
                status: c.status,
                cost: (c.status == CircuitStatus::Candidate).then(|| c.cost.as_f64()),
                corridor: (c.status == CircuitStatus::Candidate).then(|| c.corridor.clone()),
                rank: (c.status == CircuitStatus::Candidate).then_some(c.duplicate_rank),
            })
            .collect(),
        options: (file.options != NetworkOptions::default()).then(|| file.options.clone()),
    };
    toml::to_string(&raw).expect("network serialises")
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRow {
    scenario: usize,
    bus: usize,
    generation: f64,
    demand: f64,
    #[serde(default)]
    year: Option<u32>,
    #[serde(default)]
    month: Option<u32>,
    #[serde(default)]
    block: Option<u32>,
    #[serde(default)]
    draw: Option<u32>,
}

/// Parses scenario rows against `network`'s bus ids. Scenarios come back
/// ordered by id; buses without a row get zero injection.
pub fn parse_scenarios<T: Real, R: Read>(network: &Network<T>, mut reader: R) -> Result<Vec<OperationScenario<T>>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if let Some(tag) = text.lines().filter_map(|l| l.trim().strip_prefix('#')).find_map(|l| l.trim().strip_prefix("format=")) {
        if tag.trim() != SCENARIO_FORMAT {
            return Err(parse_err("format", format!("expected '{SCENARIO_FORMAT}', found '{}'", tag.trim())));
        }
    }
    let index: HashMap<usize, usize> = network.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let nb = network.num_buses();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut by_id: BTreeMap<usize, (OperationScenario<T>, Vec<bool>)> = BTreeMap::new();
    let headers = rdr.headers().map_err(|e| parse_err("line 1", e.to_string()))?.clone();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let loc = e.position().map(|p| format!("line {}", p.line())).unwrap_or_else(|| "scenario file".into());
            parse_err(loc, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let row: ScenarioRow =
            record.deserialize(Some(&headers)).map_err(|e| parse_err(format!("line {line}"), e.to_string()))?;
        let bus = *index
            .get(&row.bus)
            .ok_or_else(|| parse_err(format!("line {line}"), format!("unknown bus {}", row.bus)))?;
        let (s, seen) = by_id.entry(row.scenario).or_insert_with(|| {
            let mut s = OperationScenario::new(row.scenario, vec![T::zero(); nb], vec![T::zero(); nb]);
            s.year = row.year.unwrap_or(1);
            if let (Some(month), Some(block), Some(draw)) = (row.month, row.block, row.draw) {
                s.label = Some(ScenarioLabel { month, block, draw });
            }
            (s, vec![false; nb])
        });
        if seen[bus] {
            return Err(parse_err(
                format!("line {line}"),
                format!("duplicate row for scenario {} bus {}", row.scenario, row.bus),
            ));
        }
        if row.year.unwrap_or(1) != s.year {
            return Err(parse_err(format!("line {line}"), format!("scenario {} spans several years", row.scenario)));
        }
        seen[bus] = true;
        s.generation[bus] = T::lit(row.generation);
        s.demand[bus] = T::lit(row.demand);
    }
    Ok(by_id.into_values().map(|(s, _)| s).collect())
}

/// Reads scenarios and validates them against the network.
pub fn load_scenarios<T: Real>(network: &Network<T>, path: &Path) -> Result<Vec<OperationScenario<T>>> {
    let scenarios = parse_scenarios(network, fs::File::open(path)?)?;
    validate_network(network, &scenarios).into_result()?;
    Ok(scenarios)
}

/// Writes scenarios in the CSV format, transshipment buses omitted.
pub fn write_scenarios<T: Real, W: Write>(
    network: &Network<T>,
    scenarios: &[OperationScenario<T>],
    out: W,
) -> Result<()> {
    let mut out = out;
    writeln!(out, "# format={SCENARIO_FORMAT}")?;
    let mut wtr = csv::Writer::from_writer(out);
    for s in scenarios {
        for (i, bus) in network.buses.iter().enumerate() {
            if network.is_transshipment(i) {
                continue;
            }
            let label = s.label;
            wtr.serialize(ScenarioRow {
                scenario: s.id,
                bus: bus.id,
                generation: s.generation[i].as_f64(),
                demand: s.demand[i].as_f64(),
                year: Some(s.year),
                month: label.map(|l| l.month),
                block: label.map(|l| l.block),
                draw: label.map(|l| l.draw),
            })
            .map_err(|e| TepError::Io(std::io::Error::other(e)))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Network and scenarios from files, validated together, slack pinned.
pub fn load_case<T: Real>(network: &Path, scenarios: &Path) -> Result<(NetworkFile<T>, Vec<OperationScenario<T>>)> {
    let mut file = load_network::<T>(network)?;
    let scenarios = load_scenarios(&file.network, scenarios)?;
    file.network = prepare(file.network, &scenarios)?;
    Ok((file, scenarios))
}

#[cfg(test)]
mod tests;
