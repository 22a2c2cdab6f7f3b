use super::*;
use crate::model::{validate_network, ViolationCode};

const NET: &str = r#"
format = "tep-network/1"
base_mva = 100.0

[[bus]]
id = 10

[[bus]]
id = 20
name = "Load"

[[circuit]]
id = 1
from = 10
to = 20
susceptance = 10.0
rating = 80.0
status = "existing"

[[circuit]]
id = 2
from = 10
to = 20
susceptance = 10.0
rating = 50.0
status = "candidate"
cost = 10.0
corridor = "a"
rank = 1
"#;

const SCEN: &str = "# format=tep-scenarios/1
scenario,bus,generation,demand,year,month,block,draw
2,10,100,0,1,,,
2,20,0,100,1,,,
1,10,60,0,1,3,2,1
1,20,0,60,1,3,2,1
";

#[test]
fn network_round_trip() {
    let file = parse_network::<f64>(NET).unwrap();
    assert_eq!(file.network.num_buses(), 2);
    assert_eq!(file.network.num_candidates(), 1);
    assert_eq!(file.network.candidate(0).to, 1);
    assert_eq!(file.network.buses[1].name, "Load");
    let again = parse_network::<f64>(&write_network(&file)).unwrap();
    assert_eq!(again, file);
}

#[test]
fn scenarios_are_ordered_and_labelled() {
    let file = parse_network::<f64>(NET).unwrap();
    let s = parse_scenarios(&file.network, SCEN.as_bytes()).unwrap();
    assert_eq!(s.iter().map(|x| x.id).collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(s[0].label, Some(ScenarioLabel { month: 3, block: 2, draw: 1 }));
    assert_eq!(s[1].label, None);
    assert_eq!(s[1].demand, vec![0.0, 100.0]);
    let mut buf = Vec::new();
    write_scenarios(&file.network, &s, &mut buf).unwrap();
    assert_eq!(parse_scenarios(&file.network, buf.as_slice()).unwrap(), s);
}

#[test]
fn duplicate_bus_is_reported() {
    let text = NET.replace("id = 20", "id = 10");
    let err = parse_network::<f64>(&text).unwrap_err();
    assert!(err.to_string().contains("duplicate bus id 10"), "{err}");
}

#[test]
fn candidate_without_cost_is_reported() {
    let text = NET.replace("cost = 10.0\n", "");
    let err = parse_network::<f64>(&text).unwrap_err();
    assert!(err.to_string().contains("requires 'cost'"), "{err}");
}

#[test]
fn unknown_bus_in_scenarios_names_line() {
    let file = parse_network::<f64>(NET).unwrap();
    let text = SCEN.replace("2,20,0,100", "2,30,0,100");
    let err = parse_scenarios(&file.network, text.as_bytes()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("unknown bus 30") && msg.contains("line 4"), "{msg}");
}

#[test]
fn syntax_error_names_line() {
    let text = NET.replace("rating = 80.0", "rating = eighty");
    let msg = parse_network::<f64>(&text).unwrap_err().to_string();
    assert!(msg.contains("line 17"), "{msg}");
}

#[test]
fn imbalance_fails_validation() {
    let file = parse_network::<f64>(NET).unwrap();
    let text = SCEN.replace("2,10,100,0", "2,10,90,0");
    let s = parse_scenarios(&file.network, text.as_bytes()).unwrap();
    let report = validate_network(&file.network, &s);
    assert!(report.has(ViolationCode::ScenarioImbalance), "{report:?}");
}

#[test]
fn wrong_format_tag_is_rejected() {
    let file = parse_network::<f64>(NET).unwrap();
    let text = SCEN.replace("tep-scenarios/1", "tep-scenarios/9");
    assert!(parse_scenarios(&file.network, text.as_bytes()).is_err());
    assert!(parse_network::<f64>(&NET.replace("tep-network/1", "other")).is_err());
}
