#![allow(dead_code)]

use std::path::PathBuf;

use diffcost_core::parse::{parse_program, parse_transition_system};
use diffcost_core::ts::TransitionSystem;

pub fn programs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench/programs")
}

pub fn load(name: &str) -> TransitionSystem {
    let path = programs_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let ts = if name.ends_with(".ts") {
        parse_transition_system(&text)
    } else {
        parse_program(&text)
    };
    ts.unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every `.imp` file in the benchmark directory, sorted by name.
pub fn all_programs() -> Vec<(String, TransitionSystem)> {
    let mut names: Vec<String> = std::fs::read_dir(programs_dir())
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".imp"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}

/// Benchmark pairs whose programs terminate on the default box.
pub const PAIRS: &[&str] = &[
    "dis1",
    "dis2",
    "nested_multiple",
    "nested_single",
    "sequential_single",
    "simple_multiple",
    "simple_single",
    "simple_single2",
    "ex4",
    "ex6",
    "ddec_modified",
    "sum",
    "join",
];

pub fn pair(name: &str) -> (TransitionSystem, TransitionSystem) {
    (load(&format!("{name}_new.imp")), load(&format!("{name}_old.imp")))
}
