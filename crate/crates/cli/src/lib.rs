//! Command-line front end: input loading, reports, oracle re-checks and the
//! benchmark harness.

pub mod bench;
pub mod check;
pub mod report;

use std::path::Path;

use anyhow::{bail, Context, Result};

use diffcost_core::handelman::LinearSystem;
use diffcost_core::invariants::{parse_invariants, UserInvariants};
use diffcost_core::lp::format::{write_solution, SolutionText};
use diffcost_core::lp::{solve_exact, LpStatus, SimplexOptions};
use diffcost_core::parse::{parse_program, parse_transition_system};
use diffcost_core::ts::TransitionSystem;

/// Loads a `.ts` transition system, or lowers any other file as `.imp`.
pub fn load_system(path: &Path) -> Result<TransitionSystem> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ts = if path.extension().is_some_and(|e| e == "ts") {
        parse_transition_system(&text)
    } else {
        parse_program(&text)
    };
    ts.with_context(|| format!("parsing {}", path.display()))
}

pub fn load_invariants(path: Option<&Path>) -> Result<UserInvariants> {
    match path {
        None => Ok(UserInvariants::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_invariants(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

/// Solves a system with the exact simplex and renders the answer in the
/// solution format read by the external backend.
pub fn solve_lp_text(sys: &LinearSystem, max_pivots: u64) -> Result<String> {
    let opts = SimplexOptions {
        max_pivots,
        ..SimplexOptions::default()
    };
    let sol = solve_exact(sys, &opts);
    match sol.status {
        LpStatus::Timeout | LpStatus::Rejected => bail!("no answer: {}", sol.status.keyword()),
        _ => Ok(write_solution(&SolutionText {
            status: sol.status,
            objective: sol.objective,
            values: sol.values,
        })),
    }
}
