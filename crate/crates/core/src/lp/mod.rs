//! Solving assembled linear systems and materializing witnesses.

pub mod format;
mod num;
mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::process::{Command, Stdio};

use num_bigint::BigInt;
use num_traits::Signed;
use thiserror::Error;

pub use simplex::{solve_exact, SimplexOptions};

use crate::constraints::TemplateMap;
use crate::handelman::LinearSystem;
use crate::linear::Sym;
use crate::poly::{Polynomial, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    /// The pivot cap was reached.
    Timeout,
    /// An answer was produced but failed exact verification.
    Rejected,
}

impl LpStatus {
    pub fn keyword(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Feasible => "feasible",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::Timeout => "timeout",
            LpStatus::Rejected => "rejected",
        }
    }

    pub fn is_solved(self) -> bool {
        matches!(self, LpStatus::Optimal | LpStatus::Feasible)
    }
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: BTreeMap<Sym, Rational>,
    pub objective: Option<Rational>,
    pub pivots: u64,
    /// Exact primal (and, for optima, dual) certificate checked.
    pub certified: bool,
    pub message: Option<String>,
}

impl LpSolution {
    pub fn with_status(status: LpStatus) -> Self {
        LpSolution {
            status,
            values: BTreeMap::new(),
            objective: None,
            pivots: 0,
            certified: false,
            message: None,
        }
    }

    fn timeout(pivots: u64) -> Self {
        let mut s = LpSolution::with_status(LpStatus::Timeout);
        s.pivots = pivots;
        s
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("unknown solver backend `{0}` (expected `exact` or `external:<command>`)")]
    UnknownBackend(String),
    #[error("external solver: {0}")]
    External(String),
    #[error("external solver output: {0}")]
    Output(#[from] format::FormatError),
    #[error("no solution to extract a witness from (status {0})")]
    NotSolved(LpStatus),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Backend {
    Exact(SimplexOptions),
    /// Shell command reading the LP text on stdin and printing a solution.
    External(String),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Exact(SimplexOptions::default())
    }
}

impl Backend {
    pub fn parse(name: &str, max_pivots: u64) -> Result<Backend, LpError> {
        if name == "exact" || name == "exact-simplex" {
            Ok(Backend::Exact(SimplexOptions {
                max_pivots,
                ..SimplexOptions::default()
            }))
        } else if let Some(cmd) = name.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                return Err(LpError::UnknownBackend(name.to_string()));
            }
            Ok(Backend::External(cmd.to_string()))
        } else {
            Err(LpError::UnknownBackend(name.to_string()))
        }
    }

    pub fn name(&self) -> String {
        match self {
            Backend::Exact(_) => "exact".into(),
            Backend::External(c) => format!("external:{c}"),
        }
    }
}

pub fn solve(sys: &LinearSystem, backend: &Backend) -> Result<LpSolution, LpError> {
    match backend {
        Backend::Exact(opts) => Ok(solve_exact(sys, opts)),
        Backend::External(cmd) => solve_external(sys, cmd),
    }
}

fn run_external(cmd: &str, input: &str) -> Result<String, LpError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| LpError::External(format!("cannot start `{cmd}`: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let text = input.to_string();
    let writer = std::thread::spawn(move || stdin.write_all(text.as_bytes()));
    let out = child
        .wait_with_output()
        .map_err(|e| LpError::External(e.to_string()))?;
    let _ = writer.join();
    if !out.status.success() {
        return Err(LpError::External(format!(
            "`{cmd}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Checks a floating-point answer against the system with absolute
/// residual tolerance 1e-6.
pub fn verify_within_tolerance(sys: &LinearSystem, values: &BTreeMap<Sym, Rational>) -> Result<(), String> {
    let tol = format::tolerance();
    for (k, e) in sys.equalities.iter().enumerate() {
        let r = e.eval(values);
        if r.abs() > tol {
            return Err(format!("equality {k} has residual {}", crate::poly::fmt_rational(&r)));
        }
    }
    for (k, i) in sys.inequalities.iter().enumerate() {
        let r = i.eval(values);
        if r < -tol.clone() {
            return Err(format!("inequality {k} is violated by {}", crate::poly::fmt_rational(&-r)));
        }
    }
    Ok(())
}

pub fn solve_external(sys: &LinearSystem, cmd: &str) -> Result<LpSolution, LpError> {
    let out = run_external(cmd, &format::write_lp(sys))?;
    let parsed = format::parse_solution(&out)?;
    let mut sol = LpSolution::with_status(parsed.status);
    if !parsed.status.is_solved() {
        return Ok(sol);
    }
    sol.values = sys
        .variables
        .iter()
        .map(|s| (s.clone(), parsed.values.get(s).cloned().unwrap_or_default()))
        .collect();
    sol.objective = sys.objective.as_ref().map(|(_, o)| o.eval(&sol.values));
    match verify_within_tolerance(sys, &sol.values) {
        Ok(()) => sol.certified = sys.satisfied_by(&sol.values),
        Err(msg) => {
            sol.status = LpStatus::Rejected;
            sol.message = Some(msg);
        }
    }
    Ok(sol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Diff,
    Verify,
    Refute,
    Precision,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Diff => "diff",
            Mode::Verify => "verify",
            Mode::Refute => "refute",
            Mode::Precision => "single",
        }
    }
}

/// Solved threshold and concrete potential / anti-potential functions.
///
/// In differential mode `pf` belongs to the new version and `anti_pf` to the
/// old one; in refutation mode the roles are swapped; in precision mode
/// both belong to the single analyzed program.
#[derive(Clone, Debug)]
pub struct Witness {
    pub mode: Mode,
    pub threshold_raw: Option<Rational>,
    pub threshold_int: Option<BigInt>,
    pub pf: BTreeMap<String, Polynomial>,
    pub anti_pf: BTreeMap<String, Polynomial>,
}

pub fn extract_witness(
    sol: &LpSolution,
    pf: &TemplateMap,
    anti_pf: &TemplateMap,
    threshold: Option<&Sym>,
    mode: Mode,
) -> Result<Witness, LpError> {
    if !sol.status.is_solved() {
        return Err(LpError::NotSolved(sol.status));
    }
    let threshold_raw = threshold.map(|t| sol.values.get(t).cloned().unwrap_or_default());
    let threshold_int = threshold_raw.as_ref().map(|r| r.floor().to_integer());
    Ok(Witness {
        mode,
        threshold_raw,
        threshold_int,
        pf: pf.instantiate(&sol.values),
        anti_pf: anti_pf.instantiate(&sol.values),
    })
}

/// Whether a raw threshold from a floating-point backend should be rounded
/// before flooring: values within 1e-6 of an integer are snapped.
pub fn snap_threshold(raw: &Rational) -> Rational {
    format::snap_integer(raw, &format::tolerance())
}
