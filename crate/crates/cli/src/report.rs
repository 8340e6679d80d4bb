//! Analysis reports in text and JSON form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use diffcost_core::analysis::{Analysis, Verdict};
use diffcost_core::lp::Mode;
use diffcost_core::oracle::WitnessReport;
use diffcost_core::poly::fmt_rational;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub degree: u32,
    pub prodk: u32,
    pub solver: String,
    pub eps: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSummary {
    pub status: Option<String>,
    pub constraints: usize,
    pub variables: usize,
    pub equalities: usize,
    pub inequalities: usize,
    pub pivots: u64,
    pub certified: bool,
}

/// One concrete function per location, with the role it plays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub role: String,
    pub program: String,
    pub locations: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub passed: bool,
    pub inputs: usize,
    pub states: usize,
    pub failures: Vec<String>,
}

impl From<&WitnessReport> for CheckSummary {
    fn from(r: &WitnessReport) -> Self {
        CheckSummary {
            passed: r.passed(),
            inputs: r.inputs,
            states: r.states,
            failures: r
                .failures
                .iter()
                .map(|f| format!("{} at {} (input {}, state {})", f.what, f.location, f.input, f.state))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mode: String,
    pub status: String,
    pub reason: Option<String>,
    pub threshold_raw: Option<String>,
    pub threshold_int: Option<String>,
    /// Input at which a refutation succeeded.
    pub refuted_at: Option<BTreeMap<String, String>>,
    pub functions: Vec<FunctionReport>,
    /// Program → location → conjuncts (each `e >= 0`).
    pub invariants: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub parameters: Parameters,
    pub lp: LpSummary,
    pub timings: Vec<Timing>,
    pub warnings: Vec<String>,
    pub unbounded_premises: Vec<String>,
    pub check: Option<CheckSummary>,
    /// Witness re-checked against the oracle on its test box.
    pub sound_verified: bool,
}

fn roles(mode: Mode) -> [(&'static str, &'static str); 2] {
    match mode {
        Mode::Diff | Mode::Verify => [("potential", "new"), ("anti-potential", "old")],
        Mode::Refute => [("potential", "old"), ("anti-potential", "new")],
        Mode::Precision => [("potential", "program"), ("anti-potential", "program")],
    }
}

impl AnalysisReport {
    pub fn from_analysis(a: &Analysis) -> Self {
        let (reason, refuted_at) = match &a.verdict {
            Verdict::Unknown(r) => (Some(r.clone()), None),
            Verdict::Refuted(x) => (
                None,
                Some(x.0.iter().map(|(v, n)| (v.to_string(), n.to_string())).collect()),
            ),
            _ => (None, None),
        };
        let mut functions = Vec::new();
        if let Some(w) = &a.witness {
            let [(r1, p1), (r2, p2)] = roles(a.mode);
            for (role, program, f) in [(r1, p1, &w.pf), (r2, p2, &w.anti_pf)] {
                functions.push(FunctionReport {
                    role: role.into(),
                    program: program.into(),
                    locations: f.iter().map(|(l, p)| (l.clone(), p.to_string())).collect(),
                });
            }
        }
        let invariants = a
            .invariants
            .iter()
            .map(|(prog, inv)| {
                let locs = inv
                    .iter()
                    .map(|(l, asr)| (l.clone(), asr.conjuncts.iter().map(|c| format!("{c} >= 0")).collect()))
                    .collect();
                (prog.clone(), locs)
            })
            .collect();
        let w = a.witness.as_ref();
        AnalysisReport {
            mode: a.mode.name().into(),
            status: a.verdict.name().into(),
            reason,
            threshold_raw: w.and_then(|w| w.threshold_raw.as_ref()).map(fmt_rational),
            threshold_int: w.and_then(|w| w.threshold_int.as_ref()).map(|n| n.to_string()),
            refuted_at,
            functions,
            invariants,
            parameters: Parameters {
                degree: a.degree,
                prodk: a.prodk,
                solver: a.solver.clone(),
                eps: fmt_rational(&a.eps),
            },
            lp: LpSummary {
                status: a.lp_status.map(|s| s.keyword().to_string()),
                constraints: a.lp.constraints,
                variables: a.lp.variables,
                equalities: a.lp.equalities,
                inequalities: a.lp.inequalities,
                pivots: a.lp.pivots,
                certified: a.lp.certified,
            },
            timings: a
                .timings
                .iter()
                .map(|(p, d)| Timing {
                    phase: p.clone(),
                    ms: d.as_secs_f64() * 1e3,
                })
                .collect(),
            warnings: a.warnings.clone(),
            unbounded_premises: a.unbounded.clone(),
            check: None,
            sound_verified: false,
        }
    }

    pub fn attach_check(&mut self, c: CheckSummary) {
        self.sound_verified = c.passed;
        self.check = Some(c);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode: {}", self.mode);
        let _ = writeln!(s, "status: {}", self.status);
        if let Some(r) = &self.reason {
            let _ = writeln!(s, "reason: {r}");
        }
        if let (Some(raw), Some(int)) = (&self.threshold_raw, &self.threshold_int) {
            let label = if self.mode == "single" { "precision" } else { "threshold" };
            let _ = writeln!(s, "{label}: {int} (raw {raw})");
        }
        if let Some(x) = &self.refuted_at {
            let parts: Vec<String> = x.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "refuted at: {}", parts.join(", "));
        }
        for f in &self.functions {
            let _ = writeln!(s, "{} ({}):", f.role, f.program);
            for (l, p) in &f.locations {
                let _ = writeln!(s, "  {l}: {p}");
            }
        }
        for (prog, locs) in &self.invariants {
            let _ = writeln!(s, "invariants ({prog}):");
            for (l, cs) in locs {
                let body = if cs.is_empty() { "true".to_string() } else { cs.join(", ") };
                let _ = writeln!(s, "  {l}: {body}");
            }
        }
        let p = &self.parameters;
        let _ = writeln!(s, "parameters: d={} K={} solver={} eps={}", p.degree, p.prodk, p.solver, p.eps);
        let lp = &self.lp;
        let _ = writeln!(
            s,
            "lp: status={} constraints={} variables={} equalities={} inequalities={} pivots={} certified={}",
            lp.status.as_deref().unwrap_or("-"),
            lp.constraints,
            lp.variables,
            lp.equalities,
            lp.inequalities,
            lp.pivots,
            lp.certified
        );
        let times: Vec<String> = self.timings.iter().map(|t| format!("{}={:.1}ms", t.phase, t.ms)).collect();
        let _ = writeln!(s, "timings: {}", times.join(" "));
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for u in &self.unbounded_premises {
            let _ = writeln!(s, "unbounded premises: {u}");
        }
        if let Some(c) = &self.check {
            let _ = writeln!(
                s,
                "oracle check: {} ({} inputs, {} states)",
                if c.passed { "passed" } else { "FAILED" },
                c.inputs,
                c.states
            );
            for f in &c.failures {
                let _ = writeln!(s, "  {f}");
            }
            if c.passed {
                let _ = writeln!(s, "sound-verified");
            }
        }
        s
    }
}
