//! Benchmark suite runner producing a tightness table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use diffcost_core::analysis::{complete_input, diff, AnalysisOptions, Verdict};
use diffcost_core::oracle::{cost_extremes, RunBudget};
use diffcost_core::parse::parse_valuation;
use diffcost_core::poly::{fmt_rational, Rational};
use diffcost_core::ts::{TransitionSystem, Valuation};

use crate::{check, load_invariants, load_system};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    /// Integer threshold equals the tight value.
    Tight,
    /// Any sound threshold, or none.
    Loose,
    /// No threshold expected; a sound one is still accepted.
    Unknown,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Entry {
    pub name: String,
    pub new: PathBuf,
    pub old: PathBuf,
    /// Maximal attainable cost difference.
    pub tight: i64,
    /// Value reported for the original tool, kept for comparison only.
    pub reported: Option<String>,
    pub expect: Expect,
    /// Input at which the oracle attains `tight`.
    pub attain: Option<String>,
    #[serde(default = "default_degree")]
    pub degree: u32,
    pub prodk: Option<u32>,
    pub invariants: Option<PathBuf>,
}

fn default_degree() -> u32 {
    2
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct Suite {
    #[serde(default, rename = "benchmark")]
    pub entries: Vec<Entry>,
}

impl Suite {
    /// Reads a suite file; entry paths are made relative to its directory.
    pub fn load(path: &Path) -> Result<Suite> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut suite: Suite = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut suite.entries {
            e.new = base.join(&e.new);
            e.old = base.join(&e.old);
            if let Some(i) = &mut e.invariants {
                *i = base.join(&*i);
            }
        }
        Ok(suite)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub status: String,
    pub threshold_raw: Option<String>,
    pub threshold_int: Option<String>,
    pub tight: i64,
    pub reported: Option<String>,
    pub expect: Expect,
    /// Integer threshold equals the tight value.
    pub matched: bool,
    /// Outcome consistent with the expectation (and sound).
    pub ok: bool,
    /// Oracle re-check of the witness, when run.
    pub sound_verified: Option<bool>,
    /// Oracle difference at the `attain` input equals `tight`, when run.
    pub attained: Option<bool>,
    pub seconds: f64,
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub check: bool,
    pub base: AnalysisOptions,
}

fn run_entry(e: &Entry, opts: &BenchOptions) -> Row {
    let start = Instant::now();
    let mut row = Row {
        name: e.name.clone(),
        status: "error".into(),
        threshold_raw: None,
        threshold_int: None,
        tight: e.tight,
        reported: e.reported.clone(),
        expect: e.expect,
        matched: false,
        ok: false,
        sound_verified: None,
        attained: None,
        seconds: 0.0,
        note: None,
    };
    let result = (|| -> Result<()> {
        let new = load_system(&e.new)?;
        let old = load_system(&e.old)?;
        let user = load_invariants(e.invariants.as_deref())?;
        let mut o = opts.base.clone();
        o.degree = e.degree;
        o.prodk = e.prodk;
        let a = diff(&new, &old, &user, &o)?;
        row.status = a.verdict.name().into();
        let raw = a.witness.as_ref().and_then(|w| w.threshold_raw.clone());
        let int = a.witness.as_ref().and_then(|w| w.threshold_int.clone());
        row.threshold_raw = raw.as_ref().map(fmt_rational);
        row.threshold_int = int.as_ref().map(|n| n.to_string());
        let tight = Rational::from_integer(e.tight.into());
        let sound = raw.as_ref().map_or(true, |r| *r >= tight);
        row.matched = a.verdict == Verdict::Bounded && int.as_ref().is_some_and(|n| *n == e.tight.into());
        let near = raw.as_ref().is_some_and(|r| *r <= &tight + Rational::from_integer(1.into()));
        row.ok = sound
            && match e.expect {
                Expect::Tight => row.matched && near,
                Expect::Loose | Expect::Unknown => true,
            };
        if let Verdict::Unknown(r) = &a.verdict {
            row.note = Some(r.clone());
        }
        if !sound {
            row.note = Some("threshold below the attainable difference".into());
        }
        if opts.check && a.witness.is_some() {
            let c = check::check_diff(&a, &new, &old)?;
            let passed = c.as_ref().map_or(true, |c| c.passed);
            row.sound_verified = Some(passed);
            if !passed {
                row.ok = false;
                row.note = c.and_then(|c| c.failures.first().cloned());
            }
        }
        if let (true, Some(x)) = (opts.check, &e.attain) {
            let x = complete_input(&new, &parse_valuation(x)?)?;
            let d = attained_difference(&new, &old, &x)?;
            let hit = d == tight;
            row.attained = Some(hit);
            if !hit {
                row.ok = false;
                row.note = Some(format!("oracle difference at {x} is {}, not {}", fmt_rational(&d), e.tight));
            }
        }
        Ok(())
    })();
    if let Err(err) = result {
        row.note = Some(format!("{err:#}"));
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

fn attained_difference(new: &TransitionSystem, old: &TransitionSystem, x: &Valuation) -> Result<Rational> {
    let mut budget = RunBudget::for_system(new);
    budget.max_steps = 1_000_000;
    let (_, sup) = cost_extremes(new, x, &budget)?;
    let (inf, _) = cost_extremes(old, x, &budget)?;
    Ok(sup - inf)
}

/// Runs every entry (in parallel) and returns rows in suite order.
pub fn run_suite(suite: &Suite, opts: &BenchOptions) -> Vec<Row> {
    suite.entries.par_iter().map(|e| run_entry(e, opts)).collect()
}

pub fn render_table(rows: &[Row]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>7} {:>9} {:>12} {:>8} {:>6} {:>8} {:>6} {:>8} {:>5} {:>8}",
        "benchmark", "tight", "reported", "computed", "floor", "match", "expect", "sound", "attained", "ok", "time(s)"
    );
    for r in rows {
        let expect = match r.expect {
            Expect::Tight => "tight",
            Expect::Loose => "loose",
            Expect::Unknown => "unknown",
        };
        let flag = |b: Option<bool>| match b {
            Some(true) => "yes",
            Some(false) => "NO",
            None => "-",
        };
        let _ = writeln!(
            s,
            "{:<20} {:>7} {:>9} {:>12} {:>8} {:>6} {:>8} {:>6} {:>8} {:>5} {:>8.2}",
            r.name,
            r.tight,
            r.reported.as_deref().unwrap_or("-"),
            r.threshold_raw.as_deref().unwrap_or(&r.status),
            r.threshold_int.as_deref().unwrap_or("-"),
            if r.matched { "yes" } else { "no" },
            expect,
            flag(r.sound_verified),
            flag(r.attained),
            if r.ok { "ok" } else { "FAIL" },
            r.seconds
        );
        if let Some(n) = &r.note {
            let _ = writeln!(s, "  {}: {n}", r.name);
        }
    }
    s
}
