use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use diffcost_cli::bench::{render_table, run_suite, BenchOptions, Suite};
use diffcost_cli::report::AnalysisReport;
use diffcost_cli::{check, load_invariants, load_system, solve_lp_text};
use diffcost_core::analysis::{self, Analysis, AnalysisOptions, RefuteTarget};
use diffcost_core::invariants::{InferenceOptions, IntervalOptions};
use diffcost_core::lp::format::{parse_lp, parse_number, write_lp};
use diffcost_core::lp::Backend;
use diffcost_core::oracle::{cost_extremes, max_diff, OracleError, RunBudget};
use diffcost_core::parse::{parse_polynomial, parse_valuation};
use diffcost_core::poly::fmt_rational;

#[derive(Parser)]
#[command(name = "diffcost", version, about = "Differential cost analysis of integer programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimal threshold on the cost increase from OLD to NEW.
    Diff {
        new: PathBuf,
        old: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Prove that a symbolic polynomial bounds the cost increase.
    Verify {
        new: PathBuf,
        old: PathBuf,
        /// Polynomial over the program variables, e.g. `lenA*lenB`.
        #[arg(long)]
        bound: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Show that T is not a threshold.
    Refute {
        new: PathBuf,
        old: PathBuf,
        #[arg(long, short = 't', allow_hyphen_values = true)]
        threshold: String,
        /// Input valuation, e.g. `lenA=100, lenB=100`.
        #[arg(long, conflicts_with = "sweep_corners")]
        input: Option<String>,
        /// Try every corner of the initial interval box.
        #[arg(long)]
        sweep_corners: bool,
        #[command(flatten)]
        flags: Flags,
    },
    /// Upper and lower cost bounds for one program with minimal gap.
    Single {
        program: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a benchmark suite and print a tightness table.
    Bench {
        suite: PathBuf,
        #[arg(long)]
        json: bool,
        /// Skip the oracle re-check of witnesses.
        #[arg(long)]
        no_check: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        max_pivots: u64,
    },
    /// Exhaustive cost extremes (one program) or maximal difference (two).
    Oracle {
        program: PathBuf,
        other: Option<PathBuf>,
        /// Single input; otherwise the default box is enumerated.
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = diffcost_core::oracle::DEFAULT_STEPS)]
        max_steps: u64,
    },
    /// Solve an LP file (or `-` for stdin) and print the solution format.
    SolveLp {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        max_pivots: u64,
    },
}

#[derive(Args, Clone)]
struct Flags {
    /// Template degree.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Maximal number of premises per product (defaults to the degree).
    #[arg(long)]
    prodk: Option<u32>,
    /// User invariant file.
    #[arg(long)]
    invariants: Option<PathBuf>,
    /// `exact` or `external:<command>`.
    #[arg(long, default_value = "exact")]
    solver: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_pivots: u64,
    /// Separation for the strict inequality in refutation.
    #[arg(long, default_value = "1")]
    eps: String,
    /// Write the assembled LP to this file.
    #[arg(long)]
    emit_lp: Option<PathBuf>,
    #[arg(long)]
    include_cost_in_templates: bool,
    /// Keep template variables that never reach a guard or cost update.
    #[arg(long)]
    no_slice: bool,
    #[arg(long, default_value_t = 5)]
    widen_after: u32,
    /// Interval invariants only.
    #[arg(long)]
    no_strengthen: bool,
    /// Re-check the witness against the exhaustive oracle.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    json: bool,
}

impl Flags {
    fn options(&self) -> Result<AnalysisOptions> {
        Ok(AnalysisOptions {
            degree: self.degree,
            prodk: self.prodk,
            backend: Backend::parse(&self.solver, self.max_pivots)?,
            eps: parse_number(&self.eps).ok_or_else(|| anyhow!("bad --eps `{}`", self.eps))?,
            include_cost: self.include_cost_in_templates,
            slice: !self.no_slice,
            inference: InferenceOptions {
                intervals: IntervalOptions {
                    widen_after: self.widen_after,
                },
                strengthen: !self.no_strengthen,
            },
        })
    }
}

fn emit(flags: &Flags, a: &Analysis, mut report: AnalysisReport, check: Option<diffcost_cli::report::CheckSummary>) -> Result<ExitCode> {
    if let (Some(path), Some(sys)) = (&flags.emit_lp, &a.system) {
        std::fs::write(path, write_lp(sys)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(c) = check {
        report.attach_check(c);
    }
    if flags.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    let failed_check = report.check.as_ref().is_some_and(|c| !c.passed);
    Ok(if a.verdict.is_success() && !failed_check {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Diff { new, old, flags } => {
            let (n, o) = (load_system(&new)?, load_system(&old)?);
            let user = load_invariants(flags.invariants.as_deref())?;
            let a = analysis::diff(&n, &o, &user, &flags.options()?)?;
            let c = if flags.check { check::check_diff(&a, &n, &o)? } else { None };
            emit(&flags, &a, AnalysisReport::from_analysis(&a), c)
        }
        Cmd::Verify { new, old, bound, flags } => {
            let (n, o) = (load_system(&new)?, load_system(&old)?);
            let user = load_invariants(flags.invariants.as_deref())?;
            let p = parse_polynomial(&bound).with_context(|| format!("parsing bound `{bound}`"))?;
            let a = analysis::verify(&n, &o, &p, &user, &flags.options()?)?;
            let c = if flags.check { check::check_diff(&a, &n, &o)? } else { None };
            emit(&flags, &a, AnalysisReport::from_analysis(&a), c)
        }
        Cmd::Refute {
            new,
            old,
            threshold,
            input,
            sweep_corners,
            flags,
        } => {
            let (n, o) = (load_system(&new)?, load_system(&old)?);
            let user = load_invariants(flags.invariants.as_deref())?;
            let t = parse_number(&threshold).ok_or_else(|| anyhow!("bad threshold `{threshold}`"))?;
            let target = match (input, sweep_corners) {
                (Some(x), _) => RefuteTarget::Point(parse_valuation(&x).with_context(|| format!("parsing input `{x}`"))?),
                (None, true) => RefuteTarget::Corners,
                (None, false) => bail!("refute needs --input or --sweep-corners"),
            };
            let a = analysis::refute(&n, &o, &t, &target, &user, &flags.options()?)?;
            let c = if flags.check { check::check_refute(&a, &n, &o, &t)? } else { None };
            emit(&flags, &a, AnalysisReport::from_analysis(&a), c)
        }
        Cmd::Single { program, flags } => {
            let ts = load_system(&program)?;
            let user = load_invariants(flags.invariants.as_deref())?;
            let a = analysis::single(&ts, &user, &flags.options()?)?;
            let c = if flags.check { check::check_single(&a, &ts)? } else { None };
            emit(&flags, &a, AnalysisReport::from_analysis(&a), c)
        }
        Cmd::Bench {
            suite,
            json,
            no_check,
            jobs,
            max_pivots,
        } => {
            let s = Suite::load(&suite)?;
            let opts = BenchOptions {
                check: !no_check,
                base: AnalysisOptions {
                    backend: Backend::parse("exact", max_pivots)?,
                    ..AnalysisOptions::default()
                },
            };
            let rows = match jobs {
                Some(j) => rayon::ThreadPoolBuilder::new()
                    .num_threads(j.max(1))
                    .build()?
                    .install(|| run_suite(&s, &opts)),
                None => run_suite(&s, &opts),
            };
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", render_table(&rows));
            }
            Ok(if rows.iter().all(|r| r.ok) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Oracle {
            program,
            other,
            input,
            max_steps,
        } => oracle(&program, other.as_deref(), input.as_deref(), max_steps),
        Cmd::SolveLp { file, max_pivots } => {
            let text = if file.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s)?;
                s
            } else {
                std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?
            };
            let sys = parse_lp(&text)?;
            print!("{}", solve_lp_text(&sys, max_pivots)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn oracle(program: &Path, other: Option<&Path>, input: Option<&str>, max_steps: u64) -> Result<ExitCode> {
    let ts = load_system(program)?;
    let mut budget = RunBudget::for_system(&ts);
    budget.max_steps = max_steps;
    let outcome = match (other, input) {
        (None, Some(x)) => {
            let x = analysis::complete_input(&ts, &parse_valuation(x)?)?;
            cost_extremes(&ts, &x, &budget).map(|(inf, sup)| {
                println!("input {x}: inf {} sup {}", fmt_rational(&inf), fmt_rational(&sup));
            })
        }
        (None, None) => budget.box_points(&ts).iter().try_for_each(|x| {
            let (inf, sup) = cost_extremes(&ts, x, &budget)?;
            println!("input {x}: inf {} sup {}", fmt_rational(&inf), fmt_rational(&sup));
            Ok(())
        }),
        (Some(o), Some(x)) => {
            let old = load_system(o)?;
            let x = analysis::complete_input(&ts, &parse_valuation(x)?)?;
            (|| -> Result<(), OracleError> {
                let (_, sup) = cost_extremes(&ts, &x, &budget)?;
                let (inf, _) = cost_extremes(&old, &x, &budget)?;
                println!("input {x}: sup_new - inf_old = {}", fmt_rational(&(sup - inf)));
                Ok(())
            })()
        }
        (Some(o), None) => {
            let old = load_system(o)?;
            max_diff(&ts, &old, &budget).map(|d| {
                println!(
                    "max difference {} at {} ({} box points, box-relative)",
                    fmt_rational(&d.max),
                    d.argmax,
                    d.points
                );
            })
        }
    };
    match outcome {
        Ok(()) => Ok(ExitCode::SUCCESS),
        Err(e @ (OracleError::BudgetExhausted(_) | OracleError::InfiniteRun { .. })) => {
            println!("{e}");
            println!("the program may not terminate on this input; potential-based bounds assume termination");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
