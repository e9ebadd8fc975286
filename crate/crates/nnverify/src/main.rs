use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nnverify::queries::{self, MarginQuery, SmoothNoiseQuery, StrongClassQuery};
use nnverify::report::{StatsReport, VerdictReport};
use nnverify::{gen_random_network, load_problem, parse_vector, Shape, WallClock};
use nnverify_core::lp::export_lp;
use nnverify_core::relaxation::{build_relaxation, compute_initial_bounds, refine_bounds};
use nnverify_core::{brute_force_oracle, verify_with_clock, Config, Status, VerificationProblem, SAFETY_MARGIN};

const EXIT_SAT: u8 = 10;
const EXIT_UNSAT: u8 = 20;

/// Verifier for piecewise-linear neural networks.
///
/// Exit codes: 10 satisfiable, 20 unsatisfiable, 1 error. Classes are
/// 0-based output indices in declaration order. A point counts as
/// misclassified when a competitor output is greater than or equal to the
/// base class output.
#[derive(Parser)]
#[command(name = "nnverify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_budget: f64,
    /// Maximum number of SAT conflicts.
    #[arg(long)]
    conflict_budget: Option<u64>,
    /// Disable the feasible-fixture cache.
    #[arg(long)]
    no_cache: bool,
    /// Disable interval-based phase inference.
    #[arg(long)]
    no_inference: bool,
    /// Disable LP bound refinement.
    #[arg(long)]
    no_refine: bool,
    /// Print the statistics record.
    #[arg(long)]
    stats: bool,
    /// Print one JSON object instead of text lines.
    #[arg(long)]
    json: bool,
}

impl EngineArgs {
    fn config(&self) -> Config {
        Config {
            time_budget: Some(self.time_budget),
            conflict_budget: self.conflict_budget,
            cache: !self.no_cache,
            refine: !self.no_refine,
            inference: !self.no_inference,
        }
    }
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct BaseArgs {
    /// Base point as comma-separated values.
    #[arg(long)]
    base: Option<String>,
    /// File holding the base point as comma- or whitespace-separated values.
    #[arg(long)]
    base_file: Option<PathBuf>,
}

impl BaseArgs {
    fn load(&self) -> anyhow::Result<Vec<f64>> {
        let text = match (&self.base, &self.base_file) {
            (Some(s), _) => s.clone(),
            (None, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            (None, None) => bail!("a base point is required"),
        };
        Ok(parse_vector(&text)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide the problem in a .pnet file.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Cross-check the answer against exhaustive enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Largest L∞ radius around a base point that keeps its class.
    Margin {
        file: PathBuf,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 0.05)]
        hi: f64,
        #[arg(long, default_value_t = 0.002)]
        precision: f64,
        /// Coordinates pinned to the base value.
        #[arg(long, value_delimiter = ',')]
        freeze: Vec<usize>,
        /// Grid shape WxH used with --border to freeze the frame.
        #[arg(long, requires = "border")]
        grid: Option<String>,
        #[arg(long, requires = "grid")]
        border: Option<usize>,
        /// Expected class of the base point.
        #[arg(long)]
        class: Option<usize>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Search for an input whose class output beats every other by delta.
    Strongclass {
        file: PathBuf,
        #[arg(long)]
        class: usize,
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        oracle: bool,
    },
    /// Search for smooth noise that flips a base image to a target class.
    Smoothnoise {
        file: PathBuf,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Bound on the noise difference between 4-neighbours.
        #[arg(long, default_value_t = 0.05)]
        bound: f64,
        /// Width of the frozen frame.
        #[arg(long, default_value_t = 3)]
        border: usize,
        #[arg(long)]
        target: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        oracle: bool,
    },
    /// Decide the problem by enumerating every phase combination.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write the (refined) LP relaxation in LP text form.
    Export {
        file: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_refine: bool,
    },
    /// Generate a random .pnet problem.
    Gen {
        #[arg(long)]
        seed: u64,
        /// Layer list, e.g. input:3,relu:4,maxpool:2x3,linear:2
        #[arg(long)]
        shape: String,
        /// Random linear constraints over the outputs.
        #[arg(long, default_value_t = 1)]
        constraints: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Runs one decision query and prints its verdict.
fn decide(problem: &VerificationProblem, engine: &EngineArgs, oracle: bool) -> anyhow::Result<u8> {
    let result = verify_with_clock(problem, &engine.config(), &WallClock::start())?;
    if let Status::Satisfiable { inputs, .. } = &result.status {
        if !problem.check_witness(inputs, SAFETY_MARGIN)? {
            bail!("witness {} fails the property check", fmt_vec(inputs));
        }
    }
    let mut report = VerdictReport::new(problem, &result.status);
    if engine.stats || engine.json {
        report.stats = Some(StatsReport::from(&result.stats));
    }
    if oracle {
        let o = brute_force_oracle(problem)?;
        report.oracle_agreement = Some(o.witness.is_some() == result.status.is_sat());
    }
    if engine.json {
        print_json(&report)?;
    } else {
        println!("{}", if report.status == "sat" { "SAT" } else { "UNSAT" });
        if let Some(w) = &report.witness {
            println!("witness: {}", fmt_vec(w));
        }
        if let Some(o) = &report.outputs {
            println!("outputs: {}", fmt_vec(o));
        }
        if engine.stats {
            for (k, v) in report.stats.as_ref().map(StatsReport::lines).unwrap_or_default() {
                println!("stat {k}: {v}");
            }
        }
        if let Some(a) = report.oracle_agreement {
            println!("agreement: {}", if a { "yes" } else { "no" });
        }
    }
    if report.oracle_agreement == Some(false) {
        bail!("verifier and oracle disagree");
    }
    Ok(if result.status.is_sat() { EXIT_SAT } else { EXIT_UNSAT })
}

#[derive(Serialize)]
struct MarginReport {
    class: usize,
    epsilon: Option<f64>,
    robust_at_hi: bool,
    bracket: (f64, f64),
    verify_calls: usize,
    probes: Vec<(f64, bool)>,
    stats: StatsReport,
}

#[derive(Serialize)]
struct OracleReport {
    status: &'static str,
    witness: Option<Vec<f64>>,
    fixtures_enumerated: u128,
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Verify { file, engine, oracle } => decide(&load_problem(&file)?, &engine, oracle),
        Command::Margin { file, base, lo, hi, precision, freeze, grid, border, class, engine } => {
            let problem = load_problem(&file)?;
            let mut query = MarginQuery::new(base.load()?);
            query.lo = lo;
            query.hi = hi;
            query.precision = precision;
            query.frozen = freeze;
            query.expected_class = class;
            if let (Some(g), Some(b)) = (grid, border) {
                let (w, h) = g
                    .split_once('x')
                    .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                    .with_context(|| format!("grid `{g}` should look like WxH"))?;
                query.frozen.extend(queries::border_coordinates(w, h, b));
            }
            let out = queries::margin(&problem, &query, &engine.config(), &WallClock::start())?;
            if engine.json {
                print_json(&MarginReport {
                    class: out.class,
                    epsilon: out.epsilon,
                    robust_at_hi: out.robust_at_hi,
                    bracket: out.bracket,
                    verify_calls: out.verify_calls,
                    probes: out.probes.iter().map(|p| (p.epsilon, p.robust)).collect(),
                    stats: StatsReport::from(&out.stats),
                })?;
            } else {
                println!("class: {}", out.class);
                match out.epsilon {
                    Some(e) if out.robust_at_hi => println!("robust at {e:?}"),
                    Some(e) => println!("epsilon: {e:?}"),
                    None => println!("not robust at {lo:?}"),
                }
                println!("bracket: {:?} {:?}", out.bracket.0, out.bracket.1);
                if let Some((j, x)) = out.probes.iter().rev().find_map(|p| p.counterexample.as_ref()) {
                    println!("counterexample: class {j} at {}", fmt_vec(x));
                }
                println!("verify calls: {}", out.verify_calls);
                if engine.stats {
                    for (k, v) in StatsReport::from(&out.stats).lines() {
                        println!("stat {k}: {v}");
                    }
                }
            }
            Ok(0)
        }
        Command::Strongclass { file, class, delta, engine, oracle } => {
            let problem = load_problem(&file)?;
            let q = queries::strongclass_problem(&problem, &StrongClassQuery { class, delta })?;
            decide(&q, &engine, oracle)
        }
        Command::Smoothnoise { file, base, width, height, bound, border, target, engine, oracle } => {
            let problem = load_problem(&file)?;
            let query = SmoothNoiseQuery { base: base.load()?, width, height, bound, border, target };
            let built = queries::smoothnoise_problem(&problem, &query)?;
            if !engine.json {
                println!("base class: {}", built.base_class);
                println!("difference constraints: {}", built.difference_constraints);
            }
            decide(&built.problem, &engine, oracle)
        }
        Command::Oracle { file, json } => {
            let problem = load_problem(&file)?;
            let o = brute_force_oracle(&problem)?;
            let status = if o.witness.is_some() { "sat" } else { "unsat" };
            if json {
                print_json(&OracleReport { status, witness: o.witness.clone(), fixtures_enumerated: o.fixtures_enumerated })?;
            } else {
                println!("{}", status.to_uppercase());
                if let Some(w) = &o.witness {
                    println!("witness: {}", fmt_vec(w));
                }
                println!("fixtures enumerated: {}", o.fixtures_enumerated);
            }
            Ok(if o.witness.is_some() { EXIT_SAT } else { EXIT_UNSAT })
        }
        Command::Export { file, out, no_refine } => {
            let problem = load_problem(&file)?;
            let initial = compute_initial_bounds(&problem);
            let bounds = if no_refine {
                initial
            } else {
                match refine_bounds(&problem, &initial)?.bounds {
                    Some(b) => b,
                    None => {
                        eprintln!("note: the relaxation is infeasible; exporting it with unrefined bounds");
                        initial
                    }
                }
            };
            let relax = build_relaxation(&problem, &bounds);
            write_output(out.as_deref(), &export_lp(&relax.lp))?;
            eprintln!("variables: {}", relax.lp.vars().len());
            eprintln!("constraints: {}", relax.lp.rows().len());
            Ok(0)
        }
        Command::Gen { seed, shape, constraints, out } => {
            let shape = Shape::parse(&shape)?;
            write_output(out.as_deref(), &gen_random_network(seed, &shape, constraints))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
