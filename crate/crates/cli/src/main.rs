use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clssmt::bench::run_bench;
use clssmt::grammar::{member, tree_to_dot, Term, TreeGrammar};
use clssmt::inhabitation::{inhabit_pruned, InhabitationRequest};
use clssmt::maze::Maze;
use clssmt::smt::{
    assign_tables, parse_constraints, parse_index_overrides, translate_grammar, Mode, SmtScript,
    Tables, TranslateOptions,
};
use clssmt::solver::{enumerate_solutions, solve, SolveOutcome, SolverConfig, StopReason};
use clssmt::types::parse_type;
use clssmt::parse_repository;

/// Exit codes.
const INPUT: u8 = 1;
const ENVIRONMENT: u8 = 2;
const TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "clssmt", version, about = "Synthesize terms from typed combinator repositories via SMT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the pruned tree grammar of all inhabitants of a goal type.
    Inhabit {
        repository: PathBuf,
        goal: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Translate a grammar into an SMT-LIB script.
    Translate {
        /// Grammar JSON, or a repository when GOAL is given.
        input: PathBuf,
        goal: Option<String>,
        #[command(flatten)]
        smt: SmtArgs,
        /// Write the script here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Find one term.
    Solve {
        /// Grammar JSON, or a repository when GOAL is given.
        input: PathBuf,
        goal: Option<String>,
        #[command(flatten)]
        smt: SmtArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Find up to --max-solutions distinct terms.
    Enumerate {
        /// Grammar JSON, or a repository when GOAL is given.
        input: PathBuf,
        goal: Option<String>,
        #[arg(short = 'k', long, default_value_t = 10)]
        max_solutions: usize,
        #[command(flatten)]
        smt: SmtArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Decide whether a term is a word of a grammar. Exits 0 for true, 1 for false.
    Check {
        grammar: PathBuf,
        goal: String,
        term: String,
    },
    /// Run the pipeline on a generated n×n labyrinth.
    Bench {
        size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Probability that a cell is blocked.
        #[arg(long, default_value_t = 0.2)]
        density: f64,
        /// Use the 3×4 example layout instead of a generated one.
        #[arg(long)]
        example: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args)]
struct SmtArgs {
    /// Defaults to finitized for solve/enumerate; for translate, finitized
    /// when --depth is given and quantified otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Finitization depth. Defaults to the smallest depth of any word.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=60))]
    depth: Option<u32>,
    /// Structural constraints file.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Index overrides file.
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Encode alternatives as or plus pairwise exclusion instead of xor.
    #[arg(long)]
    exactly_one: bool,
    /// Do not force level-d vertices to be leaves.
    #[arg(long)]
    no_boundary_guard: bool,
    /// Instantiate rules only at vertices where their nonterminal can occur.
    #[arg(long)]
    sparse: bool,
}

#[derive(Args)]
struct SolverArgs {
    /// Solver command line. Overrides CLSSMT_SOLVER.
    #[arg(long)]
    solver: Option<String>,
    /// Per-query timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Keep one solver process and add blocking clauses incrementally.
    #[arg(long)]
    incremental: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Accepted for symmetry with bench; solving is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Quantified,
    Finitized,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
    Smt2,
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl ToString) -> Failure {
    Failure { code: INPUT, message: message.to_string() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// Nonterminal name of a goal: the canonical printed type when it parses.
fn goal_name(text: &str) -> String {
    parse_type(text).map(|t| t.canonical().to_string()).unwrap_or_else(|_| text.to_string())
}

fn inhabit_file(path: &Path, goal: &str) -> Result<TreeGrammar, Failure> {
    let repo = parse_repository(&read(path)?).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let goal = parse_type(goal).map_err(|e| input_error(format!("goal: {e}")))?;
    inhabit_pruned(&InhabitationRequest { repo: &repo, goal }).map_err(input_error)
}

/// A grammar file with an optional goal, or a repository with a goal.
fn load(input: &Path, goal: Option<&str>) -> Result<(TreeGrammar, String), Failure> {
    let text = read(input)?;
    if text.trim_start().starts_with('{') {
        let g = TreeGrammar::from_json(&text).map_err(|e| input_error(format!("{}: {e}", input.display())))?;
        let goal = goal.map(goal_name).unwrap_or_else(|| g.start.clone());
        return Ok((g, goal));
    }
    let Some(goal) = goal else {
        return Err(input_error("a goal type is required when the input is a repository"));
    };
    let mut g = inhabit_file(input, goal)?;
    let start = g.start.clone();
    // An empty language still gets a script, which is unsatisfiable.
    g.rules.entry(start.clone()).or_default();
    Ok((g, start))
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, Failure> {
    let mut cfg = SolverConfig::from_env();
    if let Some(s) = &args.solver {
        cfg.command = clssmt::solver::parse_command(s).ok_or_else(|| input_error("--solver is empty"))?;
    }
    cfg.timeout = Duration::from_secs(args.timeout.max(1));
    cfg.incremental = args.incremental;
    Ok(cfg)
}

fn build_script(g: &TreeGrammar, goal: &str, smt: &SmtArgs, default: ModeArg) -> Result<SmtScript, Failure> {
    let overrides = match &smt.indices {
        Some(p) => Some(parse_index_overrides(&read(p)?).map_err(|e| input_error(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let tables = assign_tables(g, overrides.as_ref()).map_err(input_error)?;
    let mode = smt.mode.unwrap_or(default);
    let mut opts = match mode {
        ModeArg::Quantified => {
            if smt.depth.is_some() {
                return Err(input_error("--depth applies to finitized mode only"));
            }
            TranslateOptions::quantified()
        }
        ModeArg::Finitized => {
            let depth = match smt.depth {
                Some(d) => d,
                None => g.min_depth(goal).map_err(input_error)?.unwrap_or(1),
            };
            TranslateOptions::finitized(depth)
        }
    };
    opts.exactly_one = smt.exactly_one;
    opts.boundary_guard = !smt.no_boundary_guard;
    opts.sparse = smt.sparse;
    let mut script = translate_grammar(g, goal, &tables, &opts).map_err(input_error)?;
    if let Some(p) = &smt.constraints {
        let cs = parse_constraints(&read(p)?).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
        script.add_constraints(&cs).map_err(input_error)?;
    }
    Ok(script)
}

fn spawn_failure(e: clssmt::solver::SolverError) -> Failure {
    Failure {
        code: ENVIRONMENT,
        message: format!("{e}\ninstall z3 (or another SMT-LIB solver reading from stdin) and point --solver or CLSSMT_SOLVER at it, e.g. \"z3 -in\""),
    }
}

fn render_terms(terms: &[Term], tables: &Tables, format: Format) -> Result<String, Failure> {
    let mut out = String::new();
    for t in terms {
        match format {
            Format::Dot => out.push_str(&tree_to_dot(t, &tables.combinators).map_err(input_error)?),
            _ => {
                out.push_str(&t.to_string());
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn stop_name(s: &StopReason) -> String {
    match s {
        StopReason::Limit => "limit".into(),
        StopReason::Unsat => "unsat".into(),
        StopReason::Unknown(r) => format!("unknown ({r})"),
        StopReason::SolverError(e) => format!("solver error ({e})"),
        StopReason::MaxIterations => "iteration limit".into(),
    }
}

fn run_solve(input: &Path, goal: Option<&str>, k: usize, smt: &SmtArgs, run: &RunArgs) -> Result<(), Failure> {
    let (g, goal) = load(input, goal)?;
    let script = build_script(&g, &goal, smt, ModeArg::Finitized)?;
    if run.format == Format::Smt2 {
        print!("{}", script.render());
        return Ok(());
    }
    let cfg = solver_config(&run.solver)?;

    if script.mode == Mode::Quantified {
        // Models of the quantified encoding are not read back.
        let outcome = solve(&script, &cfg).map_err(spawn_failure)?;
        return match outcome {
            SolveOutcome::Sat(_) => {
                println!("sat");
                Ok(())
            }
            SolveOutcome::Unsat => {
                println!("unsat");
                Ok(())
            }
            other => finish(&outcome_stop(other)),
        };
    }

    let found = enumerate_solutions(&script, &g, &goal, &cfg, k, k.saturating_mul(20).max(100)).map_err(spawn_failure)?;
    match run.format {
        Format::Json => {
            let doc = serde_json::json!({
                "terms": found.terms.iter().map(|t| serde_json::json!({"term": t.to_string(), "sexpr": t.to_sexpr()})).collect::<Vec<_>>(),
                "rejected": found.rejected.iter().map(|r| r.reason.clone()).collect::<Vec<_>>(),
                "stop": stop_name(&found.stop),
                "iterations": found.iterations,
                "solver_time_ms": found.solver_time.as_secs_f64() * 1000.0,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
        }
        format => {
            print!("{}", render_terms(&found.terms, &script.tables, format)?);
            if format == Format::Text {
                println!(
                    "# {} solution(s), {} rejected artifact(s), solver time {:.3}s, stopped: {}",
                    found.terms.len(),
                    found.rejected.len(),
                    found.solver_time.as_secs_f64(),
                    stop_name(&found.stop)
                );
            }
        }
    }
    finish(&found.stop)
}

fn outcome_stop(o: SolveOutcome) -> StopReason {
    match o {
        SolveOutcome::Unknown(r) => StopReason::Unknown(r),
        SolveOutcome::SolverError(e) => StopReason::SolverError(e),
        SolveOutcome::Unsat => StopReason::Unsat,
        SolveOutcome::Sat(_) => StopReason::Limit,
    }
}

/// Maps how an enumeration ended to an exit status.
fn finish(stop: &StopReason) -> Result<(), Failure> {
    match stop {
        StopReason::Unknown(r) if r.contains("timeout") => Err(Failure { code: TIMEOUT, message: "solver timed out".into() }),
        StopReason::Unknown(r) => Err(Failure { code: TIMEOUT, message: format!("solver gave up: {r}") }),
        StopReason::SolverError(e) => Err(Failure { code: ENVIRONMENT, message: format!("solver failed: {e}") }),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Inhabit { repository, goal, format } => {
            let g = inhabit_file(&repository, &goal)?;
            match format {
                Format::Json => println!("{}", g.to_json()),
                Format::Text => print!("{g}"),
                _ => return Err(input_error("inhabit supports --format json or text")),
            }
            Ok(())
        }
        Command::Translate { input, goal, smt, output } => {
            let (g, goal) = load(&input, goal.as_deref())?;
            let default = if smt.depth.is_some() { ModeArg::Finitized } else { ModeArg::Quantified };
            let text = build_script(&g, &goal, &smt, default)?.render();
            match output {
                Some(p) => fs::write(&p, text).map_err(|e| input_error(format!("{}: {e}", p.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Solve { input, goal, smt, run } => run_solve(&input, goal.as_deref(), 1, &smt, &run),
        Command::Enumerate { input, goal, max_solutions, smt, run } => {
            run_solve(&input, goal.as_deref(), max_solutions, &smt, &run)
        }
        Command::Check { grammar, goal, term } => {
            let g = TreeGrammar::from_json(&read(&grammar)?)
                .map_err(|e| input_error(format!("{}: {e}", grammar.display())))?;
            let t = Term::parse(&term).map_err(|e| Failure { code: 2, message: e.to_string() })?;
            let goal = goal_name(&goal);
            let verdict = match member(&g, &goal, &t) {
                Ok(v) => v,
                Err(e) => return Err(Failure { code: 2, message: e.to_string() }),
            };
            println!("{verdict}");
            if verdict {
                Ok(())
            } else {
                Err(Failure { code: 1, message: String::new() })
            }
        }
        Command::Bench { size, seed, density, example, format, solver } => {
            if size < 2 && !example {
                return Err(input_error("bench needs a size of at least 2"));
            }
            if !(0.0..=1.0).contains(&density) {
                return Err(input_error("--density must lie in [0, 1]"));
            }
            let maze = if example { Maze::example() } else { Maze::random(size, seed, density) };
            let cfg = solver_config(&solver)?;
            let report = run_bench(&maze, &cfg).map_err(|e| Failure { code: ENVIRONMENT, message: e.to_string() })?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializes")),
                Format::Text => {
                    print!("{}", report.maze);
                    println!("size        {}x{}", report.width, report.height);
                    println!("grammar     {} nonterminals, {} rules", report.nonterminals, report.rules);
                    if let Some(d) = report.depth {
                        println!("depth       {d}");
                    }
                    println!("assertions  {}", report.assertions);
                    println!("status      {}", report.status);
                    if let Some(s) = &report.solution {
                        println!("solution    {s}");
                    }
                    if let Some(d) = &report.detail {
                        println!("detail      {d}");
                    }
                    let t = &report.times;
                    println!(
                        "times (ms)  inhabit {:.1}, prune {:.1}, translate {:.1}, solve {:.1}",
                        t.inhabit_ms, t.prune_ms, t.translate_ms, t.solve_ms
                    );
                }
                _ => return Err(input_error("bench supports --format text or json")),
            }
            match report.status.as_str() {
                "unknown" => Err(Failure { code: TIMEOUT, message: "solver gave no answer".into() }),
                "error" => Err(Failure { code: ENVIRONMENT, message: report.detail.unwrap_or_default() }),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("clssmt: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
