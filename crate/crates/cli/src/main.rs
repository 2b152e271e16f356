//! `promissory`: run scenarios, evaluate meadow propositions, check budgets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use promissory::assessment::TrustParams;
use promissory::meadow::{
    check_simplification, detect_mvl_creep, eval_arith, eval_bool, parse_expr, sole_variable, solution_set, Env,
    EvalError, Expr, Semantics, SimplificationReport, SolveError, DEFAULT_BOUND,
};
use promissory::scenario::{self, parse_scenario_with, Config, RunOptions};
use promissory::tuplix::{conforms, instantiate, net_result, parse_account, parse_budget, parse_substitution};
use promissory::{corpus, Rational};

const OK: u8 = 0;
const FAILURE: u8 = 1;
const INPUT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "promissory", version, about = "Promise and decision scenarios, meadow tools, budget checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or `corpus:<name>`) and print its summary.
    Run(RunArgs),
    /// Evaluate, solve and inspect propositions over the rational meadow.
    Meadow {
        #[command(subcommand)]
        command: MeadowCommand,
    },
    /// Check a final account against a budget.
    Budget(BudgetArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: String,
    /// Leave private records out of the trace.
    #[arg(long)]
    public: bool,
    /// Write the trace here as one JSON object per line.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_rational)]
    alpha: Option<Rational>,
    #[arg(long, value_parser = parse_rational)]
    beta: Option<Rational>,
    /// Default trust gain when the scenario sets none.
    #[arg(long = "default-alpha", env = "PROMISSORY_ALPHA", hide = true, value_parser = parse_rational)]
    env_alpha: Option<Rational>,
    /// Default trust loss when the scenario sets none.
    #[arg(long = "default-beta", env = "PROMISSORY_BETA", hide = true, value_parser = parse_rational)]
    env_beta: Option<Rational>,
    /// Use the sequential engine paths.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Meadow,
    ShortCircuit,
    Kleene,
    All,
}

#[derive(Subcommand)]
enum MeadowCommand {
    /// Print the value of a term or the truth value of a proposition.
    Eval {
        expr: String,
        /// Variable binding `X=p/q`; repeatable.
        #[arg(long = "env", value_parser = parse_binding)]
        env: Vec<(String, Rational)>,
        #[arg(long, value_enum, default_value = "meadow")]
        semantics: SemanticsArg,
    },
    /// Print the solution set of a one-variable proposition on the grid.
    Solve {
        expr: String,
        #[arg(long)]
        var: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: u32,
    },
    /// Report where the three readings of a proposition disagree.
    Creep {
        expr: String,
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: u32,
    },
    /// Compare a proposition with a proposed simplification.
    Check {
        original: String,
        simplified: String,
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: u32,
    },
}

#[derive(Args)]
struct BudgetArgs {
    budget: PathBuf,
    account: PathBuf,
    #[arg(long, default_value = "0", value_parser = parse_rational)]
    shortfall: Rational,
    /// Substitution such as `p = 20, k = 8`, applied in the order given.
    #[arg(long = "subst")]
    subst: Vec<String>,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.trim().parse().map_err(|e| format!("`{s}`: {e}"))
}

fn parse_binding(s: &str) -> Result<(String, Rational), String> {
    let (var, value) = s.split_once('=').ok_or_else(|| format!("expected VAR=p/q, got `{s}`"))?;
    Ok((var.trim().to_string(), parse_rational(value)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Meadow { command } => cmd_meadow(command),
        Command::Budget(args) => cmd_budget(args),
    };
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<String, u8> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        INPUT_ERROR
    })
}

fn cmd_run(args: RunArgs) -> u8 {
    let (label, source) = match args.scenario.strip_prefix("corpus:") {
        Some(name) => match corpus::source(name) {
            Some(src) => (args.scenario.clone(), src.to_string()),
            None => {
                eprintln!("error: no bundled scenario named `{name}`");
                return INPUT_ERROR;
            }
        },
        None => match read(Path::new(&args.scenario)) {
            Ok(src) => (args.scenario.clone(), src),
            Err(code) => return code,
        },
    };

    let mut base = Config::default();
    if args.env_alpha.is_some() || args.env_beta.is_some() {
        let alpha = args.env_alpha.unwrap_or_else(|| base.trust.alpha().clone());
        let beta = args.env_beta.unwrap_or_else(|| base.trust.beta().clone());
        match TrustParams::new(alpha, beta) {
            Ok(p) => base.trust = p,
            Err(e) => {
                eprintln!("error: PROMISSORY_ALPHA/PROMISSORY_BETA: {e}");
                return INPUT_ERROR;
            }
        }
    }
    let sc = match parse_scenario_with(&source, base) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{label}:{}:{}: {}", e.line, e.column, e.kind);
            return INPUT_ERROR;
        }
    };
    let options = RunOptions {
        alpha: args.alpha,
        beta: args.beta,
        execution: if args.sequential {
            promissory::par::Execution::Sequential
        } else {
            promissory::par::Execution::Parallel
        },
    };
    let trace = match scenario::run_with(&sc, &options) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return INPUT_ERROR;
        }
    };
    if let Some(out) = &args.out {
        let text = if args.public {
            trace.export_public()
        } else {
            trace.export_full()
        };
        if let Err(e) = fs::write(out, text) {
            eprintln!("error: cannot write {}: {e}", out.display());
            return FAILURE;
        }
    }
    let summary = if args.public {
        scenario::report(&public_only(&trace))
    } else {
        scenario::report(&trace)
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    for err in &summary.errors {
        eprintln!("scenario error: {err}");
    }
    if trace.error_count() > 0 {
        FAILURE
    } else {
        OK
    }
}

fn public_only(trace: &scenario::Trace) -> scenario::Trace {
    let mut out = scenario::Trace::new();
    for r in trace.public() {
        out.push(r.time, r.partition, r.origin, r.cause, r.kind, r.payload.clone(), r.script_index);
    }
    out
}

fn parse_or_report(src: &str) -> Result<Expr, u8> {
    parse_expr(src).map_err(|e| {
        eprintln!("error: column {}: {}", e.column, e.message);
        INPUT_ERROR
    })
}

fn eval_failure(e: &EvalError) -> u8 {
    eprintln!("error: {e}");
    match e {
        EvalError::Unbound(_) => FAILURE,
        _ => INPUT_ERROR,
    }
}

fn solve_failure(e: &SolveError) -> u8 {
    eprintln!("error: {e}");
    match e {
        SolveError::Eval(inner) => eval_failure(inner),
        _ => FAILURE,
    }
}

fn set_text(values: &[Rational]) -> String {
    let parts: Vec<String> = values.iter().map(Rational::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

fn cmd_meadow(command: MeadowCommand) -> u8 {
    match command {
        MeadowCommand::Eval { expr, env, semantics } => {
            let e = match parse_or_report(&expr) {
                Ok(e) => e,
                Err(code) => return code,
            };
            let env: Env = env.into_iter().collect();
            if e.is_arithmetic() {
                return match eval_arith(&e, &env) {
                    Ok(v) => {
                        println!("{v}");
                        OK
                    }
                    Err(err) => eval_failure(&err),
                };
            }
            let chosen: Vec<Semantics> = match semantics {
                SemanticsArg::Meadow => vec![Semantics::MeadowTotal],
                SemanticsArg::ShortCircuit => vec![Semantics::ShortCircuitPartial],
                SemanticsArg::Kleene => vec![Semantics::ThreeValued],
                SemanticsArg::All => Semantics::ALL.to_vec(),
            };
            for s in &chosen {
                match eval_bool(&e, &env, *s) {
                    Ok(v) if chosen.len() == 1 => println!("{v}"),
                    Ok(v) => println!("{}: {v}", semantics_name(*s)),
                    Err(err) => return eval_failure(&err),
                }
            }
            OK
        }
        MeadowCommand::Solve { expr, var, bound } => {
            let e = match parse_or_report(&expr) {
                Ok(e) => e,
                Err(code) => return code,
            };
            let var = match var {
                Some(v) => v,
                None => match sole_variable([&e]) {
                    Ok(v) => v.unwrap_or_else(|| "X".into()),
                    Err(err) => return solve_failure(&err),
                },
            };
            match solution_set(&e, &var, bound) {
                Ok(set) => {
                    println!("{}", set_text(&set.into_iter().collect::<Vec<_>>()));
                    OK
                }
                Err(err) => solve_failure(&err),
            }
        }
        MeadowCommand::Creep { expr, bound } => {
            let e = match parse_or_report(&expr) {
                Ok(e) => e,
                Err(code) => return code,
            };
            match detect_mvl_creep(&e, bound) {
                Ok(report) => {
                    print!("{report}");
                    OK
                }
                Err(err) => solve_failure(&err),
            }
        }
        MeadowCommand::Check {
            original,
            simplified,
            bound,
        } => {
            let (a, b) = match (parse_or_report(&original), parse_or_report(&simplified)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(code), _) | (_, Err(code)) => return code,
            };
            match check_simplification(&a, &b, bound) {
                Ok(SimplificationReport::Equivalent { bound, solutions }) => {
                    println!("equivalent at bound {bound}; {} solutions on the grid", solutions.len());
                    OK
                }
                Ok(SimplificationReport::Counterexamples {
                    bound,
                    only_original,
                    only_simplified,
                }) => {
                    println!("not equivalent at bound {bound}");
                    println!("only original: {}", set_text(&only_original));
                    println!("only simplified: {}", set_text(&only_simplified));
                    FAILURE
                }
                Err(err) => solve_failure(&err),
            }
        }
    }
}

fn semantics_name(s: Semantics) -> &'static str {
    match s {
        Semantics::MeadowTotal => "meadow",
        Semantics::ShortCircuitPartial => "short-circuit",
        Semantics::ThreeValued => "kleene",
    }
}

fn cmd_budget(args: BudgetArgs) -> u8 {
    let (budget_src, account_src) = match (read(&args.budget), read(&args.account)) {
        (Ok(b), Ok(a)) => (b, a),
        (Err(code), _) | (_, Err(code)) => return code,
    };
    let mut budget = match parse_budget(&budget_src) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{}: {e}", args.budget.display());
            return INPUT_ERROR;
        }
    };
    let account = match parse_account(&account_src) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}: {e}", args.account.display());
            return INPUT_ERROR;
        }
    };
    for text in &args.subst {
        let sigma = match parse_substitution(text) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("--subst `{text}`: {e}");
                return INPUT_ERROR;
            }
        };
        budget = match instantiate(&budget, &sigma) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("--subst `{text}`: {e}");
                return INPUT_ERROR;
            }
        };
    }
    let predicted = match net_result(&budget) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return FAILURE;
        }
    };
    println!("budget net: {predicted}");
    println!("account net: {}", account.net_result());
    println!("shortfall allowed: {}", args.shortfall);
    match conforms(&account, &budget, &args.shortfall) {
        Ok(true) => {
            println!("conforms");
            OK
        }
        Ok(false) => {
            println!("does not conform");
            FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            FAILURE
        }
    }
}
