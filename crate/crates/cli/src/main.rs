use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ifes::EvalMode;
use ifes_cli::commands::{self, ConjugateKind};
use ifes_cli::specfile::{parse_mode, Method};
use ifes_cli::{CliError, Overrides, RunReport};

#[derive(Parser)]
#[command(name = "ifes", version, about = "Solve iterative functional equations of product form")]
struct Cli {
    /// Seed for randomized checks (perturbation directions).
    #[arg(long, global = true, default_value_t = 20240601)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SolverFlags {
    #[arg(long, value_parser = |s: &str| s.parse::<Method>())]
    method: Option<Method>,
    /// Grid cells m (m + 1 nodes).
    #[arg(long)]
    grid: Option<usize>,
    /// Level intervals p for the order-theoretic solvers.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<EvalMode>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl From<SolverFlags> for Overrides {
    fn from(f: SolverFlags) -> Self {
        Overrides { method: f.method, grid: f.grid, levels: f.levels, mode: f.mode, tol: f.tol, max_iter: f.max_iter }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Conjugation {
    Log,
    Reflect,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equation in a spec file.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the hypotheses of the chosen method.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_parser = |s: &str| s.parse::<Method>())]
        method: Option<Method>,
    },
    /// Recompute residual and class membership of a solution CSV.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<EvalMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the log-conjugate sum form or the reflected spec.
    Conjugate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "log")]
        to: Conjugation,
    },
    /// Tabulate constants and hypothesis flags over a parameter range.
    Scan {
        #[arg(long)]
        spec: PathBuf,
        /// lambda.k, delta or M.
        #[arg(long)]
        param: String,
        /// lo:hi:steps
        #[arg(long)]
        range: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a bundled example: exmp1, e1 or ex2.
    Example {
        name: String,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn summarize(report: &RunReport) {
    if let Some(claim) = &report.claim {
        println!("claim: {claim}");
    }
    if let Some(h) = &report.hypotheses {
        print!("{h}");
    }
    if let Some(b) = &report.banach {
        println!(
            "banach: converged={} iterations={} residual={:.3e} in class={}",
            b.converged, b.iterations, b.residual.sup, b.class_verdict.member
        );
    }
    for c in &report.stability {
        println!(
            "stability {:.0e}: |g-g1| = {:.3e} <= {:.4} * {:.3e} : {}",
            c.size, c.report.solution_distance, c.report.factor, c.report.data_distance, c.report.holds
        );
    }
    if let Some(t) = &report.tarski {
        for p in t.min.iter().chain(&t.max) {
            println!(
                "tarski {:?}: sweeps={} certified={} residual={:.3e} monotone={}",
                p.path, p.sweeps, p.certified, p.residual.sup, p.monotone
            );
        }
        if let Some(o) = t.ordered {
            println!("g_min <= g_max: {o}");
        }
    }
    if let Some(v) = &report.verify {
        println!(
            "verify: nodes={} residual={:.3e} monotone={} self-map={} min={} class={}",
            v.nodes,
            v.residual.sup,
            v.monotone,
            v.self_map,
            v.min_value,
            v.class_verdict.as_ref().map_or("n/a".to_string(), |c| c.member.to_string())
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    for f in &report.files {
        println!("wrote {f}");
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve { spec, solver, out } => {
            let report = commands::solve(&spec, &solver.into(), &out, cli.seed)?;
            summarize(&report);
            Ok(report.exit_code)
        }
        Command::Check { spec, method } => {
            let (method, hyp, report) = commands::check(&spec, method)?;
            println!("method: {}", method.name());
            print!("{hyp}");
            if let Some(k) = &report.constants {
                println!("K0 = {}, K1 = {}, K = {}", k.k0, k.k1, k.k);
            }
            Ok(report.exit_code)
        }
        Command::Verify { spec, solution, mode, out } => {
            let report = commands::verify(&spec, &solution, mode, out.as_deref())?;
            summarize(&report);
            Ok(report.exit_code)
        }
        Command::Conjugate { spec, to } => {
            let kind = match to {
                Conjugation::Log => ConjugateKind::Log,
                Conjugation::Reflect => ConjugateKind::Reflect,
            };
            print!("{}", commands::conjugate(&spec, kind)?);
            Ok(0)
        }
        Command::Scan { spec, param, range, out } => {
            let (table, path) = commands::scan(&spec, &param, &range, &out)?;
            println!("{} rows -> {}", table.rows.len(), path.display());
            Ok(0)
        }
        Command::Example { name, solver, out } => {
            let report = commands::example(&name, &solver.into(), &out, cli.seed)?;
            summarize(&report);
            Ok(report.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
