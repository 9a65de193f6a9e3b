use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use jte_core::config::{load_config, ProblemSpec};
use jte_core::pipeline::{run_pipeline, RunOptions};
use jte_core::report::{render, ReportFormat};
use jte_core::verify::{
    draw_samples, min_clearances, oracle_lambda, sample_check, write_samples_csv, OracleOptions, SampleOptions,
};

/// Certified joint-space tolerances for serial arms near planar walls.
#[derive(Parser, Debug)]
#[command(name = "jte", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a tolerance for every constraint and report it.
    Solve(SolveArgs),
    /// Sample the tolerance box of a given size for violations.
    Verify(VerifyArgs),
    /// Bracket the true tolerance of each constraint by grid bisection.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "text-table")]
    format: ReportFormat,
    /// Write every verification sample at the combined tolerance as CSV.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cone_order: Option<usize>,
    /// Log each pipeline stage to stderr.
    #[arg(long)]
    trace: bool,
    /// Leave timing fields empty for reproducible output.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Box half-width in radians.
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ProblemSpec> {
    let mut spec = load_config(path)?;
    if let Some(seed) = seed {
        spec.verification.seed = seed;
        spec.solver.seed = seed;
    }
    Ok(spec)
}

fn sampling(spec: &ProblemSpec) -> SampleOptions {
    let v = &spec.verification;
    SampleOptions { samples: v.samples, seed: v.seed, corner_bias: v.corner_bias }
}

fn solve(args: SolveArgs) -> Result<i32> {
    let mut spec = load(&args.config, args.seed)?;
    if let Some(order) = args.cone_order {
        let max = spec.robot.dof() + 1;
        anyhow::ensure!((1..=max).contains(&order), "--cone-order must lie in 1..={max}, got {order}");
        spec.cone_order = order;
    }
    let out = run_pipeline(&spec, RunOptions { trace: args.trace, omit_timing: args.omit_timing });
    for line in &out.trace {
        eprintln!("{line}");
    }
    let text = render(&out.report, args.format)?;
    match &args.report {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.samples {
        let configs = draw_samples(&spec.reference, out.report.lambda_min, &sampling(&spec));
        let f = min_clearances(&spec.constraints, &spec.robot, &configs)?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_samples_csv(&mut w, &configs, &f)?;
        w.flush()?;
    }
    Ok(out.report.exit_code())
}

fn verify(args: VerifyArgs) -> Result<i32> {
    let spec = load(&args.config, args.seed)?;
    let opts = SampleOptions { samples: spec.verification.samples.max(1), ..sampling(&spec) };
    let mut code = 0;
    for c in &spec.constraints {
        let r = sample_check(std::slice::from_ref(c), &spec.robot, &spec.reference, args.lambda, &opts)?;
        println!("{}\tviolations {}/{}\tmin f {:.4}", c.name, r.violations, r.samples, r.min_f);
    }
    let all = sample_check(&spec.constraints, &spec.robot, &spec.reference, args.lambda, &opts)?;
    println!("all\tviolations {}/{}\tmin f {:.4}", all.violations, all.samples, all.min_f);
    if all.violations > 0 {
        code = 2;
    }
    Ok(code)
}

fn oracle(args: OracleArgs) -> Result<i32> {
    let spec = load(&args.config, None)?;
    let v = &spec.verification;
    let opts = OracleOptions { grid_per_axis: v.grid_per_axis, tol: v.oracle_tol, lambda_max: v.lambda_max };
    for c in &spec.constraints {
        let o = oracle_lambda(c, &spec.robot, &spec.reference, &opts)?;
        println!(
            "{}\tlambda {:.6}\tbracket [{:.6}, {:.6}]\tgrid {}",
            c.name, o.lambda_hat, o.lo, o.hi, o.grid_per_axis
        );
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(threads) = std::env::var("JTE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = jte_core::set_thread_limit(n) {
                    eprintln!("warning: JTE_THREADS ignored: {e}");
                }
            }
            _ => eprintln!("warning: JTE_THREADS must be a positive integer, got `{threads}`"),
        }
    }
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
