use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use blockmads::bench::{
    read_histories, run_seed, run_solver, starting_points, write_bench, write_profiles, write_run, BenchPlan,
    SolverConfig, SolverKind,
};
use blockmads::mads::{Executor, ScaledProblem};
use blockmads::problems::lookup;

#[derive(Parser)]
#[command(name = "blockmads", version, about = "Block-parallel MADS with LOWESS surrogate search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one problem and write its trace.
    Run(RunArgs),
    /// Run the full problems x solvers x q x runs matrix.
    Bench(BenchArgs),
    /// Compute performance profiles, speed-up and summaries from bench output.
    Profiles(ProfileArgs),
}

fn parse_problem(s: &str) -> Result<String, String> {
    lookup(s)
        .map(|e| e.name.to_string())
        .ok_or_else(|| format!("unknown problem '{s}' (expected tcsd, vessel or welded)"))
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: blockmads::Error| e.to_string())
}

fn parse_q(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(q) if q >= 1 => Ok(q),
        _ => Err(format!("block size must be a positive integer, got '{s}'")),
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_problem)]
    problem: String,
    #[arg(long, value_parser = parse_solver)]
    solver: SolverKind,
    #[arg(long, default_value_t = 1, value_parser = parse_q)]
    q: usize,
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Index of the starting point set.
    #[arg(long, default_value_t = 0)]
    run_index: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for block evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Artificial delay per evaluation, for debugging.
    #[arg(long, default_value_t = 0)]
    sleep_ms: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_problem, default_value = "tcsd,vessel,welded")]
    problems: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_solver,
          default_value = "mads,multistart,lhsearch,lowess-a,lowess-b")]
    solvers: Vec<SolverKind>,
    #[arg(long, value_delimiter = ',', value_parser = parse_q, default_value = "1,8")]
    q: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Directory holding bench_summary.csv.
    #[arg(long, default_value = "bench-out")]
    in_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1e-2")]
    tau: Vec<f64>,
    /// Defaults to the input directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let entry = lookup(&args.problem).context("unknown problem")?;
    let problem = ScaledProblem::new(entry.spec);
    let config = SolverConfig::new(args.solver, args.q, run_seed(args.seed, args.run_index)).with_budget(args.blocks);
    let starts = starting_points(problem.spec(), args.seed, args.run_index);
    if starts.len() < config.starting_points_needed() {
        bail!("q = {} exceeds the {} available starting points", args.q, starts.len());
    }
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let exec = Executor::with_threads(threads)?.sleep_per_eval(Duration::from_millis(args.sleep_ms));
    let rec = exec.install(|| run_solver(&config, &problem, &starts, args.run_index, &exec))?;
    write_run(&rec, &args.out_dir)?;
    println!(
        "{} {} q={} blocks={} evaluations={} f={} h={}",
        rec.problem, rec.solver, rec.q, rec.blocks(), rec.evaluations, rec.final_f, rec.final_h
    );
    if let Some(x) = &rec.final_x {
        println!("x = {x:?}");
    }
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    if args.q.iter().any(|&q| q > blockmads::bench::STARTING_SET_SIZE) {
        bail!("q may not exceed {}", blockmads::bench::STARTING_SET_SIZE);
    }
    let plan = BenchPlan {
        problems: args.problems,
        solvers: args.solvers,
        qs: args.q,
        runs: args.runs,
        blocks: args.blocks,
        seed: args.seed,
    };
    let records = blockmads::bench::run_bench(&plan)?;
    write_bench(&records, &args.out_dir)?;
    println!("{} runs written to {}", records.len(), args.out_dir.display());
    Ok(())
}

fn profiles(args: ProfileArgs) -> anyhow::Result<()> {
    let path = args.in_dir.join("bench_summary.csv");
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let histories = read_histories(BufReader::new(file))?;
    let out = args.out_dir.unwrap_or(args.in_dir);
    write_profiles(&histories, &args.tau, &out)?;
    println!("profiles for {} runs written to {}", histories.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Profiles(a) => profiles(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
