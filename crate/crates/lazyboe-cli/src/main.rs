//! Command-line front end: bundle construction and inspection, single-query
//! planning, and benchmark sweeps.
//!
//! Exit codes: 0 on success, 1 when a planner finishes without a solution,
//! 2 on configuration or usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use lazyboe::bench::{
    emit_report, generate_problems, parse_records_csv, run_benchmark, run_planner,
    significance_table,
};
use lazyboe::bundle::{build_bundle, load_bundle, save_bundle, EdgeBundle};
use lazyboe::config::{PlannerKind, RunConfig};
use lazyboe::perturbation::annotate_bundle;
use lazyboe::planner::{Budget, GoalRegion, Query, Trajectory};
use lazyboe::JointVector;

#[derive(Parser)]
#[command(name = "lazyboe", version, about = "Kinodynamic multi-query planning toolkit")]
struct Cli {
    /// Override every rng_seed in the loaded configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Edge-bundle operations.
    #[command(subcommand)]
    Bundle(BundleCommand),
    /// Plan a single query against a bundle.
    Plan(PlanArgs),
    /// Benchmark sweeps and reports.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Write the default desk-scale configuration.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BundleCommand {
    /// Monte Carlo edge-bundle generation.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Output bundle path.
        #[arg(long)]
        out: PathBuf,
        /// Also run perturbation analysis before saving.
        #[arg(long)]
        annotate: bool,
    },
    /// Perturbation analysis of an existing bundle.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Annotated bundle output; defaults to overwriting the input.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional per-edge CSV report.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print bundle metadata and summary statistics.
    Info {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Start state, comma-separated radians.
    #[arg(long)]
    start: String,
    /// Goal-region center, comma-separated radians.
    #[arg(long)]
    goal: String,
    /// Wall-clock budget in seconds; defaults to benchmark.time_budget.
    #[arg(long)]
    budget: Option<f64>,
    /// Deterministic iteration budget; overrides --budget.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value = "lazyboe")]
    planner: PlannerKind,
    /// Best-trajectory CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run the configured planner sweep.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Reuse an existing annotated bundle instead of building one.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Regenerate summary, significance table and plots from records.csv.
    Report {
        /// records.csv produced by `bench run`.
        #[arg(long, value_name = "RECORDS")]
        records: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Honor LAZYKDP_THREADS as a cap on the rayon pool.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("LAZYKDP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.generation.rng_seed = s;
        cfg.perturbation.rng_seed = s.wrapping_add(1);
        cfg.benchmark.rng_seed = s.wrapping_add(2);
    }
    Ok(cfg)
}

fn parse_state(s: &str, dof: usize, what: &str) -> anyhow::Result<JointVector> {
    let values: Vec<f64> = s
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {what} '{s}'"))?;
    if values.len() != dof {
        bail!("{what} has {} components, robot has {dof} joints", values.len());
    }
    Ok(JointVector::from_vec(values))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Bundle(cmd) => run_bundle(cmd, cli.seed),
        Command::Plan(args) => run_plan(args, cli.seed),
        Command::Bench(cmd) => run_bench(cmd, cli.seed),
        Command::Config(ConfigCommand::Init { out }) => {
            std::fs::write(&out, RunConfig::default_desk_scale().to_toml_string())?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build_from_config(cfg: &RunConfig) -> anyhow::Result<EdgeBundle> {
    Ok(build_bundle(
        &cfg.robot,
        &cfg.world,
        &cfg.limits,
        &cfg.generation,
        cfg.theta(),
        cfg.robot_digest(),
        cfg.world_digest(),
    )?)
}

fn run_bundle(cmd: BundleCommand, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    match cmd {
        BundleCommand::Build { config, out, annotate } => {
            let cfg = load_config(&config, seed)?;
            let mut bundle = build_from_config(&cfg)?;
            if annotate {
                let (annotated, _) = annotate_bundle(
                    bundle,
                    &cfg.robot,
                    &cfg.world,
                    &cfg.limits,
                    &cfg.perturbation_config(),
                )?;
                bundle = annotated;
            }
            save_bundle(&bundle, &out)?;
            println!(
                "wrote {} edges (theta {:.4}, annotated: {}) to {}",
                bundle.len(),
                bundle.theta(),
                bundle.is_annotated(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        BundleCommand::Analyze { config, bundle, out, csv } => {
            let cfg = load_config(&config, seed)?;
            let input = load_bundle(&bundle, cfg.robot_digest(), cfg.world_digest())?;
            let (annotated, reports) = annotate_bundle(
                input,
                &cfg.robot,
                &cfg.world,
                &cfg.limits,
                &cfg.perturbation_config(),
            )?;
            let out_path = out.unwrap_or(bundle);
            save_bundle(&annotated, &out_path)?;
            if let Some(csv_path) = csv {
                let mut s =
                    String::from("edge_id,p_lazy_prop,p_collision,p_valid,max_end_error\n");
                for (edge, report) in annotated.edges().iter().zip(&reports) {
                    s.push_str(&format!(
                        "{},{:.6},{:.6},{},{:.6}\n",
                        edge.id,
                        report.p_lazy_prop,
                        report.p_collision,
                        report.p_valid,
                        report.max_end_error
                    ));
                }
                std::fs::write(&csv_path, s)?;
            }
            println!("annotated {} edges into {}", annotated.len(), out_path.display());
            Ok(ExitCode::SUCCESS)
        }
        BundleCommand::Info { bundle } => {
            let b = lazyboe::persist::load_bundle_unchecked(&bundle)?;
            let meta = b.metadata();
            println!("edges: {}", b.len());
            println!("schema_version: {}", meta.schema_version);
            println!("theta: {:.6}", b.theta());
            println!("annotated: {}", b.is_annotated());
            println!("rng_seed: {}", meta.rng_seed);
            println!("robot_digest: {}", hex(&meta.robot_digest));
            println!("world_digest: {}", hex(&meta.world_digest));
            if b.is_annotated() && !b.is_empty() {
                let mean = |f: fn(&lazyboe::bundle::Edge) -> f64| {
                    b.edges().iter().map(f).sum::<f64>() / b.len() as f64
                };
                println!("mean_p_lazy_prop: {:.4}", mean(|e| e.p_lazy_prop));
                println!("mean_p_collision: {:.4}", mean(|e| e.p_collision));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn hex(digest: &[u8; 32]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let dof = traj.waypoints.first().map_or(0, |w| w.q.len());
    let mut header = String::from("time");
    for i in 0..dof {
        header.push_str(&format!(",q{i}"));
    }
    for i in 0..dof {
        header.push_str(&format!(",dq{i}"));
    }
    header.push('\n');
    let mut s = header;
    for w in &traj.waypoints {
        s.push_str(&format!("{:.6}", w.time));
        for v in w.q.iter().chain(w.dq.iter()) {
            s.push_str(&format!(",{v:.9}"));
        }
        s.push('\n');
    }
    s
}

fn run_plan(args: PlanArgs, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&args.config, seed)?;
    let bundle = load_bundle(&args.bundle, cfg.robot_digest(), cfg.world_digest())?;
    let dof = cfg.robot.dof();
    let start = parse_state(&args.start, dof, "--start")?;
    let goal_center = parse_state(&args.goal, dof, "--goal")?;
    let time_budget = args.budget.unwrap_or(cfg.benchmark.time_budget);
    let query = Query {
        start,
        goal: GoalRegion { center: goal_center, radius: cfg.planner.goal_radius },
        time_budget,
        rng_seed: seed.unwrap_or(cfg.benchmark.rng_seed),
    };
    let budget = args.iterations.map(Budget::Iterations);
    let outcome = run_planner(args.planner, &bundle, &cfg, &query, budget)?;
    let stats = &outcome.stats;
    println!(
        "planner: {} solutions: {} iterations: {} simulations: {}",
        args.planner,
        outcome.trajectories.len(),
        stats.iterations,
        stats.simulations
    );
    match outcome.best_cost() {
        Some(cost) => {
            println!(
                "best_cost: {cost:.6} time_to_first: {:.4}",
                outcome.time_to_first.unwrap_or(0.0)
            );
            if let Some(out) = args.out {
                let best = outcome
                    .trajectories
                    .iter()
                    .min_by(|x, y| x.cost.total_cmp(&y.cost))
                    .ok_or_else(|| anyhow!("no trajectory despite best_cost"))?;
                std::fs::write(&out, trajectory_csv(best))?;
                println!("wrote {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("no solution found");
            Ok(ExitCode::from(1))
        }
    }
}

fn run_bench(cmd: BenchCommand, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    match cmd {
        BenchCommand::Run { config, bundle, out_dir } => {
            let cfg = load_config(&config, seed)?;
            let bundle = match bundle {
                Some(path) => load_bundle(&path, cfg.robot_digest(), cfg.world_digest())?,
                None => {
                    eprintln!("building bundle ({} edges)...", cfg.generation.n_edges);
                    let raw = build_from_config(&cfg)?;
                    eprintln!("annotating (p = {})...", cfg.perturbation.p);
                    let (annotated, _) = annotate_bundle(
                        raw,
                        &cfg.robot,
                        &cfg.world,
                        &cfg.limits,
                        &cfg.perturbation_config(),
                    )?;
                    annotated
                }
            };
            let problems = generate_problems(
                &cfg.robot,
                &cfg.world,
                &cfg.limits,
                cfg.benchmark.n_problems,
                cfg.planner.goal_radius,
                cfg.benchmark.time_budget,
                cfg.benchmark.rng_seed,
            )?;
            let budget = cfg.benchmark.budget_iterations.map(Budget::Iterations);
            eprintln!(
                "sweeping {} planners over {} problems...",
                cfg.benchmark.planners.len(),
                problems.len()
            );
            let records =
                run_benchmark(&cfg.benchmark.planners, &problems, &bundle, &cfg, budget);
            let table = significance_table(&records);
            emit_report(&records, &table, &out_dir)?;
            println!("wrote report to {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        BenchCommand::Report { records, out_dir } => {
            let s = std::fs::read_to_string(&records)?;
            let parsed = parse_records_csv(&s)?;
            let table = significance_table(&parsed);
            emit_report(&parsed, &table, &out_dir)?;
            println!("wrote report to {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
