use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use kinorrt::scenarios::Scenario;
use kinorrt_cli::bench::{BACKENDS, BENCH_FILE};
use kinorrt_cli::steer::parse_state;
use kinorrt_cli::{
    cmd_bench, cmd_plan, cmd_render, cmd_steer, BackendChoice, BenchRequest, CliError, Overrides,
    RunManifest, SteerRequest, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(
    name = "kinorrt",
    version,
    about = "Kinodynamic RRT* with optimal steering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan from start to goal and write trajectory, convergence log and manifest.
    Plan(PlanArgs),
    /// Optimal connection between two states.
    Steer(SteerArgs),
    /// Time both backends at increasing node counts.
    Bench(BenchArgs),
    /// Project a trajectory onto two state dimensions as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, required_unless_present = "manifest")]
    scenario: Option<PathBuf>,
    /// Re-run a previous run's manifest.json; other flags are ignored.
    #[arg(long, conflicts_with = "scenario")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// closed or rk4.
    #[arg(long)]
    backend: Option<String>,
    /// Neighbor radius in cost units, or inf.
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    sample_dt: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write projection.svg over these two state dims, e.g. 0,1.
    #[arg(long)]
    svg: Option<String>,
    /// Record wall times; the outputs then differ between runs.
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args)]
struct SteerArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated initial state; defaults to the scenario start.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Comma-separated final state; defaults to the scenario goal.
    #[arg(long, allow_hyphen_values = true)]
    x1: Option<String>,
    /// closed, rk4 or both.
    #[arg(long, default_value = "closed")]
    backend: String,
    #[arg(long)]
    sample_dt: Option<f64>,
    /// Largest accepted relative cost discrepancy with --backend both.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// Directory for the trajectory CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Repeat for several scenarios.
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1000,2000,3000,4000,5000"
    )]
    nodes: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock budget per run in seconds.
    #[arg(long, default_value_t = 600.0)]
    budget: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    trajectory: PathBuf,
    /// Supplies the obstacles and plot bounds.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "0,1")]
    dims: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_dims(s: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(CliError::Config(format!("bad dims '{s}'"))),
        },
        _ => Err(CliError::Config(format!(
            "dims must be two indices like 0,1, got '{s}'"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan(a) => {
            let manifest = match a.manifest {
                Some(path) => RunManifest::load(&path)?,
                None => {
                    let mut m = RunManifest::new(a.scenario.expect("required by clap"), a.out);
                    m.overrides = Overrides {
                        seed: a.seed,
                        iterations: a.iterations,
                        backend: a.backend,
                        radius: a.radius,
                        sample_dt: a.sample_dt,
                    };
                    m.svg_dims = a.svg.as_deref().map(parse_dims).transpose()?;
                    m.record_wall_time = a.wall_time;
                    m
                }
            };
            let report = cmd_plan(&manifest)?;
            println!("{}", report.summary());
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Steer(a) => {
            let req = SteerRequest {
                scenario: Scenario::load(&a.scenario)?,
                x0: a.x0.as_deref().map(parse_state).transpose()?,
                x1: a.x1.as_deref().map(parse_state).transpose()?,
                backend: a
                    .backend
                    .parse::<BackendChoice>()
                    .map_err(CliError::Config)?,
                sample_dt: a.sample_dt,
                tolerance: a.tolerance,
                out_dir: a.out,
            };
            print!("{}", cmd_steer(&req)?);
        }
        Command::Bench(a) => {
            if !(a.budget > 0.0 && a.budget.is_finite()) {
                return Err(CliError::Config(format!(
                    "budget must be positive, got {}",
                    a.budget
                )));
            }
            let mut scenarios = Vec::new();
            for p in &a.scenario {
                let mut s = Scenario::load(p)?;
                if let Some(seed) = a.seed {
                    s.planner.rng_seed = seed;
                }
                scenarios.push(s);
            }
            let table = cmd_bench(&BenchRequest {
                scenarios,
                backends: BACKENDS.to_vec(),
                node_counts: a.nodes,
                budget: Duration::from_secs_f64(a.budget),
                max_iterations: a.max_iterations,
            })?;
            print!("{table}");
            if let Some(dir) = a.out {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?;
                let path = dir.join(BENCH_FILE);
                table.write_csv(&path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Render(a) => {
            let scenario = Scenario::load(&a.scenario)?;
            cmd_render(
                &a.trajectory,
                &scenario.environment,
                parse_dims(&a.dims)?,
                &a.out,
            )?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
