mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Schema versions of every machine-readable output, printed by `--version`.
pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (comparison report schema 1, fit document schema 1, dispatch plan schema 1, telemetry record schema 1)"
);

#[derive(Debug, Parser)]
#[command(name = "teamtime", version = VERSION, about = "Human task-duration modeling for human-robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Fit one family (or all) by maximum likelihood
    Fit(FitArgs),
    /// Fit all families and rank them by AD, AIC and BIC
    Compare(CompareArgs),
    /// Write Q-Q, CDF or density plot data
    Plot(PlotArgs),
    /// Simulate packing sessions and store them as telemetry
    Simulate(SimulateArgs),
    /// Plan robot dispatch times against per-order duration models
    Schedule(ScheduleArgs),
    /// Run the telemetry HTTP service
    Serve(ServeArgs),
    /// Export per-session durations from a telemetry store
    Export(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// Column to read, by header name
    #[arg(long)]
    column: String,
    /// normal, weibull, gamma, lognormal, or all
    #[arg(long, default_value = "all")]
    family: String,
    /// Output JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Output stem; writes <stem>.json and <stem>.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PlotKindArg {
    Qq,
    Cdf,
    Density,
}

#[derive(Debug, Args, Serialize)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKindArg,
    /// Model as `family=lognormal mu=3.85 sigma=0.62`, JSON, or a file holding either or a fit document
    #[arg(long)]
    model: String,
    #[arg(long)]
    input: PathBuf,
    /// Column to read; defaults to the first numeric column
    #[arg(long)]
    column: Option<String>,
    /// Output CSV path; the model curve goes to <stem>.model.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Simulation config JSON, or `default` for the built-in three-order config
    #[arg(long)]
    config: String,
    /// Output directory (also the telemetry data directory)
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config session count
    #[arg(long)]
    sessions: Option<usize>,
    /// Dispatch plan JSON applied to the robot deliveries
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ScheduleArgs {
    /// One model per order
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<String>,
    #[arg(long)]
    cost_human: f64,
    #[arg(long)]
    cost_robot: f64,
    /// Robot travel seconds: one value for every order or one per order
    #[arg(long, num_args = 1.., default_values_t = [0.0])]
    travel: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ServeArgs {
    /// Defaults to TEAMTIME_PORT or 8080
    #[arg(long)]
    port: Option<u16>,
    /// Defaults to TEAMTIME_DATA_DIR or ./teamtime-data
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ExportArgs {
    #[arg(long)]
    data_dir: PathBuf,
    /// all, none, or a comma list of complete, unique-worker, survey
    #[arg(long, default_value = "all")]
    policy: String,
    #[arg(long)]
    out: PathBuf,
}

/// Full flag listing for the subcommand named in argv, or the top-level help.
fn usage_help(sub: Option<&str>) -> String {
    let mut cmd = Cli::command();
    match sub.and_then(|name| cmd.find_subcommand_mut(name)) {
        Some(sc) => sc.render_help().to_string(),
        None => cmd.render_help().to_string(),
    }
}

/// Error chain without repeating messages already contained in an outer one.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version go to stdout with status 0; usage errors exit 2
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", usage_help(std::env::args().nth(1).as_deref()));
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing_subscriber::filter::LevelFilter::INFO)
        .init();
    match serde_json::to_string(&cli.command) {
        Ok(resolved) => eprintln!("teamtime {}: {resolved}", env!("CARGO_PKG_VERSION")),
        Err(e) => eprintln!("teamtime: cannot print configuration: {e}"),
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
