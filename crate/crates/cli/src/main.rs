use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sweep_tool::acceptance;
use sweep_tool::error::exit;
use sweep_tool::runner::{load, run_loaded, RunOptions, RunOutcome, MANIFEST};
use sweep_tool::{CliError, CliResult};

/// Sweeping processes and reflected SDEs on moving prox-regular sets.
#[derive(Parser)]
#[command(name = "sweep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario of any kind.
    Run(RunArgs),
    /// Run a geometry-check scenario and write its certificate report.
    GeometryCheck(RunArgs),
    /// Run a stability or pathwise-convergence scenario and print its table.
    Sweep(RunArgs),
    /// Run the acceptance suite.
    SelfTest {
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    scenario: PathBuf,
    /// Replace the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SWEEP_OUT_DIR", default_value = "sweep-out")]
    out_dir: PathBuf,
    /// `key=value`, with dotted keys relative to the file root; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Number of Monte Carlo paths (sde and stability scenarios).
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn execute(args: &RunArgs, allowed: &[&str]) -> CliResult<RunOutcome> {
    let opts = RunOptions {
        seed: args.seed,
        paths: args.paths,
        overrides: args.overrides.clone(),
        out_dir: args.out_dir.clone(),
    };
    let (config, file) = load(&args.scenario, &opts)?;
    let kind = file.scenario.kind();
    if !allowed.is_empty() && !allowed.contains(&kind) {
        return Err(CliError::Config(format!(
            "expected a scenario of kind {}, found `{kind}`",
            allowed.join(" or ")
        )));
    }
    if kind == "sde" && allowed.contains(&"sde") && !config_has_pathwise(&config) {
        return Err(CliError::Config("sweep needs an sde scenario with a `pathwise` block".into()));
    }
    run_loaded(&args.scenario, config, &file, &opts.out_dir)
}

fn config_has_pathwise(config: &serde_json::Value) -> bool {
    config.pointer("/scenario/pathwise").is_some_and(|v| !v.is_null())
}

fn report(args: &RunArgs, outcome: &RunOutcome) {
    let m = &outcome.manifest;
    if let Some(e) = &m.error {
        let at = e.node.map(|n| format!(" at node {n}")).unwrap_or_default();
        eprintln!("sweep: {}{at}: {}", m.status, e.message);
    }
    if args.quiet {
        return;
    }
    if let Some(text) = &outcome.report {
        println!("{text}");
    }
    println!(
        "{} scenario `{}`: {} ({} discarded, {:.2} s); manifest {}",
        m.kind,
        m.name.as_deref().unwrap_or("unnamed"),
        m.status,
        m.discarded,
        m.wall_time_seconds,
        Path::new(&args.out_dir).join(MANIFEST).display()
    );
}

fn run_command(args: &RunArgs, allowed: &[&str]) -> u8 {
    match execute(args, allowed) {
        Ok(outcome) => {
            report(args, &outcome);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("sweep: {}: {e}", e.status());
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(args) => run_command(args, &[]),
        Command::GeometryCheck(args) => run_command(args, &["geometry-check"]),
        Command::Sweep(args) => run_command(args, &["stability", "sde"]),
        Command::SelfTest { quiet } => {
            let results = acceptance::run_all(|r| {
                if !quiet || !r.passed {
                    println!("{r}");
                }
            });
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("acceptance: {} passed, {failed} failed", results.len() - failed);
            if failed == 0 {
                exit::OK
            } else {
                exit::CHECK_FAILED
            }
        }
    };
    ExitCode::from(code)
}
