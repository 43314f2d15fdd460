use std::path::PathBuf;
use std::process::ExitCode;

use brenier_lab::catalog::list_targets;
use brenier_lab::runner::{load_config, run_experiment};
use brenier_lab::LabError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "brenier-lab", version, about = "Run Brenier-map verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory of the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Multiply every Monte-Carlo budget (0.1 for a quick run, 10 for a thorough one).
    #[arg(long, global = true, default_value_t = 1.0)]
    budget_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Describe the built-in target families.
    ListTargets,
}

fn run(cli: Cli) -> Result<ExitCode, LabError> {
    match cli.command {
        Command::ListTargets => {
            print!("{}", list_targets());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(dir) = cli.out_dir {
                cfg.out_dir = Some(dir);
            }
            if !(cli.budget_scale > 0.0 && cli.budget_scale.is_finite()) {
                return Err(LabError::Config(brenier_lab::ConfigError {
                    field: Some("--budget-scale".into()),
                    line: None,
                    message: format!("must be positive, got {}", cli.budget_scale),
                }));
            }
            cfg.scale_budgets(cli.budget_scale);
            cfg.validate(None)?;
            let outcome = run_experiment(&cfg)?;
            print!("{}", outcome.report.table());
            println!("reports written to {}", outcome.out_dir.display());
            Ok(if outcome.exit_code == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
