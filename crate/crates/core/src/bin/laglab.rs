use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use laglab::cli::{
    self, describe, exit_code, run, run_mirror, write_outcome, ExperimentConfig, MirrorJob,
    EXIT_CHECK,
};
use laglab::validation::SuiteConfig;
use laglab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "laglab",
    version,
    about = "Curvature experiments on positive Lagrangian graphs"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Print the experiment plan without computing anything.
    Describe { config: PathBuf },
    /// Run the validation suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the Hermitian-matrix model from a JSON job.
    Mirror { config: PathBuf },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LAGLAB_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            Error::Config(format!(
                "LAGLAB_THREADS must be a positive integer, got '{v}'"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(config: ExperimentConfig) -> Result<bool> {
    let outcome = run(&config)?;
    if let Some(text) = write_outcome(&config, &outcome)? {
        print!("{text}");
    }
    if !outcome.report.pass {
        eprintln!("laglab: one or more checks failed");
    }
    Ok(outcome.report.pass)
}

fn dispatch(command: Command) -> Result<bool> {
    init_threads()?;
    match command {
        Command::Run { config } => execute(ExperimentConfig::load(&config)?),
        Command::Describe { config } => {
            print!("{}", describe(&ExperimentConfig::load(&config)?)?);
            Ok(true)
        }
        Command::Validate { seed, grid, output } => {
            let suite = SuiteConfig {
                seed,
                grid_points: grid,
                ..SuiteConfig::default()
            };
            execute(ExperimentConfig {
                model: cli::ModelSpec::default(),
                grid,
                potential: Default::default(),
                functions: Default::default(),
                job: cli::Job::Validate(suite),
                output,
                timing: false,
            })
        }
        Command::Mirror { config } => {
            let text = std::fs::read_to_string(&config)?;
            let job: MirrorJob =
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let (results, pass) = run_mirror(&job)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&results).expect("serializable")
            );
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK as u8),
        Err(e) => {
            eprintln!("laglab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
