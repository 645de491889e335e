use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manifold_dfo::harness::{
    profile_dirs, run_experiment, thread_count, write_atomic, write_sweep_select, ExperimentConfig, SelectCriterion,
    TauGrid,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "manifold-dfo", version, about = "Random search, manifold random search and LMRS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every (grid point × seed) run of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pick the best grid point per method and problem.
    SweepSelect {
        #[arg(long)]
        dir: PathBuf,
        /// min_final_f or min_evals_to_threshold
        #[arg(long)]
        criterion: String,
        /// Solve threshold on f; without it the stationarity stop is used.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Performance profile over runs from two or more methods.
    Profile {
        /// Comma-separated output directories.
        #[arg(long, value_delimiter = ',', required = true)]
        dirs: Vec<PathBuf>,
        /// auto, log:a:b:n or a comma-separated list.
        #[arg(long, default_value = "auto")]
        tau_grid: String,
        #[arg(long)]
        threshold: Option<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn run(config: PathBuf) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let threads = match thread_count() {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match run_experiment(&cfg, threads) {
        Ok(report) => {
            println!("{} runs written under {}", report.run_dirs.len(), cfg.output_dir.display());
            if report.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                for (dir, msg) in &report.failed {
                    eprintln!("run failed: {}: {msg}", dir.display());
                }
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(e) => fail(EXIT_RUNTIME, e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => run(config),
        Command::SweepSelect { dir, criterion, threshold } => {
            let criterion: SelectCriterion = match criterion.parse() {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match write_sweep_select(&dir, criterion, threshold) {
                Ok(report) => {
                    for s in &report.selections {
                        println!("{}\t{}\t{}\t{}", s.method, s.problem, s.grid_hash, s.score);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUNTIME, e),
            }
        }
        Command::Profile { dirs, tau_grid, threshold, out } => {
            let tau: TauGrid = match tau_grid.parse() {
                Ok(t) => t,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let table = match profile_dirs(&dirs, &tau, threshold) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_RUNTIME, e),
            };
            let csv = table.to_csv();
            match out {
                Some(path) => match write_atomic(&path, &csv) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(EXIT_RUNTIME, e),
                },
                None => {
                    print!("{csv}");
                    ExitCode::SUCCESS
                }
            }
        }
    }
}
