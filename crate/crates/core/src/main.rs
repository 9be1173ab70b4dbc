use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use darksite::acceptance::{run_all, Outcome};
use darksite::config::{run_experiment, write_spectra, ExperimentConfig, SolverKind};
use darksite::Error;

/// Steady states and photon correlations of driven-dissipative cavity lattices.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Replace the solver named in the config.
    #[arg(long)]
    solver: Option<SolverKind>,
    /// Run the acceptance suite.
    #[arg(long)]
    validate: bool,
    /// Write closed-system spectra CSVs into the output directory.
    #[arg(long)]
    spectra: bool,
}

const SOLVER_FAILURE: u8 = 1;
const CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(CONFIG_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    if cli.config.is_none() && !cli.validate && !cli.spectra {
        eprintln!("nothing to do: pass --config, --spectra or --validate");
        return ExitCode::from(CONFIG_ERROR);
    }
    let mut status = 0u8;

    if cli.spectra {
        match write_spectra(&cli.out) {
            Ok(files) => files.iter().for_each(|f| println!("wrote {}", f.display())),
            Err(e) => {
                eprintln!("spectra: {e}");
                status = status.max(SOLVER_FAILURE);
            }
        }
    }

    if let Some(path) = &cli.config {
        let mut cfg = match ExperimentConfig::from_path(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(CONFIG_ERROR);
            }
        };
        if let Some(s) = cli.solver {
            cfg.solver = s;
        }
        let workers = cli
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        match run_experiment(&cfg, &cli.out, workers) {
            Ok(summary) => {
                println!("wrote {} ({} points)", summary.csv.display(), summary.points);
                if let Some(t) = &summary.table {
                    println!("wrote {}", t.display());
                }
                println!("wrote {}", summary.sidecar.display());
                if !summary.failures.is_empty() {
                    eprintln!("{} of {} points failed", summary.failures.len(), summary.points);
                    status = status.max(SOLVER_FAILURE);
                }
            }
            Err(e @ Error::Config(_)) => {
                eprintln!("{e}");
                return ExitCode::from(CONFIG_ERROR);
            }
            Err(e) => {
                eprintln!("{e}");
                status = status.max(SOLVER_FAILURE);
            }
        }
    }

    if cli.validate {
        let outcomes: Vec<Outcome> = run_all();
        for o in &outcomes {
            println!("{}", o.line());
        }
        let failed = outcomes.iter().filter(|o| !o.passed).count();
        println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
        if failed > 0 {
            status = status.max(SOLVER_FAILURE);
        }
    }
    ExitCode::from(status)
}
