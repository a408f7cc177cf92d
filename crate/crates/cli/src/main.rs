use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mqft_cli::experiment::{bounds, oracle_check};
use mqft_cli::{emit_records, run_experiment, CliError, ExperimentConfig};
use mqft_core::stats::BoundsConvention;

#[derive(Parser)]
#[command(name = "mqft", version, about = "Serial measured QFT experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out_dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides `workers` (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare the controlled-phase circuit, the classically controlled
    /// circuit and the serial pipeline on n qubits.
    OracleCheck {
        #[arg(long)]
        n: usize,
        /// Random phases checked in addition to the representable ones.
        #[arg(long, default_value_t = 20)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Confidence range of the per-qubit error from observed extremes.
    Bounds {
        #[arg(long)]
        kmax: usize,
        #[arg(long)]
        nmax: usize,
        #[arg(long, requires = "nmin")]
        kmin: Option<usize>,
        #[arg(long, requires = "kmin")]
        nmin: Option<usize>,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "cumulative")]
        convention: BoundsConvention,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed, out_dir, workers } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if seed.is_some() {
                cfg.master_seed = seed;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let summary = run_experiment(&cfg)?;
            emit_records(&summary, &cfg.out_dir)?;
            print!("{}", mqft_cli::records::summary_text(&summary));
            eprintln!("wall time: {:.3} s", summary.wall_time.as_secs_f64());
            summary.check_aborts()
        }
        Command::OracleCheck { n, random, seed, workers } => {
            if n == 0 || n > mqft_core::oracle::MAX_QUBITS {
                return Err(CliError::config("n", format!("{n} not in 1..={}", mqft_core::oracle::MAX_QUBITS)));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CliError::config("workers", e.to_string()))?;
            let report = pool.install(|| oracle_check(n, random, seed))?;
            println!("n: {}", report.n);
            println!("phases: {}", report.phases);
            println!("max_tv_semiclassical: {:e}", report.max_tv_semiclassical);
            println!("max_tv_serial: {:e}", report.max_tv_serial);
            if let Some(p) = report.min_exact_recovery {
                println!("min_exact_recovery: {p}");
            }
            Ok(())
        }
        Command::Bounds { kmax, nmax, kmin, nmin, trials, alpha, convention } => {
            let (p_min, p_max) = bounds(kmax, nmax, kmin.zip(nmin), trials, alpha, convention)?;
            if let Some(p) = p_min {
                println!("p_min: {p:e}");
            }
            println!("p_max: {p_max:e}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
