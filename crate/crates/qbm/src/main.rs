use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qbm::config::{Command, ConfigFile, ExperimentConfig, parse_str, read_config};
use qbm::runner::{RunError, Stamp, run, write_error};

/// Default worker count when `--threads` is absent.
const THREADS_ENV: &str = "QBM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qbm", version, about = "Lattice particle coupled to bosonic baths: rates, Lindblad evolution, jump processes and Dyson checks")]
struct Cli {
    /// Experiment file; without one the two-level preset is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: $QBM_THREADS, else one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Tabulate bath correlation functions.
    Correlations,
    /// Tabulate jump-rate kernels, Lamb-shift weights and momentum jump rates.
    Rates,
    /// Kraus-form positivity and trace-preservation report.
    Certify,
    /// Evolve a localized state under the lattice Lindblad generator.
    Evolve {
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        dtau: Option<f64>,
        /// Box side.
        #[arg(long = "box")]
        side: Option<usize>,
        /// 2 or inf.
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Integrate the momentum-space master equation.
    Kinetic,
    /// Sample the momentum-space jump process.
    Gillespie {
        #[arg(long)]
        n_traj: Option<usize>,
    },
    /// Mean current of the four-level ratchet.
    Ratchet {
        /// Exchange the two ratchet couplings.
        #[arg(long)]
        swap: bool,
    },
    /// Finite-volume Dyson series checks.
    Dyson {
        /// scan, compare or spectral.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Decay exponents of the bath correlation.
    Decay,
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Self::Correlations => Command::Correlations,
            Self::Rates => Command::Rates,
            Self::Certify => Command::Certify,
            Self::Evolve { .. } => Command::Evolve,
            Self::Kinetic => Command::Kinetic,
            Self::Gillespie { .. } => Command::Gillespie,
            Self::Ratchet { .. } => Command::Ratchet,
            Self::Dyson { .. } => Command::Dyson,
            Self::Decay => Command::Decay,
        }
    }

    fn apply(&self, file: &mut ConfigFile) {
        match self {
            Self::Evolve { tau, dtau, side, alpha } => {
                let e = file.evolve.get_or_insert_default();
                e.tau_final = tau.or(e.tau_final);
                e.dtau = dtau.or(e.dtau);
                if let Some(s) = side {
                    file.lattice.get_or_insert_default().side = Some(*s);
                }
                if let Some(a) = alpha {
                    file.alpha = Some(a.parse::<i64>().map_or(toml::Value::String(a.clone()), toml::Value::Integer));
                }
            }
            Self::Gillespie { n_traj: Some(n) } => {
                file.gillespie.get_or_insert_default().trajectories = Some(*n);
            }
            Self::Ratchet { swap } => {
                if *swap {
                    let r = file.ratchet.get_or_insert_default();
                    r.swap = Some(!r.swap.unwrap_or(false));
                }
            }
            Self::Dyson { mode: Some(m) } => {
                file.dyson.get_or_insert_default().mode = Some(m.clone());
            }
            _ => {}
        }
    }
}

fn threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok()).filter(|&n| n > 0)
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut file = match &cli.config {
        Some(path) => read_config(path)?,
        None => parse_str("", "two_level preset")?,
    };
    cli.command.apply(&mut file);
    if cli.seed.is_some() {
        file.seed = cli.seed;
    }
    if let Some(dir) = &cli.out_dir {
        file.out_dir = Some(dir.clone());
    }
    Ok(file.validate()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = threads(cli.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is built once");
    }
    let command = cli.command.command();
    let (config, result) = match load(&cli) {
        Ok(c) => {
            let r = run(command, &c);
            (Some(c), r)
        }
        Err(e) => (None, Err(e)),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.report.display());
            if outcome.pass == Some(false) {
                eprintln!("{command}: FAIL");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("{command}: {error}");
            let dir = config
                .as_ref()
                .map(|c| c.out_dir.clone())
                .or_else(|| cli.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            if let Err(e) = write_error(&dir, Stamp::new(command, config.as_ref()), &error) {
                eprintln!("could not write the error report: {e}");
            }
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
