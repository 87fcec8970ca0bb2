mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit statuses: 0 success, 1 numerical tolerance, 2 usage/config, 3 IO.
#[derive(Debug)]
pub enum Failure {
    Tolerance(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Tolerance(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<boundtele::Error> for Failure {
    fn from(e: boundtele::Error) -> Self {
        use boundtele::Error as E;
        match e {
            E::InvalidParameter(_) | E::Table(_) => Failure::Usage(e.to_string()),
            E::Io(_) | E::Csv(_) => Failure::Io(e.to_string()),
            _ => Failure::Tolerance(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

const OVERRIDES_HELP: &str = "\
Every config key can be set with --<section>-<key> <value>, e.g.
--bath-omega-c 4 or --numerics-h 0.01. Keys that occur in one section only
also accept the short form (--eta 0, --omega-c 4, --t-max 50).
Precedence: flags > config file > built-in defaults.

Exit codes: 0 ok, 1 numerical tolerance failure, 2 usage/config error, 3 IO error.";

#[derive(Parser)]
#[command(name = "boundtele", version, about = "Non-Markovian teleportation fidelity and reservoir bound states", after_help = OVERRIDES_HELP)]
struct Cli {
    /// Sectioned TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for sweeps and oracles (0 = available parallelism)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for u(t); writes the trajectory CSV and a JSON summary
    USolve,
    /// Sweep one parameter and track the bound-state branch
    Spectrum,
    /// Teleportation fidelity along the solved u(t)
    Fidelity {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
    },
    /// Check an independent oracle against the closed form or the solver
    Oracle {
        #[arg(long, value_enum)]
        which: OracleArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProtocolArg {
    Dv,
    Cv,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OracleArg {
    Dv,
    Cv,
    Lattice,
}

fn run() -> Result<(), Failure> {
    let (args, overrides) = config::split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    match cli.command {
        Command::USolve => commands::u_solve(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Fidelity { protocol } => commands::fidelity(&cfg, protocol),
        Command::Oracle { which } => commands::oracle(&cfg, which),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("boundtele: {f}");
            ExitCode::from(f.code())
        }
    }
}
