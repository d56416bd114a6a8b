mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "sdc", version, about = "Superdense coding as a prepare-and-measure entanglement witness")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice; echoed into the output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// See-saw convergence tolerance (absolute improvement per round).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// See-saw restarts (default: 10 for d <= 3, 20 otherwise).
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file overriding numeric tolerances.
    #[arg(long, global = true)]
    pub policy: Option<PathBuf>,
    /// Repeat for more detail (-v info, -vv debug, -vvv solver iteration logs).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Isotropic,
    Werner,
    MaxEntangled,
    Partial,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Shared state as JSON (`d_a`, `d_b`, `re`, `im`).
    #[arg(long, conflicts_with = "family")]
    pub state: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Local dimension for named families.
    #[arg(long)]
    pub d: Option<usize>,
    /// Isotropic visibility.
    #[arg(long)]
    pub chi: Option<f64>,
    /// Werner parameter.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Schmidt rank for the partially entangled family.
    #[arg(long)]
    pub s: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Behavior and score of a saved protocol.
    Simulate {
        /// Protocol JSON, or the JSON written by `seesaw`.
        #[arg(long)]
        protocol: PathBuf,
    },
    /// See-saw lower bound on the best success probability for a state.
    Seesaw {
        #[command(flatten)]
        state: StateArgs,
        /// Number of preparations (default d_A²).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        /// Per-restart trace CSV (restart, round, value).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// See-saw bounds over a parameter grid of isotropic or Werner states.
    Sweep {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
    },
    /// Bounds, comparison constants and optional verdicts.
    Witness {
        #[arg(long)]
        d: usize,
        /// Schmidt number (default d).
        #[arg(long)]
        s: Option<usize>,
        /// Number of preparations (default d²).
        #[arg(long)]
        n: Option<usize>,
        /// Observed success probability to certify.
        #[arg(long)]
        p: Option<f64>,
        /// Protocol JSON to run the self-test on.
        #[arg(long)]
        protocol: Option<PathBuf>,
    },
    /// Weyl-grouped preparations with pairwise Helstrom measurements.
    Vn {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.verbose);
    let result = match cli.command {
        Command::Simulate { protocol } => commands::simulate(&cli.global, &protocol),
        Command::Seesaw { state, n, max_rounds, trace } => {
            commands::seesaw(&cli.global, &state, n, max_rounds, trace.as_deref())
        }
        Command::Sweep { family, d, from, to, step, n, max_rounds } => {
            commands::sweep(&cli.global, family, d, (from, to, step), n, max_rounds)
        }
        Command::Witness { d, s, n, p, protocol } => commands::witness(&cli.global, d, s, n, p, protocol.as_deref()),
        Command::Vn { d, n } => commands::vn(&cli.global, d, n),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.kind.code())
        }
    }
}
