//! `preview-synth`: validate problem files, synthesize winning sets and
//! controllers, compare against the no-preview baseline, simulate the
//! closed loop and export sets for plotting.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use preview_synth::spec::Overrides;
use preview_synth::systems::Discretization;

/// Exit status for a successful run.
const OK: u8 = 0;
/// Parse, validation or I/O failure.
const INVALID: u8 = 1;
/// Synthesis stopped at an iteration cap; artifacts are not certified.
const NOT_CERTIFIED: u8 = 2;
/// A simulated run left its safe set.
const UNSAFE: u8 = 3;

#[derive(Parser)]
#[command(name = "preview-synth", version, about = "Safety controller synthesis with switch preview")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Global {
    /// Geometric tolerance, overriding the problem file.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration cap for every fixed point, overriding the problem file.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Random seed, overriding the problem file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Discretization of continuous-time systems.
    #[arg(long, global = true, value_enum)]
    discretization: Option<Method>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Euler,
    Zoh,
}

impl Global {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            max_iters: self.max_iters,
            discretization: self.discretization.map(|m| match m {
                Method::Euler => Discretization::Euler,
                Method::Zoh => Discretization::Zoh,
            }),
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem file and list every problem found.
    Validate {
        /// Problem file, or the name of a bundled one (toy, cruise, lane4d).
        spec: String,
    },
    /// Compute winning sets and the controller certificate.
    Synth {
        spec: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Compare the winning sets with the largest invariant set that ignores
    /// preview.
    Compare { spec: String },
    /// Run the closed loop from winning-set starts.
    Simulate(SimulateArgs),
    /// Write stored winning sets as vertex lists or half-spaces.
    Export(ExportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    spec: String,
    /// Directory written by `synth`.
    #[arg(long)]
    cert_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Start node (1-based) instead of a sampled one; needs `--x0`.
    #[arg(long, requires = "x0")]
    q0: Option<String>,
    /// Start state: a state name, or comma-separated coordinates.
    #[arg(long, requires = "q0")]
    x0: Option<String>,
    /// Accept a start outside the winning set and keep running after the
    /// controller gives up.
    #[arg(long)]
    allow_unsafe_start: bool,
    /// Write every step as a JSON line to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory written by `synth`.
    #[arg(long)]
    cert_dir: PathBuf,
    /// 1-based coordinates to project onto, e.g. `1,2,4`.
    #[arg(long, value_delimiter = ',')]
    project: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Emit half-spaces instead of vertices; works in any dimension.
    #[arg(long)]
    hrep: bool,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Usage errors exit with 1 like any other invalid input; clap's own
    // code 2 means a non-certified synthesis here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INVALID } else { OK });
        }
    };
    let over = cli.global.overrides();
    let result = match cli.command {
        Command::Validate { spec } => commands::validate(&spec),
        Command::Synth { spec, out_dir } => commands::synth(&spec, &out_dir, &over),
        Command::Compare { spec } => commands::compare(&spec, &over),
        Command::Simulate(args) => commands::simulate(&args, &over),
        Command::Export(args) => commands::export(&args, &over),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INVALID)
        }
    }
}
