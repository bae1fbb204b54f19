use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use clamped_plate::report::{run, ExperimentSpec, Mode};
use clamped_plate::{Domain, Error};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    UniformMorley,
    UniformBfs,
    AdaptiveMorley,
    Verify,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Square,
    Lshape,
}

/// Clamped-plate vibration eigenvalues: Morley lower bounds, BFS upper bounds,
/// adaptive Morley refinement.
#[derive(Debug, Parser)]
#[command(name = "plate-eig", version)]
struct Cli {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "lshape")]
    domain: DomainArg,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Uniform levels, h = √2/4, √2/8, …
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    max_dof: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    /// Eigenpair driving the adaptive estimator.
    #[arg(long, default_value_t = 1)]
    eig_index: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Per-iteration mesh dumps, written as <stem>_<iter>.<ext>.
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
    /// CSV trace to check (verify mode).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Upper-bound CSV for the bracket check (verify mode).
    #[arg(long)]
    bfs: Option<PathBuf>,
    /// Rows used for the η² slope fit (verify mode).
    #[arg(long)]
    window: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.mode {
        ModeArg::UniformMorley => Mode::UniformMorley,
        ModeArg::UniformBfs => Mode::UniformBfs,
        ModeArg::AdaptiveMorley => Mode::AdaptiveMorley,
        ModeArg::Verify => Mode::Verify,
    };
    let domain = match cli.domain {
        DomainArg::Square => Domain::Square,
        DomainArg::Lshape => Domain::LShape,
    };
    let mut spec = ExperimentSpec::new(mode, domain);
    spec.tau = cli.tau;
    spec.levels = cli.levels;
    spec.max_dof = cli.max_dof;
    spec.theta = cli.theta;
    spec.target = cli.eig_index;
    spec.k = cli.k;
    spec.out = cli.out;
    spec.seed = cli.seed;
    spec.dump_mesh = cli.dump_mesh;
    spec.input = cli.input;
    spec.upper = cli.bfs;
    spec.window = cli.window;

    if let Err(e) = spec.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if cli.threads == 0 {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let mut stdout = std::io::stdout().lock();
    match run(&spec, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
