use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use cfmimo_cli::{run_experiment, CliError, ExperimentKind, ExperimentSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Cell-free massive MIMO ISAC link-level experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize pilots and write the objective trace of every trial.
    DesignPilots(RunArgs),
    /// Per-user rates (rates_cdf) or median sweeps (median_vs_tau, median_vs_k).
    Rates(RunArgs),
    /// Bit error rate versus SNR (ber_sweep) or versus K/tau (ber_vs_ratio).
    Ber(RunArgs),
    /// Averaged normalized autocorrelation sidelobes.
    Acf(RunArgs),
    /// Matched-filter range profile of a multi-target scene.
    RangeProfile(RunArgs),
    /// Print the full configuration with defaults filled in.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent trials (drops, sequences or noise draws).
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme to run; repeat for several.
    #[arg(long = "scheme")]
    schemes: Vec<String>,
    /// Experiment kind within the subcommand's family.
    #[arg(long)]
    kind: Option<ExperimentKind>,
}

fn load(path: &Option<PathBuf>) -> Result<ExperimentSpec, CliError> {
    match path {
        Some(p) => ExperimentSpec::load(p),
        None => Ok(ExperimentSpec::default()),
    }
}

fn run(args: RunArgs, family: &[ExperimentKind]) -> Result<(), CliError> {
    let mut spec = load(&args.config)?;
    if let Some(k) = args.kind {
        spec.kind = k;
    }
    if !family.contains(&spec.kind) {
        if args.kind.is_some() {
            return Err(CliError::Invalid(format!("kind {} does not belong to this subcommand", spec.kind.name())));
        }
        spec.kind = family[0];
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if args.out.is_some() {
        spec.out = args.out;
    }
    if !args.schemes.is_empty() {
        spec.schemes = args.schemes;
    }
    spec.validate()?;
    let table = run_experiment(&spec)?;
    match &spec.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            table.write_csv(BufWriter::new(f))
        }
        None => table.write_csv(io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    use ExperimentKind::*;
    let cli = Cli::parse();
    let res = match cli.command {
        Command::DesignPilots(a) => run(a, &[Design]),
        Command::Rates(a) => run(a, &[RatesCdf, MedianVsTau, MedianVsK]),
        Command::Ber(a) => run(a, &[BerSweep, BerVsRatio]),
        Command::Acf(a) => run(a, &[AcfProfile]),
        Command::RangeProfile(a) => run(a, &[RangeProfile]),
        Command::PrintConfig { config } => load(&config).map(|s| print!("{}", s.emit())),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
