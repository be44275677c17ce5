use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pprzf::montecarlo::{NuMode, DEFAULT_NU_BATCH};
use pprzf_cli::config::{self, ExperimentSpec, Mode, Objective};
use pprzf_cli::exit;
use pprzf_cli::repro::{reproduce, Figure, ReproOptions, DEFAULT_REPRO_TRIALS};
use pprzf_cli::run::{run, CsvSink, RunError, Units};
use pprzf_cli::validate::{run_suite, write_checks, Suite, ValidateOptions};

#[derive(Parser)]
#[command(
    name = "pprzf",
    version,
    about = "PP-RZF precoding: deterministic equivalents, Monte-Carlo sweeps and validation"
)]
struct Cli {
    /// Worker threads for Monte-Carlo loops.
    #[arg(long, global = true, env = "PPRZF_THREADS")]
    threads: Option<usize>,
    /// Report rates in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config (`section.key = value` lines); defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; overrides `run.output`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Comma-separated SNR grid in dB; overrides `sweep.snr_db`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// How `nu` is estimated for Monte-Carlo rates.
    #[arg(long, value_enum)]
    nu: Option<NuArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum NuArg {
    De,
    Mc,
    PerRealization,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic-equivalent sum-rate over the configured grid.
    DeSweep(SweepArgs),
    /// Deterministic equivalent and Monte-Carlo sum-rate over the grid.
    McSweep(SweepArgs),
    /// Optimal (alpha, beta) per SNR.
    Optimize {
        #[arg(long, value_enum, default_value = "de")]
        objective: Objective,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Run a config file in the mode it names.
    Run(SweepArgs),
    /// Monte-Carlo and closed-form validation suites.
    Validate {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Probe dimension.
        #[arg(long, default_value_t = ValidateOptions::default().n)]
        n: usize,
        #[arg(long, default_value_t = ValidateOptions::default().trials)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Relative tolerance of the Monte-Carlo probes.
        #[arg(long, default_value_t = ValidateOptions::default().tolerance)]
        tolerance: f64,
        /// Also write the checks as CSV.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Regenerate the data behind one figure, one CSV per curve.
    Repro {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Output directory.
        #[arg(long, short, default_value = "repro")]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REPRO_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load(args: &SweepArgs, mode: Option<Mode>) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            config::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(m) = mode {
        spec.mode = m;
    }
    if let Some(snr) = &args.snr {
        spec.snr_grid_db = snr.clone();
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(nu) = args.nu {
        spec.nu = match nu {
            NuArg::De => NuMode::De,
            NuArg::Mc => NuMode::Mc {
                batch: match spec.nu {
                    NuMode::Mc { batch } => batch,
                    _ => DEFAULT_NU_BATCH,
                },
            },
            NuArg::PerRealization => NuMode::PerRealization,
        };
    }
    if let Some(o) = &args.output {
        spec.output_path = o.display().to_string();
    }
    config::validate(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    Ok(spec)
}

fn sweep(spec: &ExperimentSpec, units: Units) -> Result<(), Failure> {
    if spec.mode == Mode::Validate {
        return validate(
            Suite::All,
            &ValidateOptions {
                seed: spec.seed,
                ..ValidateOptions::default()
            },
            None,
        );
    }
    let file = File::create(&spec.output_path)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", spec.output_path)))?;
    let mut sink = CsvSink::new(BufWriter::new(file), units).map_err(RunError::from)?;
    run(spec, &mut sink)?;
    eprintln!("wrote {}", spec.output_path);
    Ok(())
}

fn validate(suite: Suite, o: &ValidateOptions, output: Option<&PathBuf>) -> Result<(), Failure> {
    let checks = run_suite(suite, o).map_err(|e| Failure::Runtime(e.to_string()))?;
    for c in &checks {
        println!(
            "{} {:<13} {:<48} mc={:<14.6e} de={:<14.6e} rel_error={:.2e} (tol {:.0e})",
            if c.pass() { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.mc_value,
            c.de_value,
            c.rel_error,
            c.tolerance
        );
    }
    if let Some(path) = output {
        let file = File::create(path)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))?;
        write_checks(BufWriter::new(file), &checks).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let failed = checks.iter().filter(|c| !c.pass()).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(Failure::Runtime(format!(
            "{failed} validation checks failed"
        )));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }
    let units = if cli.bits { Units::Bits } else { Units::Nats };
    match cli.command {
        Command::DeSweep(a) => sweep(&load(&a, Some(Mode::DeSweep))?, units),
        Command::McSweep(a) => sweep(&load(&a, Some(Mode::McSweep))?, units),
        Command::Optimize {
            objective,
            sweep: a,
        } => {
            let mut spec = load(&a, Some(Mode::Optimize))?;
            spec.objective = objective;
            config::validate(&spec).map_err(|e| Failure::Config(e.to_string()))?;
            sweep(&spec, units)
        }
        Command::Run(a) => {
            if a.config.is_none() {
                return Err(Failure::Config("run: --config is required".into()));
            }
            sweep(&load(&a, None)?, units)
        }
        Command::Validate {
            suite,
            n,
            trials,
            seed,
            tolerance,
            output,
        } => {
            if n < 8 || trials == 0 {
                return Err(Failure::Config(
                    "validate: need --n >= 8 and --trials >= 1".into(),
                ));
            }
            validate(
                suite,
                &ValidateOptions {
                    n,
                    trials,
                    seed,
                    tolerance,
                },
                output.as_ref(),
            )
        }
        Command::Repro {
            figure,
            output,
            trials,
            seed,
        } => {
            if trials < 2 {
                return Err(Failure::Config("repro: --trials must be at least 2".into()));
            }
            let written = reproduce(
                figure,
                &output,
                &ReproOptions {
                    trials,
                    seed,
                    units,
                },
            )?;
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(exit::CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(exit::FAILURE)
        }
    }
}
