use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morsedyn::commands::{self, AnalyzeInput, Overrides};
use morsedyn::CliError;

/// Morse-graph analysis of training dynamics sampled as (initial, final) weight pairs.
#[derive(Parser)]
#[command(name = "morsedyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Base seed of the ensemble (overrides ensemble.base_seed).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the ensemble and write records, summary and entropies.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build the outer approximation and Morse decomposition.
    Analyze {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ensemble records (JSON Lines) from `train` or an external trainer.
        #[arg(long, group = "input")]
        records: Option<PathBuf>,
        /// Sample pairs as CSV (x1..xd, y1..yd).
        #[arg(long, group = "input")]
        pairs: Option<PathBuf>,
        /// Bundled analytic system: contraction, double-well or saddle.
        #[arg(long, group = "input")]
        system: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-serialize a morse.json file to standard output.
    Export {
        /// Path of a morse.json artifact.
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
    },
    /// Train then analyze in one run.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check a config file and print it with defaults filled in.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
    Csv,
}

fn main() -> ExitCode {
    // Bad arguments are validation errors (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Train { config, common } => {
            let (out, _) = commands::train(&config, &common.overrides())?;
            let s = &out.summary;
            println!(
                "trained {} cycles ({} diverged): balanced accuracy {:.4} +/- {:.4}, entropy {:.3}..{:.3} bits",
                s.cycles,
                s.diverged,
                s.mean_balanced_accuracy,
                s.std_balanced_accuracy,
                s.min_entropy_bits,
                s.max_entropy_bits
            );
        }
        Command::Analyze {
            config,
            records,
            pairs,
            system,
            common,
        } => {
            let input = match (records, pairs, system) {
                (Some(r), None, None) => AnalyzeInput::Records(r),
                (None, Some(p), None) => AnalyzeInput::Pairs(p),
                (None, None, Some(s)) => AnalyzeInput::System(s),
                _ => {
                    return Err(CliError::Validation(
                        "analyze needs exactly one of --records, --pairs or --system".into(),
                    ))
                }
            };
            let (a, _) = commands::analyze(config.as_deref(), &input, &common.overrides())?;
            print_report(&a);
        }
        Command::Export { input, format } => {
            let name = match format {
                Format::Dot => "dot",
                Format::Json => "json",
                Format::Csv => "csv",
            };
            print!("{}", commands::export(&input, name)?);
        }
        Command::Pipeline { config, common } => {
            let (a, _) = commands::pipeline(&config, &common.overrides())?;
            print_report(&a);
        }
        Command::ValidateConfig { config, common } => {
            print!("{}", commands::validate_config(&config, &common.overrides())?);
        }
    }
    Ok(())
}

fn print_report(a: &morsedyn::run::Analysis) {
    let r = &a.report;
    println!(
        "{} leaves, {} Morse nodes ({} minimal), retraction {}",
        r.leaves,
        r.morse_nodes,
        r.minimal_nodes.len(),
        if r.retraction_present { "present" } else { "absent" }
    );
}
