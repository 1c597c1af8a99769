use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncap_cli::{exit, reference_report, run_experiment, validate_config, CellStatus, ExperimentConfig};
use ncap_core::ChannelSpec;

#[derive(Parser)]
#[command(name = "ncap", version, about = "Neural channel-capacity estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Check a config and print it with defaults filled in.
    Validate { config: PathBuf },
    /// Print closed-form, Blahut–Arimoto and published reference values.
    Reference {
        /// awgn, optical or peak_awgn
        channel: String,
        snr_db: f64,
        #[arg(long, default_value_t = 1.0)]
        noise_variance: f64,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    validate_config(&raw).map_err(|e| format!("{}: {e}", path.display()))
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(c) => {
                println!("{}: ok, {} cells", config.display(), c.num_cells());
                for d in &c.defaults_applied {
                    println!("  default {d}");
                }
                code(exit::OK)
            }
            Err(e) => {
                eprintln!("{e}");
                code(exit::CONFIG)
            }
        },
        Command::Run {
            config,
            seed,
            out_dir,
            rounds,
        } => {
            let mut c = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return code(exit::CONFIG);
                }
            };
            c.apply_overrides(seed, rounds, out_dir);
            if let Err(e) = c.estimators.iter().try_for_each(|e| e.train.validate()) {
                eprintln!("{}: {e}", config.display());
                return code(exit::CONFIG);
            }
            match run_experiment(&c) {
                Ok(s) => {
                    for cell in &s.cells {
                        match &cell.status {
                            CellStatus::Completed { mean, variance, .. } => {
                                println!("{:<32} {mean:.4} nats (var {variance:.2e})", cell.name)
                            }
                            CellStatus::Failed { error } => println!("{:<32} FAILED: {error}", cell.name),
                        }
                    }
                    println!("results in {}", c.outputs.dir.display());
                    code(s.exit_code)
                }
                Err(e) => {
                    eprintln!("cannot write results: {e}");
                    code(exit::TOTAL)
                }
            }
        }
        Command::Reference {
            channel,
            snr_db,
            noise_variance,
        } => {
            let ch = channel
                .parse()
                .and_then(|kind| ChannelSpec::new(kind, noise_variance));
            match ch {
                Ok(ch) => {
                    print!("{}", reference_report(&ch, snr_db));
                    code(exit::OK)
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(exit::CONFIG)
                }
            }
        }
    }
}
