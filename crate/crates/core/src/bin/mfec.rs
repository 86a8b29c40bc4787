use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfec_sa::harness::{self, ExperimentConfig, Metric, RunArgs};
use mfec_sa::Error;

#[derive(Parser)]
#[command(
    name = "mfec",
    version,
    about = "Episodic control with state aggregation: experiments and inspection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train over several seeds and write per-epoch CSVs and final store snapshots
    Run(Box<RunArgs>),
    /// Render mean curves with standard-error bands from one or more CSVs
    Plot {
        /// avg_score, peak_score or total_size; all three when omitted
        #[arg(long)]
        metric: Option<String>,
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory for the SVG files
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a store snapshot in readable form
    SnapshotDump {
        path: PathBuf,
        /// Entries listed per buffer
        #[arg(long, default_value_t = 10)]
        entries: usize,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = ExperimentConfig::from_run_args(&args)?;
            let report = harness::run_experiment(&cfg)?;
            for row in &report.aggregate {
                println!(
                    "epoch {:>3}  frames {:>9.0}  avg {:>8.3}  peak {:>8.3}  size {:>9.1}",
                    row.epoch,
                    row.frames.mean,
                    row.avg_score.mean,
                    row.peak_score.mean,
                    row.total_size.mean
                );
            }
            println!("wrote {}", report.aggregate_csv.display());
        }
        Command::Plot {
            metric,
            inputs,
            out,
        } => {
            let metrics = match metric {
                Some(m) => vec![m.parse::<Metric>()?],
                None => Metric::ALL.to_vec(),
            };
            for path in harness::emit_plots(&inputs, &out, &metrics)? {
                println!("wrote {}", path.display());
            }
        }
        Command::SnapshotDump { path, entries } => {
            let bytes = std::fs::read(&path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            print!("{}", harness::describe_snapshot(&bytes, entries)?);
        }
    }
    Ok(())
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
