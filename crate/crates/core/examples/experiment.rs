//! A small multi-seed experiment: vanilla MFEC against aggregation on the
//! noisy gridworld, written to CSV and plotted as SVG.
//!
//! Output goes to `$TMPDIR/mfec-example` unless a directory is given:
//! `cargo run --release --example experiment -- out/`

use std::path::PathBuf;

use mfec_sa::harness::{emit_plots, run_experiment, EnvKind, ExperimentConfig, Metric};
use mfec_sa::Result;

pub fn run_in(root: PathBuf) -> Result<()> {
    let mut curves = Vec::new();
    for (name, eps_in) in [("vanilla", 0.0), ("aggregated", 0.05)] {
        let mut cfg = ExperimentConfig {
            env: EnvKind::NoisyGridWorld,
            seeds: vec![0, 1, 2],
            total_frames: 6_000,
            epoch_frames: 1_000,
            out_dir: root.join(name),
            ..ExperimentConfig::default()
        };
        cfg.agent.eps_in = eps_in;
        let report = run_experiment(&cfg)?;
        let last = report.aggregate.last().expect("at least one epoch");
        println!(
            "{name:>10}: final avg score {:.3}, {:.0} entries on average",
            last.avg_score.mean, last.total_size.mean
        );
        curves.push(report.aggregate_csv);
    }
    for path in emit_plots(&curves, &root.join("plots"), &Metric::ALL)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn run() -> Result<()> {
    let root = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mfec-example"));
    run_in(root)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
