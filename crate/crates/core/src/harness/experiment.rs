use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use crate::agent::{self, AgentConfig, EpisodeResult};
use crate::embedding::ProjectionMatrix;
use crate::envs::{Environment, GridWorld, GridWorldSpec, Scroller, ScrollerSpec};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::store::QecStore;

use super::config::{EnvKind, ExperimentConfig};
use super::csv_out::{self, AggregateRow};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub seed: u64,
    pub epoch: usize,
    /// Cumulative environment steps at the end of this epoch.
    pub frames: u64,
    /// Episodes that ended in this epoch.
    pub episodes: usize,
    pub avg_score: f64,
    pub peak_score: f64,
    pub total_size: usize,
    pub buffer_sizes: Vec<usize>,
    pub wall_clock_secs: f64,
}

/// One seed's training run.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    /// Step count of every episode, in order.
    pub episode_lengths: Vec<usize>,
    pub store: QecStore,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<AggregateRow>,
    pub seed_csvs: Vec<PathBuf>,
    pub snapshots: Vec<PathBuf>,
    pub aggregate_csv: PathBuf,
}

fn build_env(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match cfg.env {
        EnvKind::GridWorld => Box::new(GridWorld::new(GridWorldSpec::default())?),
        EnvKind::NoisyGridWorld => Box::new(GridWorld::new(GridWorldSpec {
            noise: cfg.noise,
            ..GridWorldSpec::default()
        })?),
        EnvKind::Scroller => Box::new(Scroller::new(ScrollerSpec {
            layout_seed: seed,
            ..ScrollerSpec::default()
        })?),
    })
}

/// Trains a fresh agent for one seed. Does no I/O.
///
/// Epochs close at the first episode end once the epoch holds at least
/// `epoch_frames` steps, or once the whole budget is spent; the last epoch
/// may therefore be shorter.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    cfg.validate()?;
    let mut env = build_env(cfg, seed)?;
    let proj = ProjectionMatrix::new(cfg.proj_seed.unwrap_or(seed), env.obs_dim(), cfg.proj_dim)?;
    let mut store = QecStore::new(env.num_actions(), cfg.proj_dim, cfg.capacity)?;
    let agent_cfg = AgentConfig {
        seed,
        ..cfg.agent.clone()
    };
    let mut rng = rng::seeded(seed, Stream::Agent);

    let mut records = Vec::new();
    let mut episode_lengths = Vec::new();
    let mut frames = 0u64;
    while frames < cfg.total_frames {
        let started = Instant::now();
        let mut epoch_frames = 0u64;
        let mut scores = Vec::new();
        while epoch_frames < cfg.epoch_frames && frames < cfg.total_frames {
            let episode_seed = rng::mix_seed(seed, episode_lengths.len() as u64);
            let EpisodeResult { trace, score, .. } = agent::run_episode(
                env.as_mut(),
                episode_seed,
                &mut store,
                &proj,
                &agent_cfg,
                &mut rng,
            )?;
            frames += trace.len() as u64;
            epoch_frames += trace.len() as u64;
            episode_lengths.push(trace.len());
            scores.push(score);
        }
        records.push(EpochRecord {
            seed,
            epoch: records.len(),
            frames,
            episodes: scores.len(),
            avg_score: scores.iter().sum::<f64>() / scores.len() as f64,
            peak_score: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            total_size: store.total_size(),
            buffer_sizes: store.buffer_sizes(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        });
    }
    Ok(SeedRun {
        seed,
        records,
        episode_lengths,
        store,
    })
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Runs every seed and writes `seed-<s>.csv`, `seed-<s>.store` (final store
/// snapshot), `aggregate.csv` and `timing.csv` into the output directory.
///
/// All output files are created before the first episode, so an unwritable
/// directory fails fast. Wall-clock times live only in `timing.csv`, which
/// keeps the metric files byte-identical across reruns.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let seed_csvs: Vec<PathBuf> = cfg.seeds.iter().map(|&s| cfg.seed_csv_path(s)).collect();
    let snapshots: Vec<PathBuf> = cfg.seeds.iter().map(|&s| cfg.snapshot_path(s)).collect();
    let aggregate_csv = cfg.aggregate_csv_path();
    let timing_csv = cfg.timing_csv_path();
    let mut seed_files = seed_csvs.iter().map(create).collect::<Result<Vec<_>>>()?;
    let mut snapshot_files = snapshots.iter().map(create).collect::<Result<Vec<_>>>()?;
    let aggregate_file = create(&aggregate_csv)?;
    let mut timing_file = create(&timing_csv)?;

    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for (i, &seed) in cfg.seeds.iter().enumerate() {
        let run = run_seed(cfg, seed)?;
        let path = seed_csvs[i].display().to_string();
        csv_out::write_seed_csv(&mut seed_files[i], &path, &run.records)?;
        std::io::Write::write_all(&mut snapshot_files[i], &run.store.snapshot())
            .and_then(|_| std::io::Write::flush(&mut snapshot_files[i]))
            .map_err(|e| Error::io(&snapshots[i], e))?;
        runs.push(run);
    }

    let per_seed: Vec<Vec<EpochRecord>> = runs.iter().map(|r| r.records.clone()).collect();
    let aggregate = csv_out::aggregate(&per_seed);
    csv_out::write_aggregate_csv(
        aggregate_file,
        &aggregate_csv.display().to_string(),
        &aggregate,
    )?;

    let mut timing = String::from("seed,epoch,wall_clock_secs\n");
    for r in runs.iter().flat_map(|r| &r.records) {
        timing.push_str(&format!(
            "{},{},{}\n",
            r.seed,
            r.epoch,
            csv_out::format_real(r.wall_clock_secs)
        ));
    }
    std::io::Write::write_all(&mut timing_file, timing.as_bytes())
        .and_then(|_| std::io::Write::flush(&mut timing_file))
        .map_err(|e| Error::io(&timing_csv, e))?;

    Ok(ExperimentReport {
        runs,
        aggregate,
        seed_csvs,
        snapshots,
        aggregate_csv,
    })
}
