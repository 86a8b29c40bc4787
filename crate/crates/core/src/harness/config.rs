use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;

use crate::agent::AgentConfig;
use crate::envs::DEFAULT_NOISE_AMPLITUDE;
use crate::error::{Error, Result};
use crate::store::UNLIMITED_CAPACITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    GridWorld,
    NoisyGridWorld,
    Scroller,
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gridworld" => Ok(EnvKind::GridWorld),
            "noisy-gridworld" => Ok(EnvKind::NoisyGridWorld),
            "scroller" => Ok(EnvKind::Scroller),
            other => Err(format!(
                "unknown environment `{other}` (expected gridworld, noisy-gridworld or scroller)"
            )),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::GridWorld => "gridworld",
            EnvKind::NoisyGridWorld => "noisy-gridworld",
            EnvKind::Scroller => "scroller",
        })
    }
}

/// Everything needed to reproduce one experiment.
///
/// | key            | default            | meaning                                          |
/// |----------------|--------------------|--------------------------------------------------|
/// | `env`          | `gridworld`        | `gridworld`, `noisy-gridworld` or `scroller`     |
/// | `noise`        | `0.0005`           | noise half-width of `noisy-gridworld`            |
/// | `eps-in`       | `0`                | input threshold (0 = plain MFEC)                 |
/// | `eps-out`      | `100`              | output threshold                                 |
/// | `k`            | `11`               | neighbour budget                                 |
/// | `epsilon`      | `0.005`            | exploration rate                                 |
/// | `gamma`        | `1`                | discount                                         |
/// | `seeds`        | `0,1,2,3,4`        | comma list, `a..b` or `a..=b`; `seed` sets one   |
/// | `total-frames` | `200000`           | environment steps per seed                       |
/// | `epoch-frames` | `10000`            | steps per reporting epoch                        |
/// | `capacity`     | `2048`             | entries per action buffer, or `unlimited`        |
/// | `proj-dim`     | `128`              | embedded key dimension                           |
/// | `proj-seed`    | `run`              | projection seed; `run` reuses each run's seed    |
/// | `out-dir`      | `results`          | where CSVs and snapshots are written             |
///
/// `unlimited` capacity is stored as `u32::MAX` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub noise: f64,
    /// `seed` is ignored here; every run uses its own seed.
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    pub total_frames: u64,
    pub epoch_frames: u64,
    pub capacity: usize,
    pub proj_dim: usize,
    pub proj_seed: Option<u64>,
    pub out_dir: PathBuf,
}

pub const DEFAULT_CAPACITY: usize = 2048;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvKind::GridWorld,
            noise: DEFAULT_NOISE_AMPLITUDE,
            agent: AgentConfig::default(),
            seeds: (0..5).collect(),
            total_frames: 200_000,
            epoch_frames: 10_000,
            capacity: DEFAULT_CAPACITY,
            proj_dim: 128,
            proj_seed: None,
            out_dir: PathBuf::from("results"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>> {
    let value = value.trim();
    let seeds: Vec<u64> = if let Some((lo, hi)) = value.split_once("..=") {
        (parse_num(key, lo)?..=parse_num(key, hi)?).collect()
    } else if let Some((lo, hi)) = value.split_once("..") {
        (parse_num(key, lo)?..parse_num(key, hi)?).collect()
    } else {
        value
            .split(',')
            .map(|s| parse_num(key, s))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::config(key, "seed list is empty"));
    }
    Ok(seeds)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting. Keys are the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "env" => {
                self.env = value
                    .trim()
                    .parse()
                    .map_err(|e: String| Error::config(key, e))?
            }
            "noise" => self.noise = parse_num(key, value)?,
            "eps-in" => self.agent.eps_in = parse_num(key, value)?,
            "eps-out" => self.agent.eps_out = parse_num(key, value)?,
            "k" => self.agent.k = parse_num(key, value)?,
            "epsilon" => self.agent.epsilon = parse_num(key, value)?,
            "gamma" => self.agent.gamma = parse_num(key, value)?,
            "seed" => self.seeds = vec![parse_num(key, value)?],
            "seeds" => self.seeds = parse_seeds(key, value)?,
            "total-frames" => self.total_frames = parse_num(key, value)?,
            "epoch-frames" => self.epoch_frames = parse_num(key, value)?,
            "capacity" => {
                self.capacity = match value.trim() {
                    "unlimited" => UNLIMITED_CAPACITY,
                    v => parse_num(key, v)?,
                }
            }
            "proj-dim" => self.proj_dim = parse_num(key, value)?,
            "proj-seed" => {
                self.proj_seed = match value.trim() {
                    "run" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "out-dir" => self.out_dir = PathBuf::from(value.trim()),
            other => return Err(Error::config(other, "unknown configuration key")),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {} is not of the form key=value", n + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.epoch_frames == 0 {
            return Err(Error::config("epoch-frames", "must be at least 1"));
        }
        // A zero budget is a valid degenerate run that produces no epochs.
        if self.total_frames > 0 && self.epoch_frames > self.total_frames {
            return Err(Error::config(
                "epoch-frames",
                format!(
                    "{} exceeds total-frames {}",
                    self.epoch_frames, self.total_frames
                ),
            ));
        }
        if self.capacity == 0 || self.capacity > UNLIMITED_CAPACITY {
            return Err(Error::config(
                "capacity",
                "must be between 1 and 4294967295",
            ));
        }
        if self.proj_dim == 0 || self.proj_dim > u32::MAX as usize {
            return Err(Error::config(
                "proj-dim",
                "must be between 1 and 4294967295",
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::config("noise", "must be a non-negative number"));
        }
        Ok(())
    }

    /// Defaults, then the optional `--config` file, then explicit flags.
    pub fn from_run_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_file_text(&text)?;
        }
        for (key, value) in args.pairs() {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed_csv_path(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!("seed-{seed}.csv"))
    }

    pub fn snapshot_path(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!("seed-{seed}.store"))
    }

    pub fn aggregate_csv_path(&self) -> PathBuf {
        self.out_dir.join("aggregate.csv")
    }

    pub fn timing_csv_path(&self) -> PathBuf {
        self.out_dir.join("timing.csv")
    }
}

/// Flags of `mfec run`. Values stay strings until [`ExperimentConfig::set`]
/// parses them, so file and flag errors read the same.
#[derive(Clone, Debug, Default, Parser)]
#[command(
    name = "run",
    about = "Train agents over several seeds and write per-epoch metrics"
)]
pub struct RunArgs {
    /// gridworld, noisy-gridworld or scroller
    #[arg(long)]
    pub env: Option<String>,
    /// Noise half-width of noisy-gridworld
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long = "eps-in")]
    pub eps_in: Option<String>,
    #[arg(long = "eps-out")]
    pub eps_out: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Run a single seed
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<String>,
    /// Comma list or range, e.g. 0,1,2 or 0..5
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long = "total-frames")]
    pub total_frames: Option<String>,
    #[arg(long = "epoch-frames")]
    pub epoch_frames: Option<String>,
    /// Entries per action buffer, or `unlimited`
    #[arg(long)]
    pub capacity: Option<String>,
    #[arg(long = "proj-dim")]
    pub proj_dim: Option<String>,
    /// Projection seed, or `run` to reuse each run's seed
    #[arg(long = "proj-seed")]
    pub proj_seed: Option<String>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<String>,
    /// Flat key=value file; keys are the flag names without leading dashes
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    fn pairs(&self) -> impl Iterator<Item = (&'static str, &str)> {
        [
            ("env", &self.env),
            ("noise", &self.noise),
            ("eps-in", &self.eps_in),
            ("eps-out", &self.eps_out),
            ("k", &self.k),
            ("epsilon", &self.epsilon),
            ("gamma", &self.gamma),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("total-frames", &self.total_frames),
            ("epoch-frames", &self.epoch_frames),
            ("capacity", &self.capacity),
            ("proj-dim", &self.proj_dim),
            ("proj-seed", &self.proj_seed),
            ("out-dir", &self.out_dir),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
    }
}

/// Parses `run` flags (without the program or subcommand name) into a validated config.
pub fn parse_config<I, S>(args: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv =
        std::iter::once(std::ffi::OsString::from("run")).chain(args.into_iter().map(Into::into));
    let run =
        RunArgs::try_parse_from(argv).map_err(|e| Error::config("arguments", e.to_string()))?;
    ExperimentConfig::from_run_args(&run)
}
