//! Learns to dodge obstacles in the scroller, and shows why aggregation buys
//! little there: distinct observations are far apart in key space.

use mfec_sa::agent::{self, AgentConfig};
use mfec_sa::envs::{Environment, Scroller, ScrollerSpec};
use mfec_sa::rng::{self, Stream};
use mfec_sa::{ProjectionMatrix, QecStore, Result};

fn train(eps_in: f64) -> Result<(f64, usize)> {
    let mut env = Scroller::new(ScrollerSpec::default())?;
    let proj = ProjectionMatrix::new(0, env.obs_dim(), 128)?;
    let mut store = QecStore::new(env.num_actions(), 128, 2048)?;
    let cfg = AgentConfig {
        eps_in,
        ..AgentConfig::default()
    };
    let mut rng = rng::seeded(0, Stream::Agent);
    let mut last = Vec::new();
    for episode in 0..300u64 {
        let result = agent::run_episode(&mut env, episode, &mut store, &proj, &cfg, &mut rng)?;
        if episode >= 250 {
            last.push(result.score);
        }
    }
    let avg = last.iter().sum::<f64>() / last.len() as f64;
    Ok((avg, store.total_size()))
}

pub fn run() -> Result<()> {
    let env = Scroller::new(ScrollerSpec::default())?;
    println!(
        "corridor {} rows x {} columns, start column {}",
        env.spec().length,
        env.spec().width,
        env.start_column()
    );
    for row in env.obstacles().iter().take(8) {
        let line: String = row.iter().map(|&o| if o { '#' } else { '.' }).collect();
        println!("  {line}");
    }
    println!("  ...");

    for eps_in in [0.0, 0.05] {
        let (avg, size) = train(eps_in)?;
        println!(
            "eps_in {eps_in}: average score over the last 50 episodes {avg:.2}, {size} entries"
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
