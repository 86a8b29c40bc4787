//! Trains an agent on the noisy 5x5 gridworld with aggregation switched on,
//! then follows the learned greedy policy once.

use mfec_sa::agent::{self, AgentConfig};
use mfec_sa::envs::{Environment, GridWorld, GridWorldSpec};
use mfec_sa::rng::{self, Stream};
use mfec_sa::{ProjectionMatrix, QecStore, Result};

pub fn run() -> Result<()> {
    let spec = GridWorldSpec::noisy();
    let optimal = spec.optimal_score();
    let mut env = GridWorld::new(spec)?;
    let proj = ProjectionMatrix::new(0, env.obs_dim(), 128)?;
    let mut store = QecStore::new(env.num_actions(), 128, 2048)?;
    let cfg = AgentConfig {
        eps_in: 0.05,
        ..AgentConfig::default()
    };
    let mut rng = rng::seeded(0, Stream::Agent);

    for episode in 0..400u64 {
        let result = agent::run_episode(&mut env, episode, &mut store, &proj, &cfg, &mut rng)?;
        if episode % 50 == 0 {
            println!(
                "episode {episode:>3}: score {} in {} steps, {} entries",
                result.score,
                result.trace.len(),
                store.total_size()
            );
        }
    }

    let greedy = AgentConfig {
        epsilon: 0.0,
        ..cfg
    };
    let mut obs = env.reset(10_000);
    let mut path = vec![env.position()];
    loop {
        let key = proj.embed(&obs)?;
        let action = agent::select_action(&mut store, &key, &greedy, &mut rng)?;
        let step = env.step(action)?;
        path.push(env.position());
        if step.done {
            println!(
                "greedy episode: reward {} (best possible {optimal})",
                step.reward
            );
            break;
        }
        obs = step.observation;
    }
    println!("path: {path:?}");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
