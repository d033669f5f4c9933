//! Trains independent DQN agents on a fixture and prints the greedy
//! evaluation after every episode.
//!
//!     cargo run --release --example train_idqn -- [SCENARIO] [EPISODES] [SEED]

use tscbench::agent::{build_agents, run_training, DqnConfig};
use tscbench::env::{EnvConfig, TscEnv};
use tscbench::fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().unwrap_or_else(|| "grid1x1".into());
    let episodes: usize = args.next().map_or(Ok(200), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;

    let (net, flows) = fixtures::scenario(&scenario).ok_or("unknown scenario")?;
    let mut env = TscEnv::new(&net, &flows, EnvConfig::default())?;
    let cfg = DqnConfig {
        episodes,
        ..DqnConfig::default()
    };
    let mut agents = build_agents(&env, &cfg, seed)?;
    println!("{} agents, observation sizes {:?}", agents.len(), env.obs_dims());
    println!("episode  travel_time   queue  throughput  epsilon    loss");
    run_training(&mut env, &mut agents, cfg.episodes, |log, _| {
        let m = &log.metrics;
        println!(
            "{:>7} {:>12.2} {:>7.2} {:>11} {:>8.4} {:>7.3}",
            log.episode, m.travel_time, m.queue, m.throughput, log.epsilon, log.mean_loss
        );
        Ok(())
    })?;
    Ok(())
}
