//! The reset/step loop an external learner would drive, here with random
//! actions. Prints observations and rewards for the first decisions.
//!
//!     cargo run --example gym_loop

use tscbench::env::{EnvConfig, InfoName, RewardName, TscEnv};
use tscbench::fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (net, flows) = fixtures::scenario("arterial1x3").expect("shipped scenario");
    let cfg = EnvConfig {
        obs_spec: vec![InfoName::LaneWaitingCount, InfoName::Pressure, InfoName::Phase],
        reward_spec: RewardName::NegWaitingTime,
        seed: 11,
        ..EnvConfig::default()
    };
    let mut env = TscEnv::new(&net, &flows, cfg)?;
    println!("agents {:?}", env.agent_ids());
    println!("observation sizes {:?}, actions {:?}", env.obs_dims(), env.phase_counts());

    let mut obs = env.reset();
    let mut total = vec![0.0; obs.len()];
    let mut decisions = 0;
    loop {
        let actions = env.sample_action();
        let r = env.step(&actions)?;
        decisions += 1;
        if decisions <= 3 {
            println!("t={:>4} actions {actions:?} rewards {:?}", env.clock(), r.rewards);
            println!("       first obs {:?}", obs[0]);
        }
        total.iter_mut().zip(&r.rewards).for_each(|(t, r)| *t += r);
        obs = r.observations;
        if r.done {
            break;
        }
    }
    let info = env.step_info();
    println!("{decisions} decisions, return per agent {total:?}");
    println!("clock {} queue {} throughput {}", info.clock, info.queue, info.throughput);
    println!("{:?}", env.episode_metrics());
    Ok(())
}
