//! Runs each classical agent through the benchmark runner, writes the usual
//! result directories and ranks them.
//!
//!     cargo run --release --example compare_agents [-- OUT_DIR]

use std::path::PathBuf;

use tscbench::bench::{compare, run_experiment, write_run, AgentKind, ExperimentConfig, ExperimentSection};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tsc-compare"));
    let mut summaries = Vec::new();
    for agent in [AgentKind::Fixedtime, AgentKind::Sotl, AgentKind::Maxpressure] {
        let cfg = ExperimentConfig {
            experiment: ExperimentSection {
                agent,
                seed: 1,
                scenario: Some("arterial1x3".into()),
                ..ExperimentSection::default()
            },
            ..ExperimentConfig::default()
        };
        let scenario = cfg.load_scenario()?;
        let result = run_experiment(&cfg, &scenario, None)?;
        let dir = out.join(agent.name());
        write_run(&dir, &cfg, &result)?;
        println!("{} -> {}", agent.name(), dir.display());
        summaries.push(result.summary);
    }
    print!("{}", compare(&summaries)?);
    Ok(())
}
