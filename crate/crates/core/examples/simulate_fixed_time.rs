//! Drives the engine directly with a fixed-time plan and prints a metrics
//! trace every five minutes.
//!
//!     cargo run --example simulate_fixed_time [-- SCENARIO]

use tscbench::controllers::{fixed_time_action, FixedTimeConfig};
use tscbench::fixtures;
use tscbench::metrics::MetricsAccumulator;
use tscbench::sim::{Engine, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "grid1x1".into());
    let (net, flows) = fixtures::scenario(&name).ok_or("unknown scenario")?;
    let mut engine = Engine::new(&net, &flows, SimConfig::default())?;
    let mut acc = MetricsAccumulator::new();
    let plan = FixedTimeConfig::default();
    let signals = engine.topology().signalized.clone();

    println!("  time  in_network  finished  blocked  avg_queue");
    while !engine.is_finished() {
        for &i in &signals {
            let k = engine.topology().intersections[i].phase_count();
            engine.set_phase(i, fixed_time_action(engine.clock(), k, &plan))?;
        }
        engine.step()?;
        acc.record_tick(&engine);
        if engine.clock() % 300.0 == 0.0 {
            println!(
                "{:>6} {:>11} {:>9} {:>8} {:>10.2}",
                engine.clock(),
                engine.vehicles_in_network(),
                engine.finished().len(),
                engine.total_blocked(),
                acc.average_queue().unwrap_or(0.0)
            );
        }
    }
    let m = acc.finish(&engine);
    println!(
        "travel time {:.2} s, delay {:.3}, real delay {:.2} s, throughput {}, unfinished {}",
        m.travel_time, m.delay, m.real_delay, m.throughput, m.unfinished
    );
    Ok(())
}
