//! FixedTime, SOTL and MaxPressure on the same demand, several seeds.
//!
//!     cargo run --release --example max_pressure_vs_fixed [-- ROWS COLS]

use tscbench::bench::run_classical_episode;
use tscbench::controllers::{Classical, FixedTimeConfig, MaxPressureConfig, SotlConfig};
use tscbench::env::{EnvConfig, TscEnv};
use tscbench::fixtures::{self, DemandProfile, PhasePlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let rows: usize = args.next().map_or(Ok(1), |s| s.parse())?;
    let cols: usize = args.next().map_or(Ok(3), |s| s.parse())?;
    let net = fixtures::grid(rows, cols, PhasePlan::Eight);
    let controllers = [
        Classical::FixedTime(FixedTimeConfig::default()),
        Classical::Sotl(SotlConfig::default()),
        Classical::MaxPressure(MaxPressureConfig::default()),
    ];

    println!("{rows}x{cols} grid, asymmetric demand");
    println!("seed  {:>12} {:>12} {:>12}", "fixedtime", "sotl", "maxpressure");
    for seed in 1..=3 {
        let flows = fixtures::demand(rows, cols, DemandProfile::asymmetric(), seed);
        let mut env = TscEnv::new(&net, &flows, EnvConfig::default())?;
        let mut line = format!("{seed:>4} ");
        for c in &controllers {
            let m = run_classical_episode(&mut env, c)?;
            line.push_str(&format!(" {:>12.2}", m.travel_time));
        }
        println!("{line}");
    }
    Ok(())
}
