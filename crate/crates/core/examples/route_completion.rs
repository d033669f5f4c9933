//! Completes origin/destination-only demand into full routes, applies a
//! common yellow interval and shows the result for a few flows.
//!
//!     cargo run --example route_completion

use tscbench::fixtures;
use tscbench::format::{convert_model, ConversionOptions, FormatKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let net = std::fs::read(dir.join("grid4x4.net.xml"))?;
    let od = std::fs::read(dir.join("grid4x4_od.rou.xml"))?;
    let opts = ConversionOptions {
        yellow_time_override: Some(3.0),
        ..ConversionOptions::default()
    };
    let (network, flows) = convert_model(&net, &od, FormatKind::SumoStyleXml, &opts)?;

    let (_, reference) = fixtures::scenario("grid4x4").expect("shipped scenario");
    let same = flows
        .flows
        .iter()
        .filter(|f| reference.flows.iter().any(|r| r.route == f.route))
        .count();
    println!("{} flows completed, {same} match the generator's routes", flows.flows.len());
    for f in flows.flows.iter().take(4) {
        println!("  {}", f.route.join(" -> "));
    }
    let yellow: Vec<f64> = network
        .intersections()
        .iter()
        .filter(|i| !i.is_virtual)
        .map(|i| i.yellow_time)
        .collect();
    println!("yellow intervals: {yellow:?}");
    Ok(())
}
