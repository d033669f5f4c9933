//! Regenerates the scenario files under `fixtures/` in both formats.
//!
//!     cargo run --example generate_fixtures [-- OUT_DIR]

use std::path::PathBuf;

use tscbench::fixtures;
use tscbench::format::{save_flows, save_network, FormatKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&out)?;
    for name in fixtures::SCENARIOS {
        let (net, flows) = fixtures::scenario(name).expect("known scenario");
        for kind in [FormatKind::CityflowStyleJson, FormatKind::SumoStyleXml] {
            let net_path = out.join(format!("{name}.{}", kind.network_extension()));
            let flow_path = out.join(format!("{name}.{}", kind.flow_extension()));
            std::fs::write(&net_path, save_network(kind, &net)?)?;
            std::fs::write(&flow_path, save_flows(kind, &flows)?)?;
            println!("{} + {}", net_path.display(), flow_path.display());
        }
        println!(
            "  {name}: {} intersections, {} roads, {} flows",
            net.intersections().len(),
            net.roads().len(),
            flows.flows.len()
        );
    }
    // origin/destination-only demand, for exercising route completion
    let (_, flows) = fixtures::scenario("grid4x4").expect("known scenario");
    let od = fixtures::origin_destination_only(&flows);
    let path = out.join("grid4x4_od.rou.xml");
    std::fs::write(&path, save_flows(FormatKind::SumoStyleXml, &od)?)?;
    println!("{}", path.display());
    Ok(())
}
