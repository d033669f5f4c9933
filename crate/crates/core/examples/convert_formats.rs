//! Converts a shipped fixture from the JSON format to the XML format and back,
//! then checks nothing was lost on the way.
//!
//!     cargo run --example convert_formats [-- SCENARIO]

use tscbench::format::{convert, convert_model, ConversionOptions, FormatKind};
use tscbench::model::validate_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "arterial1x3".into());
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let net = std::fs::read(dir.join(format!("{name}.roadnet.json")))?;
    let flows = std::fs::read(dir.join(format!("{name}.flow.json")))?;

    let json = FormatKind::CityflowStyleJson;
    let xml = FormatKind::SumoStyleXml;
    let opts = ConversionOptions::default();
    let (net_xml, flow_xml) = convert(&net, &flows, json, xml, &opts)?;
    println!("{name}: {} bytes of network XML, {} bytes of route XML", net_xml.len(), flow_xml.len());

    let (net_json, flow_json) = convert(&net_xml, &flow_xml, xml, json, &opts)?;
    let (original, original_flows) = convert_model(&net, &flows, json, &opts)?;
    let (back, back_flows) = convert_model(&net_json, &flow_json, json, &opts)?;
    println!("network preserved: {}", back == original);
    println!("flows preserved:   {}", back_flows == original_flows);
    println!("validation: {}", validate_network(&back));
    Ok(())
}
