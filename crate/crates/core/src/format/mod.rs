//! Reading, writing and converting the two scenario file formats.
//!
//! Both formats describe a scenario with two files: a road network file and a
//! traffic flow file. `cityflow_style_json` follows the CityFlow roadnet/flow
//! JSON layout; `sumo_style_xml` follows the SUMO `.net.xml` / `.rou.xml`
//! layout. Lane ids are always `<road>_<index>` and movement ids
//! `<in_lane>|<out_lane>`; networks using other ids cannot be written.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_flows, validate_network, FlowSet, RoadNetwork, ValidationReport};

pub mod cityflow;
pub mod routing;
pub mod sumo;

pub use routing::complete_routes;

/// Yellow interval used when neither the file nor the options give one.
pub const DEFAULT_YELLOW_TIME: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatKind {
    SumoStyleXml,
    CityflowStyleJson,
}

impl FormatKind {
    pub fn name(self) -> &'static str {
        match self {
            FormatKind::SumoStyleXml => "sumo_style_xml",
            FormatKind::CityflowStyleJson => "cityflow_style_json",
        }
    }

    pub fn network_extension(self) -> &'static str {
        match self {
            FormatKind::SumoStyleXml => "net.xml",
            FormatKind::CityflowStyleJson => "roadnet.json",
        }
    }

    pub fn flow_extension(self) -> &'static str {
        match self {
            FormatKind::SumoStyleXml => "rou.xml",
            FormatKind::CityflowStyleJson => "flow.json",
        }
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormatKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sumo_style_xml" | "sumo" => Ok(FormatKind::SumoStyleXml),
            "cityflow_style_json" | "cityflow" => Ok(FormatKind::CityflowStyleJson),
            other => Err(format!(
                "unknown format `{other}` (expected sumo_style_xml or cityflow_style_json)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionOptions {
    /// Same yellow interval at every signalized intersection.
    pub yellow_time_override: Option<f64>,
    /// Expand origin/destination-only routes into full road sequences.
    pub complete_routes: bool,
    /// Accept unsignalized junctions as virtual nodes. When false, an
    /// unsignalized junction that vehicles pass through is an error.
    pub drop_unsignalized_as_virtual: bool,
    pub sort_departures: bool,
}

impl Default for ConversionOptions {
    fn default() -> Self {
        Self {
            yellow_time_override: None,
            complete_routes: true,
            drop_unsignalized_as_virtual: true,
            sort_departures: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("`{entity}`: {message}")]
    Semantic { entity: String, message: String },
    #[error("cannot be represented in {format}: {feature}")]
    Unrepresentable { format: FormatKind, feature: String },
    #[error("network is invalid:\n{0}")]
    InvalidNetwork(ValidationReport),
    #[error("no intersections")]
    EmptyNetwork,
    #[error("flow_{flow} has an origin/destination-only route; run route completion (complete_routes) first")]
    IncompleteRoute { flow: usize },
    #[error("flow_{flow}: destination road `{to}` is unreachable from `{from}`")]
    Unreachable { flow: usize, from: String, to: String },
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

impl FormatError {
    pub(crate) fn semantic(entity: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Semantic {
            entity: entity.into(),
            message: message.into(),
        }
    }
}

/// Byte offset of a 1-based (line, column) position.
pub(crate) fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (n, l) in text.split_inclusive('\n').enumerate() {
        if n + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

pub(crate) fn utf8(bytes: &[u8]) -> Result<&str, FormatError> {
    std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })
}

/// Turns the first validation issue into a semantic error.
pub(crate) fn require_valid(net: RoadNetwork) -> Result<RoadNetwork, FormatError> {
    let report = validate_network(&net);
    match report.issues.first() {
        None => Ok(net),
        Some(issue) => Err(FormatError::Semantic {
            entity: issue.entity.clone(),
            message: format!("{} ({} issue(s) in total)", issue.detail, report.issues.len()),
        }),
    }
}

pub(crate) fn check_flows(flows: &FlowSet) -> Result<(), FormatError> {
    for (n, flow) in flows.flows.iter().enumerate() {
        flow.check()
            .map_err(|m| FormatError::semantic(format!("flow_{n}"), m))?;
    }
    Ok(())
}

pub fn load_network(kind: FormatKind, text: &[u8]) -> Result<RoadNetwork, FormatError> {
    match kind {
        FormatKind::SumoStyleXml => sumo::load_network(text),
        FormatKind::CityflowStyleJson => cityflow::load_network(text),
    }
}

pub fn load_flows(kind: FormatKind, text: &[u8]) -> Result<FlowSet, FormatError> {
    match kind {
        FormatKind::SumoStyleXml => sumo::load_flows(text),
        FormatKind::CityflowStyleJson => cityflow::load_flows(text),
    }
}

pub fn save_network(kind: FormatKind, net: &RoadNetwork) -> Result<Vec<u8>, FormatError> {
    if net.is_empty() {
        return Err(FormatError::EmptyNetwork);
    }
    let report = validate_network(net);
    if !report.is_empty() {
        return Err(FormatError::InvalidNetwork(report));
    }
    check_canonical_ids(kind, net)?;
    match kind {
        FormatKind::SumoStyleXml => sumo::save_network(net),
        FormatKind::CityflowStyleJson => cityflow::save_network(net),
    }
}

pub fn save_flows(kind: FormatKind, flows: &FlowSet) -> Result<Vec<u8>, FormatError> {
    check_flows(flows)?;
    match kind {
        FormatKind::SumoStyleXml => Ok(sumo::save_flows(&flows.sorted_by_departure())),
        FormatKind::CityflowStyleJson => cityflow::save_flows(flows),
    }
}

pub fn canonical_lane_id(road: &str, index: usize) -> String {
    format!("{road}_{index}")
}

pub fn canonical_movement_id(in_lane: &str, out_lane: &str) -> String {
    format!("{in_lane}|{out_lane}")
}

fn check_canonical_ids(kind: FormatKind, net: &RoadNetwork) -> Result<(), FormatError> {
    for lane in net.lanes() {
        if lane.id != canonical_lane_id(&lane.road, lane.index) {
            return Err(FormatError::Unrepresentable {
                format: kind,
                feature: format!("lane id `{}` is not `<road>_<index>`", lane.id),
            });
        }
    }
    for m in net.movements() {
        if m.id != canonical_movement_id(&m.in_lane, &m.out_lane) {
            return Err(FormatError::Unrepresentable {
                format: kind,
                feature: format!("movement id `{}` is not `<in_lane>|<out_lane>`", m.id),
            });
        }
    }
    Ok(())
}

/// Load, calibrate and re-emit a scenario in another format.
///
/// Calibration: optional route completion, a common yellow interval, virtual
/// nodes for unsignalized junctions and departure-sorted flows. Routes are
/// always static; no dynamic rerouting is ever emitted.
pub fn convert(
    net: &[u8],
    flows: &[u8],
    from: FormatKind,
    to: FormatKind,
    opts: &ConversionOptions,
) -> Result<(Vec<u8>, Vec<u8>), FormatError> {
    let (net, flows) = convert_model(net, flows, from, opts)?;
    Ok((save_network(to, &net)?, save_flows(to, &flows)?))
}

/// The in-memory part of [`convert`]: load and calibrate without emitting.
pub fn convert_model(
    net: &[u8],
    flows: &[u8],
    from: FormatKind,
    opts: &ConversionOptions,
) -> Result<(RoadNetwork, FlowSet), FormatError> {
    if let Some(y) = opts.yellow_time_override {
        if !(y >= 0.0) {
            return Err(FormatError::InvalidOption(format!("yellow time {y} is negative")));
        }
    }
    let mut net = load_network(from, net)?;
    let mut flows = load_flows(from, flows)?;
    if !opts.drop_unsignalized_as_virtual {
        let by_inter = crate::model::movements_by_intersection(&net);
        if let Some(i) = net
            .intersections()
            .iter()
            .find(|i| i.is_virtual && by_inter.contains_key(&i.id))
        {
            return Err(FormatError::semantic(
                &i.id,
                "unsignalized junction with through movements (enable drop_unsignalized_as_virtual)",
            ));
        }
    }
    if opts.complete_routes {
        flows = complete_routes(&net, &flows)?;
    }
    if let Some(y) = opts.yellow_time_override {
        net = net.with_yellow_time(y);
    }
    if opts.sort_departures {
        flows = flows.sorted_by_departure();
    }
    Ok((net, flows))
}

/// Network validation plus demand validation, as printed by `tsc convert`.
pub fn scenario_report(net: &RoadNetwork, flows: &FlowSet) -> ValidationReport {
    validate_network(net).merge(validate_flows(net, flows))
}
