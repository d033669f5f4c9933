//! SUMO-style XML networks (`<net>`) and route files (`<routes>`).
//!
//! A junction is signalized iff a `<tlLogic>` with its id exists. Every
//! connection controlled by that program has a `linkIndex` into the phase
//! `state` strings; a phase containing `G`/`g` is a green phase of the model,
//! a phase with only `y`/`r` is the yellow interlude. Internal (`:`-prefixed)
//! edges and connections are skipped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use log::warn;
use roxmltree::{Document, Node};

use super::{
    canonical_lane_id, canonical_movement_id, check_flows, require_valid, utf8, FormatError,
    DEFAULT_YELLOW_TIME,
};
use crate::model::{
    movements_by_intersection, FlowSet, FlowSpec, Intersection, Lane, Movement, Phase, Point, Road,
    RoadNetwork, RouteKind, TurnKind, VehicleParams,
};

const GREEN_PHASE_TIME: f64 = 30.0;
const DEFAULT_FLOW_END: f64 = 3600.0;

fn parse(text: &[u8]) -> Result<(&str, Document<'_>), FormatError> {
    let s = utf8(text)?;
    let doc = Document::parse(s).map_err(|e| {
        let pos = e.pos();
        FormatError::Syntax {
            offset: super::byte_offset(s, pos.row as usize, pos.col as usize),
            message: e.to_string(),
        }
    })?;
    Ok((s, doc))
}

fn attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, FormatError> {
    node.attribute(name).ok_or_else(|| {
        FormatError::semantic(
            node.attribute("id").unwrap_or(node.tag_name().name()),
            format!("missing attribute `{name}`"),
        )
    })
}

fn num(node: Node<'_, '_>, name: &str) -> Result<f64, FormatError> {
    let raw = attr(node, name)?;
    raw.trim().parse::<f64>().map_err(|_| {
        FormatError::semantic(
            node.attribute("id").unwrap_or(node.tag_name().name()),
            format!("attribute `{name}` is not a number: `{raw}`"),
        )
    })
}

fn opt_num(node: Node<'_, '_>, name: &str) -> Result<Option<f64>, FormatError> {
    match node.attribute(name) {
        None => Ok(None),
        Some(_) => num(node, name).map(Some),
    }
}

fn opt_index(node: Node<'_, '_>, name: &str) -> Result<usize, FormatError> {
    let raw = attr(node, name)?;
    raw.trim().parse::<usize>().map_err(|_| {
        FormatError::semantic(
            node.attribute("id").unwrap_or(node.tag_name().name()),
            format!("attribute `{name}` is not an index: `{raw}`"),
        )
    })
}

fn param<'a>(node: Node<'a, '_>, key: &str) -> Option<&'a str> {
    node.children()
        .filter(|c| c.has_tag_name("param"))
        .find(|c| c.attribute("key") == Some(key))
        .and_then(|c| c.attribute("value"))
}

fn param_num(node: Node<'_, '_>, key: &str) -> Result<Option<f64>, FormatError> {
    match param(node, key) {
        None => Ok(None),
        Some(v) => v.trim().parse::<f64>().map(Some).map_err(|_| {
            FormatError::semantic(
                node.attribute("id").unwrap_or(""),
                format!("param `{key}` is not a number: `{v}`"),
            )
        }),
    }
}

fn turn_from_dir(dir: &str) -> TurnKind {
    match dir {
        "l" | "L" | "t" => TurnKind::Left,
        "r" | "R" => TurnKind::Right,
        _ => TurnKind::Straight,
    }
}

fn dir_from_turn(turn: TurnKind) -> &'static str {
    match turn {
        TurnKind::Left => "l",
        TurnKind::Straight => "s",
        TurnKind::Right => "r",
    }
}

fn is_internal(id: &str) -> bool {
    id.starts_with(':')
}

struct TlProgram {
    /// Per green phase, the set of green link indices.
    green: Vec<BTreeSet<usize>>,
    yellow: Option<f64>,
}

pub fn load_network(text: &[u8]) -> Result<RoadNetwork, FormatError> {
    let (_, doc) = parse(text)?;
    let root = doc.root_element();
    if !root.has_tag_name("net") {
        return Err(FormatError::semantic(root.tag_name().name(), "root element is not <net>"));
    }

    let mut roads = Vec::new();
    let mut lanes = Vec::new();
    let mut junctions = Vec::new();
    let mut programs: HashMap<String, TlProgram> = HashMap::new();
    let mut connections = Vec::new();

    for node in root.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "edge" => {
                let id = attr(node, "id")?;
                if is_internal(id) || node.attribute("function") == Some("internal") {
                    continue;
                }
                let mut lane_nodes: Vec<Node> = node.children().filter(|c| c.has_tag_name("lane")).collect();
                if lane_nodes.is_empty() {
                    return Err(FormatError::semantic(id, "edge has no lanes"));
                }
                let mut indexed = Vec::with_capacity(lane_nodes.len());
                for l in lane_nodes.drain(..) {
                    indexed.push((opt_index(l, "index")?, l));
                }
                indexed.sort_by_key(|(i, _)| *i);
                let length = num(indexed[0].1, "length")?;
                let mut lane_ids = Vec::with_capacity(indexed.len());
                let mut fastest: f64 = 0.0;
                for (index, l) in indexed {
                    let speed = num(l, "speed")?;
                    fastest = fastest.max(speed);
                    let lid = canonical_lane_id(id, index);
                    lanes.push(Lane {
                        id: lid.clone(),
                        road: id.to_string(),
                        index,
                        length: num(l, "length")?,
                        max_speed: speed,
                    });
                    lane_ids.push(lid);
                }
                roads.push(Road {
                    id: id.to_string(),
                    from: attr(node, "from")?.to_string(),
                    to: attr(node, "to")?.to_string(),
                    length,
                    lanes: lane_ids,
                    speed_limit: param_num(node, "speedLimit")?.unwrap_or(fastest),
                });
            }
            "junction" => {
                let id = attr(node, "id")?;
                if is_internal(id) || node.attribute("type") == Some("internal") {
                    continue;
                }
                junctions.push((
                    id.to_string(),
                    Point::new(num(node, "x")?, num(node, "y")?),
                    param_num(node, "yellowTime")?,
                ));
            }
            "tlLogic" => {
                let id = attr(node, "id")?;
                let mut green = Vec::new();
                let mut yellow = param_num(node, "yellowTime")?;
                let mut first_yellow = None;
                for ph in node.children().filter(|c| c.has_tag_name("phase")) {
                    let state = attr(ph, "state")?;
                    let duration = num(ph, "duration")?;
                    let g: BTreeSet<usize> = state
                        .chars()
                        .enumerate()
                        .filter(|(_, c)| *c == 'G' || *c == 'g')
                        .map(|(i, _)| i)
                        .collect();
                    if !g.is_empty() {
                        green.push(g);
                    } else if state.contains('y') || state.contains('Y') {
                        first_yellow.get_or_insert(duration);
                    } else {
                        warn!("tlLogic `{id}`: all-red phase dropped");
                    }
                }
                if yellow.is_none() {
                    yellow = first_yellow;
                }
                programs.insert(id.to_string(), TlProgram { green, yellow });
            }
            "connection" => {
                let from = attr(node, "from")?;
                let to = attr(node, "to")?;
                if is_internal(from) || is_internal(to) {
                    continue;
                }
                let link = match node.attribute("tl") {
                    Some(tl) => Some((tl.to_string(), opt_index(node, "linkIndex")?)),
                    None => None,
                };
                connections.push((
                    canonical_lane_id(from, opt_index(node, "fromLane")?),
                    canonical_lane_id(to, opt_index(node, "toLane")?),
                    turn_from_dir(node.attribute("dir").unwrap_or("s")),
                    link,
                ));
            }
            "location" | "type" | "roundabout" | "request" | "param" | "neigh" => {}
            other => warn!("ignoring <{other}> element"),
        }
    }

    let known_lanes: BTreeSet<&str> = lanes.iter().map(|l| l.id.as_str()).collect();
    let mut movements = Vec::with_capacity(connections.len());
    // tl id -> link index -> movement id
    let mut links: HashMap<String, BTreeMap<usize, String>> = HashMap::new();
    for (in_lane, out_lane, turn, link) in connections {
        let id = canonical_movement_id(&in_lane, &out_lane);
        for lane in [&in_lane, &out_lane] {
            if !known_lanes.contains(lane.as_str()) {
                return Err(FormatError::semantic(&id, format!("connection references unknown lane `{lane}`")));
            }
        }
        if let Some((tl, index)) = link {
            if !programs.contains_key(&tl) {
                return Err(FormatError::semantic(&id, format!("connection references unknown tlLogic `{tl}`")));
            }
            links.entry(tl).or_default().insert(index, id.clone());
        }
        movements.push(Movement { id, in_lane, out_lane, turn });
    }

    let mut intersections = Vec::with_capacity(junctions.len());
    for (id, position, junction_yellow) in junctions {
        let (phases, yellow) = match programs.get(&id) {
            Some(program) if !program.green.is_empty() => {
                let table = links.get(&id);
                let mut phases = Vec::with_capacity(program.green.len());
                for (index, g) in program.green.iter().enumerate() {
                    let mut set = BTreeSet::new();
                    for link in g {
                        match table.and_then(|t| t.get(link)) {
                            Some(m) => {
                                set.insert(m.clone());
                            }
                            None => warn!("tlLogic `{id}`: green link {link} has no connection"),
                        }
                    }
                    phases.push(Phase { index, movements: set });
                }
                (phases, program.yellow)
            }
            _ => (Vec::new(), junction_yellow),
        };
        intersections.push(Intersection {
            id,
            position,
            is_virtual: phases.is_empty(),
            phases,
            yellow_time: yellow.unwrap_or(DEFAULT_YELLOW_TIME),
        });
    }

    require_valid(RoadNetwork::new(intersections, roads, lanes, movements))
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn save_network(net: &RoadNetwork) -> Result<Vec<u8>, FormatError> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<net version=\"1.9\">\n");

    for r in net.roads() {
        let from = net.intersection(&r.from).expect("validated").position;
        let to = net.intersection(&r.to).expect("validated").position;
        let _ = writeln!(
            out,
            "    <edge id=\"{}\" from=\"{}\" to=\"{}\" priority=\"-1\">",
            escape(&r.id),
            escape(&r.from),
            escape(&r.to)
        );
        for lid in &r.lanes {
            let lane = net.lane(lid).expect("validated");
            let _ = writeln!(
                out,
                "        <lane id=\"{}\" index=\"{}\" speed=\"{}\" length=\"{}\" shape=\"{},{} {},{}\"/>",
                escape(&lane.id),
                lane.index,
                lane.max_speed,
                lane.length,
                from.x,
                from.y,
                to.x,
                to.y
            );
        }
        let _ = writeln!(out, "        <param key=\"speedLimit\" value=\"{}\"/>", r.speed_limit);
        out.push_str("    </edge>\n");
    }

    let by_inter = movements_by_intersection(net);
    // link index of every signal-controlled movement
    let mut link_index: HashMap<&str, (&str, usize)> = HashMap::new();
    for inter in net.intersections().iter().filter(|i| !i.is_virtual) {
        let ms = by_inter.get(&inter.id).map(Vec::as_slice).unwrap_or(&[]);
        for (n, m) in ms.iter().enumerate() {
            link_index.insert(m.id.as_str(), (inter.id.as_str(), n));
        }
        let _ = writeln!(
            out,
            "    <tlLogic id=\"{}\" type=\"static\" programID=\"0\" offset=\"0\">",
            escape(&inter.id)
        );
        for phase in &inter.phases {
            let state: String = ms
                .iter()
                .map(|m| if phase.movements.contains(&m.id) { 'G' } else { 'r' })
                .collect();
            let _ = writeln!(out, "        <phase duration=\"{GREEN_PHASE_TIME}\" state=\"{state}\"/>");
            if inter.yellow_time > 0.0 {
                let yellow: String = state.chars().map(|c| if c == 'G' { 'y' } else { 'r' }).collect();
                let _ = writeln!(out, "        <phase duration=\"{}\" state=\"{yellow}\"/>", inter.yellow_time);
            }
        }
        let _ = writeln!(out, "        <param key=\"yellowTime\" value=\"{}\"/>", inter.yellow_time);
        out.push_str("    </tlLogic>\n");
    }

    for inter in net.intersections() {
        let incoming: Vec<&str> = net
            .roads()
            .iter()
            .filter(|r| r.to == inter.id)
            .flat_map(|r| r.lanes.iter().map(String::as_str))
            .collect();
        let has_outgoing = net.roads().iter().any(|r| r.from == inter.id);
        let kind = if !inter.is_virtual {
            "traffic_light"
        } else if incoming.is_empty() || !has_outgoing {
            "dead_end"
        } else {
            "priority"
        };
        let _ = write!(
            out,
            "    <junction id=\"{}\" type=\"{kind}\" x=\"{}\" y=\"{}\" incLanes=\"{}\" intLanes=\"\" shape=\"\"",
            escape(&inter.id),
            inter.position.x,
            inter.position.y,
            escape(&incoming.join(" "))
        );
        if inter.is_virtual {
            let _ = writeln!(out, ">\n        <param key=\"yellowTime\" value=\"{}\"/>\n    </junction>", inter.yellow_time);
        } else {
            out.push_str("/>\n");
        }
    }

    for m in net.movements() {
        let a = net.lane(&m.in_lane).expect("validated");
        let b = net.lane(&m.out_lane).expect("validated");
        let _ = write!(
            out,
            "    <connection from=\"{}\" to=\"{}\" fromLane=\"{}\" toLane=\"{}\"",
            escape(&a.road),
            escape(&b.road),
            a.index,
            b.index
        );
        match link_index.get(m.id.as_str()) {
            Some((tl, n)) => {
                let _ = write!(out, " tl=\"{}\" linkIndex=\"{n}\"", escape(tl));
                let _ = writeln!(out, " dir=\"{}\" state=\"o\"/>", dir_from_turn(m.turn));
            }
            None => {
                let _ = writeln!(out, " dir=\"{}\" state=\"M\"/>", dir_from_turn(m.turn));
            }
        }
    }

    out.push_str("</net>\n");
    Ok(out.into_bytes())
}

fn vtype_params(node: Node<'_, '_>) -> Result<VehicleParams, FormatError> {
    let d = VehicleParams::default();
    Ok(VehicleParams {
        max_speed: opt_num(node, "maxSpeed")?.unwrap_or(d.max_speed),
        accel: opt_num(node, "accel")?.unwrap_or(d.accel),
        decel: opt_num(node, "decel")?.unwrap_or(d.decel),
        length: opt_num(node, "length")?.unwrap_or(d.length),
        min_gap: opt_num(node, "minGap")?.unwrap_or(d.min_gap),
    })
}

fn route_edges(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn load_flows(text: &[u8]) -> Result<FlowSet, FormatError> {
    let (_, doc) = parse(text)?;
    let root = doc.root_element();
    if !root.has_tag_name("routes") {
        return Err(FormatError::semantic(root.tag_name().name(), "root element is not <routes>"));
    }

    let mut vtypes: HashMap<&str, VehicleParams> = HashMap::new();
    let mut named_routes: HashMap<&str, Vec<String>> = HashMap::new();
    let mut flows = Vec::new();

    for node in root.children().filter(Node::is_element) {
        let tag = node.tag_name().name();
        match tag {
            "vType" => {
                vtypes.insert(attr(node, "id")?, vtype_params(node)?);
            }
            "route" => {
                named_routes.insert(attr(node, "id")?, route_edges(attr(node, "edges")?));
            }
            "flow" | "vehicle" | "trip" => {
                let id = node.attribute("id").unwrap_or(tag);
                let vehicle = match node.attribute("type") {
                    None => VehicleParams::default(),
                    Some(t) => *vtypes
                        .get(t)
                        .ok_or_else(|| FormatError::semantic(id, format!("unknown vType `{t}`")))?,
                };
                let inline = node.children().find(|c| c.has_tag_name("route"));
                let (route, route_kind) = if let Some(r) = inline {
                    (route_edges(attr(r, "edges")?), RouteKind::Full)
                } else if let Some(name) = node.attribute("route") {
                    let edges = named_routes
                        .get(name)
                        .ok_or_else(|| FormatError::semantic(id, format!("unknown route `{name}`")))?;
                    (edges.clone(), RouteKind::Full)
                } else {
                    let from = attr(node, "from")?.to_string();
                    let to = attr(node, "to")?.to_string();
                    if from == to {
                        (vec![from], RouteKind::Full)
                    } else {
                        (vec![from, to], RouteKind::OriginDestination)
                    }
                };
                let (start_time, end_time, interval) = if tag == "flow" {
                    let begin = opt_num(node, "begin")?.unwrap_or(0.0);
                    let end = opt_num(node, "end")?.unwrap_or(DEFAULT_FLOW_END);
                    let interval = match (opt_num(node, "period")?, opt_num(node, "vehsPerHour")?) {
                        (Some(p), _) => p,
                        (None, Some(vph)) => 3600.0 / vph,
                        (None, None) => {
                            return Err(FormatError::semantic(id, "flow needs `period` or `vehsPerHour`"))
                        }
                    };
                    (begin, end, interval)
                } else {
                    let depart = num(node, "depart")?;
                    (depart, depart, 1.0)
                };
                flows.push(FlowSpec {
                    route,
                    route_kind,
                    start_time,
                    end_time,
                    interval,
                    vehicle,
                });
            }
            other => warn!("ignoring <{other}> element"),
        }
    }

    let flows = FlowSet::new(flows);
    check_flows(&flows)?;
    Ok(flows)
}

/// Emits flows in the given order; callers sort by departure first.
pub fn save_flows(flows: &FlowSet) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<routes>\n");
    let mut types: Vec<VehicleParams> = Vec::new();
    for f in &flows.flows {
        if !types.contains(&f.vehicle) {
            types.push(f.vehicle);
        }
    }
    for (n, v) in types.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <vType id=\"type_{n}\" accel=\"{}\" decel=\"{}\" sigma=\"0\" length=\"{}\" minGap=\"{}\" maxSpeed=\"{}\"/>",
            v.accel, v.decel, v.length, v.min_gap, v.max_speed
        );
    }
    for (n, f) in flows.flows.iter().enumerate() {
        let t = types.iter().position(|v| *v == f.vehicle).expect("collected");
        let _ = write!(
            out,
            "    <flow id=\"flow_{n}\" type=\"type_{t}\" begin=\"{}\" end=\"{}\" period=\"{}\"",
            f.start_time, f.end_time, f.interval
        );
        match f.route_kind {
            RouteKind::OriginDestination => {
                let _ = writeln!(
                    out,
                    " from=\"{}\" to=\"{}\"/>",
                    escape(&f.route[0]),
                    escape(f.route.last().expect("non-empty"))
                );
            }
            RouteKind::Full => {
                let edges: Vec<String> = f.route.iter().map(|r| escape(r)).collect();
                let _ = writeln!(out, ">\n        <route edges=\"{}\"/>\n    </flow>", edges.join(" "));
            }
        }
    }
    out.push_str("</routes>\n");
    out.into_bytes()
}
