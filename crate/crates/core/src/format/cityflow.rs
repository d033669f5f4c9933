//! CityFlow-style JSON road networks and flow files.
//!
//! Road links (road-to-road turns) group lane links; light phases list the
//! road links they open. A light phase with no road links is the yellow
//! interlude and is not a phase of the model. `length`, `speedLimit` and
//! `yellowTime` are extra keys that CityFlow itself ignores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    canonical_lane_id, canonical_movement_id, check_flows, require_valid, utf8, FormatError,
    FormatKind, DEFAULT_YELLOW_TIME,
};
use crate::model::{
    movements_by_intersection, FlowSet, FlowSpec, Intersection, Lane, Movement, Phase, Point, Road,
    RoadNetwork, RouteKind, TurnKind, VehicleParams,
};

const LANE_WIDTH: f64 = 3.2;
const GREEN_PHASE_TIME: f64 = 30.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct CfPoint {
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfRoadnet {
    intersections: Vec<CfIntersection>,
    roads: Vec<CfRoad>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfIntersection {
    id: String,
    point: CfPoint,
    #[serde(default)]
    width: f64,
    #[serde(default)]
    roads: Vec<String>,
    #[serde(default)]
    road_links: Vec<CfRoadLink>,
    #[serde(default)]
    traffic_light: Option<CfTrafficLight>,
    #[serde(rename = "virtual", default)]
    is_virtual: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfRoadLink {
    #[serde(rename = "type")]
    kind: String,
    start_road: String,
    end_road: String,
    #[serde(default)]
    direction: i64,
    #[serde(default)]
    lane_links: Vec<CfLaneLink>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfLaneLink {
    start_lane_index: usize,
    end_lane_index: usize,
    #[serde(default)]
    points: Vec<CfPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfTrafficLight {
    #[serde(default)]
    road_link_indices: Vec<usize>,
    #[serde(default)]
    lightphases: Vec<CfLightPhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yellow_time: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfLightPhase {
    time: f64,
    #[serde(default)]
    available_road_links: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfRoad {
    id: String,
    start_intersection: String,
    end_intersection: String,
    #[serde(default)]
    points: Vec<CfPoint>,
    lanes: Vec<CfLane>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed_limit: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfLane {
    #[serde(default = "lane_width")]
    width: f64,
    max_speed: f64,
}

fn lane_width() -> f64 {
    LANE_WIDTH
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfFlow {
    #[serde(default)]
    vehicle: CfVehicle,
    route: Vec<String>,
    interval: f64,
    start_time: f64,
    end_time: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CfVehicle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_pos_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_neg_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    usual_pos_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    usual_neg_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    headway_time: Option<f64>,
}

fn parse<'a, T: Deserialize<'a>>(text: &'a [u8]) -> Result<T, FormatError> {
    let s = utf8(text)?;
    serde_json::from_str(s).map_err(|e| FormatError::Syntax {
        offset: super::byte_offset(s, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn turn_from_type(kind: &str) -> Result<TurnKind, String> {
    match kind {
        "go_straight" => Ok(TurnKind::Straight),
        "turn_left" => Ok(TurnKind::Left),
        "turn_right" => Ok(TurnKind::Right),
        other => Err(format!("unknown road link type `{other}`")),
    }
}

fn type_from_turn(turn: TurnKind) -> &'static str {
    match turn {
        TurnKind::Straight => "go_straight",
        TurnKind::Left => "turn_left",
        TurnKind::Right => "turn_right",
    }
}

fn polyline_length(points: &[CfPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| Point::new(w[0].x, w[0].y).distance(&Point::new(w[1].x, w[1].y)))
        .sum()
}

pub fn load_network(text: &[u8]) -> Result<RoadNetwork, FormatError> {
    let doc: CfRoadnet = parse(text)?;

    let mut roads = Vec::with_capacity(doc.roads.len());
    let mut lanes = Vec::new();
    for r in &doc.roads {
        let length = r.length.unwrap_or_else(|| polyline_length(&r.points));
        let speed_limit = r
            .speed_limit
            .unwrap_or_else(|| r.lanes.iter().map(|l| l.max_speed).fold(0.0, f64::max));
        let mut lane_ids = Vec::with_capacity(r.lanes.len());
        for (index, l) in r.lanes.iter().enumerate() {
            let id = canonical_lane_id(&r.id, index);
            lanes.push(Lane {
                id: id.clone(),
                road: r.id.clone(),
                index,
                length,
                max_speed: l.max_speed,
            });
            lane_ids.push(id);
        }
        roads.push(Road {
            id: r.id.clone(),
            from: r.start_intersection.clone(),
            to: r.end_intersection.clone(),
            length,
            lanes: lane_ids,
            speed_limit,
        });
    }
    let lane_count: BTreeMap<&str, usize> = doc.roads.iter().map(|r| (r.id.as_str(), r.lanes.len())).collect();

    let mut intersections = Vec::with_capacity(doc.intersections.len());
    let mut movements = Vec::new();
    for i in &doc.intersections {
        // movement ids per road link, in road link order
        let mut link_movements: Vec<Vec<String>> = Vec::with_capacity(i.road_links.len());
        for link in &i.road_links {
            let turn = turn_from_type(&link.kind).map_err(|m| FormatError::semantic(&i.id, m))?;
            let mut ids = Vec::with_capacity(link.lane_links.len());
            for ll in &link.lane_links {
                for (road, index) in [(&link.start_road, ll.start_lane_index), (&link.end_road, ll.end_lane_index)] {
                    match lane_count.get(road.as_str()) {
                        None => {
                            return Err(FormatError::semantic(
                                &i.id,
                                format!("road link references unknown road `{road}`"),
                            ))
                        }
                        Some(&n) if index >= n => {
                            return Err(FormatError::semantic(
                                &i.id,
                                format!("lane index {index} out of range for road `{road}`"),
                            ))
                        }
                        _ => {}
                    }
                }
                let in_lane = canonical_lane_id(&link.start_road, ll.start_lane_index);
                let out_lane = canonical_lane_id(&link.end_road, ll.end_lane_index);
                let id = canonical_movement_id(&in_lane, &out_lane);
                movements.push(Movement {
                    id: id.clone(),
                    in_lane,
                    out_lane,
                    turn,
                });
                ids.push(id);
            }
            link_movements.push(ids);
        }

        let mut phases = Vec::new();
        let mut yellow_time = None;
        if let Some(tl) = &i.traffic_light {
            if !i.is_virtual {
                for lp in &tl.lightphases {
                    if lp.available_road_links.is_empty() {
                        yellow_time.get_or_insert(lp.time);
                        continue;
                    }
                    let mut set = BTreeSet::new();
                    for &link in &lp.available_road_links {
                        let ids = link_movements.get(link).ok_or_else(|| {
                            FormatError::semantic(&i.id, format!("light phase references unknown road link {link}"))
                        })?;
                        set.extend(ids.iter().cloned());
                    }
                    phases.push(Phase {
                        index: phases.len(),
                        movements: set,
                    });
                }
            }
            if let Some(y) = tl.yellow_time {
                yellow_time = Some(y);
            }
        }
        intersections.push(Intersection {
            id: i.id.clone(),
            position: Point::new(i.point.x, i.point.y),
            is_virtual: i.is_virtual || phases.is_empty(),
            phases,
            yellow_time: yellow_time.unwrap_or(DEFAULT_YELLOW_TIME),
        });
    }

    require_valid(RoadNetwork::new(intersections, roads, lanes, movements))
}

pub fn save_network(net: &RoadNetwork) -> Result<Vec<u8>, FormatError> {
    let unrepresentable = |feature: String| FormatError::Unrepresentable {
        format: FormatKind::CityflowStyleJson,
        feature,
    };
    let by_inter = movements_by_intersection(net);

    let mut intersections = Vec::with_capacity(net.intersections().len());
    for inter in net.intersections() {
        // road links: movements grouped by (in road, out road)
        let mut groups: BTreeMap<(&str, &str), Vec<&Movement>> = BTreeMap::new();
        for m in by_inter.get(&inter.id).map(Vec::as_slice).unwrap_or(&[]) {
            let a = net.lane(&m.in_lane).expect("validated");
            let b = net.lane(&m.out_lane).expect("validated");
            groups.entry((a.road.as_str(), b.road.as_str())).or_default().push(m);
        }
        let mut road_links = Vec::with_capacity(groups.len());
        let mut link_of: BTreeMap<&str, usize> = BTreeMap::new();
        for (n, ((start, end), ms)) in groups.iter().enumerate() {
            let turn = ms[0].turn;
            if ms.iter().any(|m| m.turn != turn) {
                return Err(unrepresentable(format!(
                    "road link `{start}`->`{end}` mixes turn kinds"
                )));
            }
            let lane_links = ms
                .iter()
                .map(|m| {
                    link_of.insert(m.id.as_str(), n);
                    CfLaneLink {
                        start_lane_index: net.lane(&m.in_lane).expect("validated").index,
                        end_lane_index: net.lane(&m.out_lane).expect("validated").index,
                        points: Vec::new(),
                    }
                })
                .collect();
            road_links.push(CfRoadLink {
                kind: type_from_turn(turn).to_string(),
                start_road: start.to_string(),
                end_road: end.to_string(),
                direction: 0,
                lane_links,
            });
        }

        let traffic_light = {
            let mut lightphases = Vec::with_capacity(inter.phases.len() + 1);
            if inter.yellow_time > 0.0 && !inter.is_virtual {
                lightphases.push(CfLightPhase {
                    time: inter.yellow_time,
                    available_road_links: Vec::new(),
                });
            }
            for phase in &inter.phases {
                let links: BTreeSet<usize> = phase.movements.iter().map(|m| link_of[m.as_str()]).collect();
                for &l in &links {
                    let full = groups.values().nth(l).expect("link index").len();
                    let covered = phase
                        .movements
                        .iter()
                        .filter(|m| link_of[m.as_str()] == l)
                        .count();
                    if covered != full {
                        return Err(unrepresentable(format!(
                            "phase {} of `{}` opens only part of road link {l}",
                            phase.index, inter.id
                        )));
                    }
                }
                lightphases.push(CfLightPhase {
                    time: GREEN_PHASE_TIME,
                    available_road_links: links.into_iter().collect(),
                });
            }
            Some(CfTrafficLight {
                road_link_indices: (0..road_links.len()).collect(),
                lightphases,
                yellow_time: Some(inter.yellow_time),
            })
        };

        let touching = net
            .roads()
            .iter()
            .filter(|r| r.from == inter.id || r.to == inter.id)
            .map(|r| r.id.clone())
            .collect();
        intersections.push(CfIntersection {
            id: inter.id.clone(),
            point: CfPoint {
                x: inter.position.x,
                y: inter.position.y,
            },
            width: 0.0,
            roads: touching,
            road_links,
            traffic_light,
            is_virtual: inter.is_virtual,
        });
    }

    let roads = net
        .roads()
        .iter()
        .map(|r| {
            let from = net.intersection(&r.from).expect("validated").position;
            let to = net.intersection(&r.to).expect("validated").position;
            CfRoad {
                id: r.id.clone(),
                start_intersection: r.from.clone(),
                end_intersection: r.to.clone(),
                points: vec![CfPoint { x: from.x, y: from.y }, CfPoint { x: to.x, y: to.y }],
                lanes: r
                    .lanes
                    .iter()
                    .map(|l| CfLane {
                        width: LANE_WIDTH,
                        max_speed: net.lane(l).expect("validated").max_speed,
                    })
                    .collect(),
                length: Some(r.length),
                speed_limit: Some(r.speed_limit),
            }
        })
        .collect();

    let doc = CfRoadnet { intersections, roads };
    Ok(serde_json::to_vec_pretty(&doc).expect("roadnet serializes"))
}

pub fn load_flows(text: &[u8]) -> Result<FlowSet, FormatError> {
    let doc: Vec<CfFlow> = parse(text)?;
    let defaults = VehicleParams::default();
    let flows = FlowSet::new(
        doc.into_iter()
            .map(|f| FlowSpec {
                route: f.route,
                route_kind: RouteKind::Full,
                start_time: f.start_time,
                end_time: f.end_time,
                interval: f.interval,
                vehicle: VehicleParams {
                    max_speed: f.vehicle.max_speed.unwrap_or(defaults.max_speed),
                    accel: f
                        .vehicle
                        .usual_pos_acc
                        .or(f.vehicle.max_pos_acc)
                        .unwrap_or(defaults.accel),
                    decel: f
                        .vehicle
                        .usual_neg_acc
                        .or(f.vehicle.max_neg_acc)
                        .unwrap_or(defaults.decel),
                    length: f.vehicle.length.unwrap_or(defaults.length),
                    min_gap: f.vehicle.min_gap.unwrap_or(defaults.min_gap),
                },
            })
            .collect(),
    );
    check_flows(&flows)?;
    Ok(flows)
}

pub fn save_flows(flows: &FlowSet) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::with_capacity(flows.flows.len());
    for (n, f) in flows.flows.iter().enumerate() {
        if f.is_incomplete() {
            return Err(FormatError::IncompleteRoute { flow: n });
        }
        out.push(CfFlow {
            vehicle: CfVehicle {
                length: Some(f.vehicle.length),
                width: Some(2.0),
                max_pos_acc: Some(f.vehicle.accel),
                max_neg_acc: Some(f.vehicle.decel),
                usual_pos_acc: Some(f.vehicle.accel),
                usual_neg_acc: Some(f.vehicle.decel),
                min_gap: Some(f.vehicle.min_gap),
                max_speed: Some(f.vehicle.max_speed),
                headway_time: Some(1.5),
            },
            route: f.route.clone(),
            interval: f.interval,
            start_time: f.start_time,
            end_time: f.end_time,
        });
    }
    Ok(serde_json::to_vec_pretty(&out).expect("flows serialize"))
}
