//! Index-based view of a validated [`RoadNetwork`] used by the engine, the
//! environment and the controllers.

use std::collections::HashMap;

use crate::model::{validate_network, ModelError, RoadNetwork, TurnKind};

pub type LaneIdx = usize;
pub type RoadIdx = usize;
pub type InterIdx = usize;
pub type MoveIdx = usize;

/// Phase tables are stored as bitmasks.
pub const MAX_PHASES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LaneInfo {
    pub id: String,
    pub road: RoadIdx,
    /// Position within the road (0-based).
    pub index: usize,
    pub length: f64,
    pub max_speed: f64,
    /// Movements leaving this lane.
    pub movements: Vec<MoveIdx>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadInfo {
    pub id: String,
    pub from: InterIdx,
    pub to: InterIdx,
    pub length: f64,
    pub speed_limit: f64,
    pub lanes: Vec<LaneIdx>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementInfo {
    pub id: String,
    pub in_lane: LaneIdx,
    pub out_lane: LaneIdx,
    pub intersection: InterIdx,
    pub turn: TurnKind,
    /// Bit `p` set when phase `p` of the intersection grants this movement.
    pub phase_mask: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionInfo {
    pub id: String,
    pub is_virtual: bool,
    pub yellow_time: f64,
    /// Movement indices per phase.
    pub phases: Vec<Vec<MoveIdx>>,
    /// All movements through this intersection, id order.
    pub movements: Vec<MoveIdx>,
    /// Lanes of roads ending here, ordered by (road id, lane index).
    pub incoming_lanes: Vec<LaneIdx>,
    /// Lanes of roads starting here, ordered by (road id, lane index).
    pub outgoing_lanes: Vec<LaneIdx>,
}

impl IntersectionInfo {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    network: RoadNetwork,
    pub lanes: Vec<LaneInfo>,
    pub roads: Vec<RoadInfo>,
    pub movements: Vec<MovementInfo>,
    pub intersections: Vec<IntersectionInfo>,
    /// Non-virtual intersections in id order.
    pub signalized: Vec<InterIdx>,
    lane_by_id: HashMap<String, LaneIdx>,
    road_by_id: HashMap<String, RoadIdx>,
    inter_by_id: HashMap<String, InterIdx>,
}

impl Topology {
    pub fn build(net: &RoadNetwork) -> Result<Self, ModelError> {
        let report = validate_network(net);
        if !report.is_empty() {
            return Err(ModelError::Invalid(report));
        }
        for i in net.intersections() {
            if i.phases.len() > MAX_PHASES {
                return Err(ModelError::PhaseOutOfRange {
                    intersection: i.id.clone(),
                    index: i.phases.len() - 1,
                    count: MAX_PHASES,
                });
            }
        }

        let inter_by_id: HashMap<String, InterIdx> = net
            .intersections()
            .iter()
            .enumerate()
            .map(|(i, x)| (x.id.clone(), i))
            .collect();
        let road_by_id: HashMap<String, RoadIdx> =
            net.roads().iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let lane_by_id: HashMap<String, LaneIdx> =
            net.lanes().iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();
        let move_by_id: HashMap<&str, MoveIdx> = net
            .movements()
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.as_str(), i))
            .collect();

        let roads: Vec<RoadInfo> = net
            .roads()
            .iter()
            .map(|r| RoadInfo {
                id: r.id.clone(),
                from: inter_by_id[&r.from],
                to: inter_by_id[&r.to],
                length: r.length,
                speed_limit: r.speed_limit,
                lanes: r.lanes.iter().map(|l| lane_by_id[l]).collect(),
            })
            .collect();

        let mut lanes: Vec<LaneInfo> = net
            .lanes()
            .iter()
            .map(|l| LaneInfo {
                id: l.id.clone(),
                road: road_by_id[&l.road],
                index: l.index,
                length: l.length,
                max_speed: l.max_speed,
                movements: Vec::new(),
            })
            .collect();

        let mut movements: Vec<MovementInfo> = net
            .movements()
            .iter()
            .map(|m| {
                let in_lane = lane_by_id[&m.in_lane];
                MovementInfo {
                    id: m.id.clone(),
                    in_lane,
                    out_lane: lane_by_id[&m.out_lane],
                    intersection: roads[lanes[in_lane].road].to,
                    turn: m.turn,
                    phase_mask: 0,
                }
            })
            .collect();
        for (i, m) in movements.iter().enumerate() {
            lanes[m.in_lane].movements.push(i);
        }

        let mut intersections: Vec<IntersectionInfo> = net
            .intersections()
            .iter()
            .map(|x| IntersectionInfo {
                id: x.id.clone(),
                is_virtual: x.is_virtual,
                yellow_time: x.yellow_time,
                phases: x
                    .phases
                    .iter()
                    .map(|p| p.movements.iter().map(|m| move_by_id[m.as_str()]).collect())
                    .collect(),
                movements: Vec::new(),
                incoming_lanes: Vec::new(),
                outgoing_lanes: Vec::new(),
            })
            .collect();
        for (i, m) in movements.iter().enumerate() {
            intersections[m.intersection].movements.push(i);
        }
        for (ii, inter) in intersections.iter().enumerate() {
            for (p, ms) in inter.phases.iter().enumerate() {
                for &m in ms {
                    movements[m].phase_mask |= 1u64 << p;
                }
            }
            debug_assert!(inter.movements.iter().all(|&m| movements[m].intersection == ii));
        }
        // roads are in id order, lanes listed by index
        for road in &roads {
            intersections[road.to].incoming_lanes.extend(&road.lanes);
            intersections[road.from].outgoing_lanes.extend(&road.lanes);
        }

        let signalized = intersections
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_virtual)
            .map(|(i, _)| i)
            .collect();

        Ok(Self {
            network: net.clone(),
            lanes,
            roads,
            movements,
            intersections,
            signalized,
            lane_by_id,
            road_by_id,
            inter_by_id,
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn lane_index(&self, id: &str) -> Option<LaneIdx> {
        self.lane_by_id.get(id).copied()
    }

    pub fn road_index(&self, id: &str) -> Option<RoadIdx> {
        self.road_by_id.get(id).copied()
    }

    pub fn intersection_index(&self, id: &str) -> Option<InterIdx> {
        self.inter_by_id.get(id).copied()
    }

    /// Road that `lane` belongs to.
    pub fn lane_road(&self, lane: LaneIdx) -> &RoadInfo {
        &self.roads[self.lanes[lane].road]
    }

    /// Free-flow travel time of a road sequence: Σ length / speed_limit.
    pub fn free_flow_time(&self, route: &[RoadIdx]) -> f64 {
        route
            .iter()
            .map(|&r| self.roads[r].length / self.roads[r].speed_limit)
            .sum()
    }
}
