//! Format-independent description of road networks, signal programs and demand.
//!
//! Everything here is immutable once built. Identifiers are opaque strings;
//! wherever an ordering is needed downstream it is the lexicographic order of
//! these ids.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown intersection `{0}`")]
    UnknownIntersection(String),
    #[error("intersection `{0}` is virtual and has no signal program")]
    VirtualIntersection(String),
    #[error("phase index {index} out of range for intersection `{intersection}` ({count} phases)")]
    PhaseOutOfRange {
        intersection: String,
        index: usize,
        count: usize,
    },
    #[error("unknown movement `{0}`")]
    UnknownMovement(String),
    #[error("unknown road `{0}`")]
    UnknownRoad(String),
    #[error("unknown lane `{0}`")]
    UnknownLane(String),
    #[error("network is invalid: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub index: usize,
    pub movements: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: String,
    pub position: Point,
    /// Unsignalized junction: vehicles pass without signal control.
    pub is_virtual: bool,
    pub phases: Vec<Phase>,
    /// Seconds of yellow inserted on every phase change.
    pub yellow_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub lanes: Vec<String>,
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub road: String,
    pub index: usize,
    pub length: f64,
    pub max_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Movement {
    pub id: String,
    pub in_lane: String,
    pub out_lane: String,
    pub turn: TurnKind,
}

/// Directed graph of intersections, roads, lanes and lane-to-lane movements.
#[derive(Debug, Clone, Default)]
pub struct RoadNetwork {
    intersections: Vec<Intersection>,
    roads: Vec<Road>,
    lanes: Vec<Lane>,
    movements: Vec<Movement>,
    intersection_index: HashMap<String, usize>,
    road_index: HashMap<String, usize>,
    lane_index: HashMap<String, usize>,
    movement_index: HashMap<String, usize>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.intersections == other.intersections
            && self.roads == other.roads
            && self.lanes == other.lanes
            && self.movements == other.movements
    }
}

fn index_by<T>(items: &[T], id: impl Fn(&T) -> &str) -> HashMap<String, usize> {
    let mut map = HashMap::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        // first occurrence wins; duplicates are reported by validation
        map.entry(id(item).to_string()).or_insert(i);
    }
    map
}

impl RoadNetwork {
    /// Builds a network with entities sorted by id. No validation is done here;
    /// call [`validate_network`] for that.
    pub fn new(
        mut intersections: Vec<Intersection>,
        mut roads: Vec<Road>,
        mut lanes: Vec<Lane>,
        mut movements: Vec<Movement>,
    ) -> Self {
        intersections.sort_by(|a, b| a.id.cmp(&b.id));
        roads.sort_by(|a, b| a.id.cmp(&b.id));
        lanes.sort_by(|a, b| a.id.cmp(&b.id));
        movements.sort_by(|a, b| a.id.cmp(&b.id));
        for i in &mut intersections {
            i.phases.sort_by_key(|p| p.index);
        }
        Self {
            intersection_index: index_by(&intersections, |i| &i.id),
            road_index: index_by(&roads, |r| &r.id),
            lane_index: index_by(&lanes, |l| &l.id),
            movement_index: index_by(&movements, |m| &m.id),
            intersections,
            roads,
            lanes,
            movements,
        }
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn movements(&self) -> &[Movement] {
        &self.movements
    }

    pub fn intersection(&self, id: &str) -> Option<&Intersection> {
        self.intersection_index.get(id).map(|&i| &self.intersections[i])
    }

    pub fn road(&self, id: &str) -> Option<&Road> {
        self.road_index.get(id).map(|&i| &self.roads[i])
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lane_index.get(id).map(|&i| &self.lanes[i])
    }

    pub fn movement(&self, id: &str) -> Option<&Movement> {
        self.movement_index.get(id).map(|&i| &self.movements[i])
    }

    pub fn is_empty(&self) -> bool {
        self.intersections.is_empty()
    }

    /// Intersection at which a movement takes place (end of its in-lane's road).
    pub fn movement_intersection(&self, movement_id: &str) -> Option<&str> {
        let m = self.movement(movement_id)?;
        let lane = self.lane(&m.in_lane)?;
        let road = self.road(&lane.road)?;
        Some(road.to.as_str())
    }

    /// Returns a copy with every signalized intersection's yellow time replaced.
    pub fn with_yellow_time(&self, yellow: f64) -> Self {
        let mut intersections = self.intersections.clone();
        for i in intersections.iter_mut().filter(|i| !i.is_virtual) {
            i.yellow_time = yellow;
        }
        Self::new(
            intersections,
            self.roads.clone(),
            self.lanes.clone(),
            self.movements.clone(),
        )
    }

    /// Consumes the network, returning its entity lists.
    pub fn into_parts(self) -> (Vec<Intersection>, Vec<Road>, Vec<Lane>, Vec<Movement>) {
        (self.intersections, self.roads, self.lanes, self.movements)
    }
}

/// Allowed movements of one phase.
pub fn phase_movements<'a>(
    net: &'a RoadNetwork,
    intersection_id: &str,
    phase_index: usize,
) -> Result<&'a BTreeSet<String>, ModelError> {
    let inter = net
        .intersection(intersection_id)
        .ok_or_else(|| ModelError::UnknownIntersection(intersection_id.to_string()))?;
    if inter.is_virtual {
        return Err(ModelError::VirtualIntersection(intersection_id.to_string()));
    }
    inter
        .phases
        .get(phase_index)
        .map(|p| &p.movements)
        .ok_or(ModelError::PhaseOutOfRange {
            intersection: intersection_id.to_string(),
            index: phase_index,
            count: inter.phases.len(),
        })
}

pub fn movement_endpoints<'a>(
    net: &'a RoadNetwork,
    movement_id: &str,
) -> Result<(&'a str, &'a str), ModelError> {
    net.movement(movement_id)
        .map(|m| (m.in_lane.as_str(), m.out_lane.as_str()))
        .ok_or_else(|| ModelError::UnknownMovement(movement_id.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    DuplicateId,
    DanglingReference,
    NonPositiveLength,
    NonPositiveSpeed,
    NoLanes,
    LaneMismatch,
    SelfLoop,
    MovementGeometry,
    NoPhases,
    EmptyPhase,
    PhaseIndexGap,
    PhaseMovementElsewhere,
    VirtualWithPhases,
    NegativeYellow,
    InvalidFlow,
    DisconnectedRoute,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub entity: String,
    pub detail: String,
}

/// Every invariant violation found in a network (and optionally its demand).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn count(&self, kind: IssueKind) -> usize {
        self.issues.iter().filter(|i| i.kind == kind).count()
    }

    fn push(&mut self, kind: IssueKind, entity: &str, detail: impl Into<String>) {
        self.issues.push(Issue {
            kind,
            entity: entity.to_string(),
            detail: detail.into(),
        });
    }

    fn finish(mut self) -> Self {
        self.issues.sort();
        self
    }

    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.issues.extend(other.issues);
        self.finish()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "no issues");
        }
        for (n, issue) in self.issues.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            write!(f, "{:?} `{}`: {}", issue.kind, issue.entity, issue.detail)?;
        }
        Ok(())
    }
}

fn report_duplicates<'a>(
    report: &mut ValidationReport,
    what: &str,
    ids: impl Iterator<Item = &'a str>,
) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            report.push(IssueKind::DuplicateId, id, format!("duplicate {what} id"));
        }
    }
}

/// Checks every network invariant. Violations are data: an empty report means
/// the network is well formed.
pub fn validate_network(net: &RoadNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();

    report_duplicates(&mut report, "intersection", net.intersections.iter().map(|i| i.id.as_str()));
    report_duplicates(&mut report, "road", net.roads.iter().map(|r| r.id.as_str()));
    report_duplicates(&mut report, "lane", net.lanes.iter().map(|l| l.id.as_str()));
    report_duplicates(&mut report, "movement", net.movements.iter().map(|m| m.id.as_str()));

    for road in &net.roads {
        for end in [&road.from, &road.to] {
            if net.intersection(end).is_none() {
                report.push(
                    IssueKind::DanglingReference,
                    &road.id,
                    format!("road endpoint `{end}` does not exist"),
                );
            }
        }
        if !(road.length > 0.0) {
            report.push(IssueKind::NonPositiveLength, &road.id, format!("length {}", road.length));
        }
        if !(road.speed_limit > 0.0) {
            report.push(
                IssueKind::NonPositiveSpeed,
                &road.id,
                format!("speed limit {}", road.speed_limit),
            );
        }
        if road.lanes.is_empty() {
            report.push(IssueKind::NoLanes, &road.id, "road has no lanes");
        }
        for (idx, lane_id) in road.lanes.iter().enumerate() {
            match net.lane(lane_id) {
                None => report.push(
                    IssueKind::DanglingReference,
                    &road.id,
                    format!("lane `{lane_id}` does not exist"),
                ),
                Some(lane) if lane.road != road.id || lane.index != idx => report.push(
                    IssueKind::LaneMismatch,
                    lane_id,
                    format!("lane listed at index {idx} of road `{}`", road.id),
                ),
                Some(_) => {}
            }
        }
    }

    for lane in &net.lanes {
        match net.road(&lane.road) {
            None => report.push(
                IssueKind::DanglingReference,
                &lane.id,
                format!("road `{}` does not exist", lane.road),
            ),
            Some(road) => {
                if road.lanes.get(lane.index) != Some(&lane.id) {
                    report.push(
                        IssueKind::LaneMismatch,
                        &lane.id,
                        format!("not listed at index {} of road `{}`", lane.index, road.id),
                    );
                }
                if lane.length != road.length {
                    report.push(
                        IssueKind::LaneMismatch,
                        &lane.id,
                        format!("lane length {} differs from road length {}", lane.length, road.length),
                    );
                }
            }
        }
        if !(lane.max_speed > 0.0) {
            report.push(IssueKind::NonPositiveSpeed, &lane.id, format!("max speed {}", lane.max_speed));
        }
    }

    for m in &net.movements {
        let in_lane = net.lane(&m.in_lane);
        let out_lane = net.lane(&m.out_lane);
        if in_lane.is_none() {
            report.push(
                IssueKind::DanglingReference,
                &m.id,
                format!("in-lane `{}` does not exist", m.in_lane),
            );
        }
        if out_lane.is_none() {
            report.push(
                IssueKind::DanglingReference,
                &m.id,
                format!("out-lane `{}` does not exist", m.out_lane),
            );
        }
        if m.in_lane == m.out_lane {
            report.push(IssueKind::SelfLoop, &m.id, "movement connects a lane to itself");
            continue;
        }
        if let (Some(a), Some(b)) = (in_lane, out_lane) {
            if let (Some(ra), Some(rb)) = (net.road(&a.road), net.road(&b.road)) {
                if ra.to != rb.from {
                    report.push(
                        IssueKind::MovementGeometry,
                        &m.id,
                        format!("road `{}` ends at `{}` but road `{}` starts at `{}`", ra.id, ra.to, rb.id, rb.from),
                    );
                }
            }
        }
    }

    for inter in &net.intersections {
        if !(inter.yellow_time >= 0.0) {
            report.push(IssueKind::NegativeYellow, &inter.id, format!("yellow time {}", inter.yellow_time));
        }
        if inter.is_virtual {
            if !inter.phases.is_empty() {
                report.push(IssueKind::VirtualWithPhases, &inter.id, "virtual intersection has phases");
            }
            continue;
        }
        if inter.phases.is_empty() {
            report.push(IssueKind::NoPhases, &inter.id, "signalized intersection has no phases");
        }
        for (expected, phase) in inter.phases.iter().enumerate() {
            if phase.index != expected {
                report.push(
                    IssueKind::PhaseIndexGap,
                    &inter.id,
                    format!("expected phase index {expected}, found {}", phase.index),
                );
                break;
            }
        }
        for phase in &inter.phases {
            if phase.movements.is_empty() {
                report.push(IssueKind::EmptyPhase, &inter.id, format!("phase {} has no movements", phase.index));
            }
            for mid in &phase.movements {
                match net.movement(mid) {
                    None => report.push(
                        IssueKind::DanglingReference,
                        &inter.id,
                        format!("phase {} references unknown movement `{mid}`", phase.index),
                    ),
                    Some(_) => {
                        if let Some(at) = net.movement_intersection(mid) {
                            if at != inter.id {
                                report.push(
                                    IssueKind::PhaseMovementElsewhere,
                                    &inter.id,
                                    format!("phase {} lists movement `{mid}` located at `{at}`", phase.index),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    report.finish()
}

/// Kinematic parameters of a vehicle class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub max_speed: f64,
    pub accel: f64,
    /// Carried through conversions; the engine brakes instantly.
    pub decel: f64,
    pub length: f64,
    pub min_gap: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            max_speed: 16.67,
            accel: 2.0,
            decel: 4.5,
            length: 5.0,
            min_gap: 2.5,
        }
    }
}

impl VehicleParams {
    pub fn is_valid(&self) -> bool {
        [self.max_speed, self.accel, self.decel, self.length, self.min_gap]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
    }
}

/// Whether a route lists every traversed road or only its two ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    #[default]
    Full,
    OriginDestination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub route: Vec<String>,
    pub route_kind: RouteKind,
    pub start_time: f64,
    pub end_time: f64,
    /// Seconds between consecutive spawns.
    pub interval: f64,
    pub vehicle: VehicleParams,
}

impl FlowSpec {
    pub fn is_incomplete(&self) -> bool {
        self.route_kind == RouteKind::OriginDestination
    }

    /// Departure times `start, start + interval, ... <= end`.
    pub fn departures(&self) -> impl Iterator<Item = f64> + '_ {
        (0u64..)
            .map(move |k| self.start_time + k as f64 * self.interval)
            .take_while(move |t| *t <= self.end_time)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.route.is_empty() {
            return Err("empty route".into());
        }
        if !(self.interval > 0.0) || !self.interval.is_finite() {
            return Err(format!("interval must be positive, got {}", self.interval));
        }
        if !(self.start_time <= self.end_time) || !self.end_time.is_finite() {
            return Err(format!(
                "start time {} is after end time {}",
                self.start_time, self.end_time
            ));
        }
        if !self.vehicle.is_valid() {
            return Err("vehicle parameters must be strictly positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSet {
    pub flows: Vec<FlowSpec>,
}

impl FlowSet {
    pub fn new(flows: Vec<FlowSpec>) -> Self {
        Self { flows }
    }

    /// Stable sort by first departure time.
    pub fn sorted_by_departure(&self) -> Self {
        let mut flows = self.flows.clone();
        flows.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        Self { flows }
    }

    pub fn is_sorted_by_departure(&self) -> bool {
        self.flows.windows(2).all(|w| w[0].start_time <= w[1].start_time)
    }
}

/// Two roads are consecutive on a route when the first ends where the second starts.
pub fn roads_connected(net: &RoadNetwork, a: &str, b: &str) -> bool {
    match (net.road(a), net.road(b)) {
        (Some(ra), Some(rb)) => ra.to == rb.from,
        _ => false,
    }
}

/// Checks demand against a network: known roads, positive parameters and
/// connected full routes.
pub fn validate_flows(net: &RoadNetwork, flows: &FlowSet) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (n, flow) in flows.flows.iter().enumerate() {
        let entity = format!("flow_{n}");
        if let Err(e) = flow.check() {
            report.push(IssueKind::InvalidFlow, &entity, e);
        }
        let mut known = true;
        for r in &flow.route {
            if net.road(r).is_none() {
                known = false;
                report.push(IssueKind::DanglingReference, &entity, format!("unknown road `{r}`"));
            }
        }
        if known && flow.route_kind == RouteKind::Full {
            for pair in flow.route.windows(2) {
                if !roads_connected(net, &pair[0], &pair[1]) {
                    report.push(
                        IssueKind::DisconnectedRoute,
                        &entity,
                        format!("roads `{}` and `{}` do not share an intersection", pair[0], pair[1]),
                    );
                }
            }
        }
    }
    report.finish()
}

/// Movements grouped by the intersection they belong to.
pub fn movements_by_intersection(net: &RoadNetwork) -> BTreeMap<String, Vec<&Movement>> {
    let mut out: BTreeMap<String, Vec<&Movement>> = BTreeMap::new();
    for m in &net.movements {
        if let Some(at) = net.movement_intersection(&m.id) {
            out.entry(at.to_string()).or_default().push(m);
        }
    }
    out
}
