//! Synthetic scenarios: rows × cols signalized grids surrounded by virtual
//! boundary nodes, with straight/turning demand entering from every side.
//!
//! `grid(1, 1, ..)`, `grid(1, 3, ..)` and `grid(4, 4, ..)` mirror the usual
//! single-intersection, arterial and 4×4 grid benchmark shapes.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    FlowSet, FlowSpec, Intersection, Lane, Movement, Phase, Point, Road, RoadNetwork, RouteKind,
    TurnKind, VehicleParams,
};

pub const BLOCK_LENGTH: f64 = 300.0;
pub const SPEED_LIMIT: f64 = 16.67;
pub const YELLOW_TIME: f64 = 5.0;
pub const LANES_PER_ROAD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePlan {
    Four,
    Eight,
}

/// Travel headings, counter-clockwise from east.
const EAST: usize = 0;
const NORTH: usize = 1;
const WEST: usize = 2;
const SOUTH: usize = 3;

fn step(x: i64, y: i64, heading: usize) -> (i64, i64) {
    match heading {
        EAST => (x + 1, y),
        NORTH => (x, y + 1),
        WEST => (x - 1, y),
        _ => (x, y - 1),
    }
}

pub fn intersection_id(x: i64, y: i64) -> String {
    format!("intersection_{x}_{y}")
}

pub fn road_id(x: i64, y: i64, heading: usize) -> String {
    format!("road_{x}_{y}_{heading}")
}

pub fn lane_id(road: &str, index: usize) -> String {
    format!("{road}_{index}")
}

pub fn movement_id(in_lane: &str, out_lane: &str) -> String {
    format!("{in_lane}|{out_lane}")
}

struct Grid {
    rows: i64,
    cols: i64,
}

impl Grid {
    fn signalized(&self, x: i64, y: i64) -> bool {
        (1..=self.cols).contains(&x) && (1..=self.rows).contains(&y)
    }

    fn boundary(&self, x: i64, y: i64) -> bool {
        let on_x_edge = (x == 0 || x == self.cols + 1) && (1..=self.rows).contains(&y);
        let on_y_edge = (y == 0 || y == self.rows + 1) && (1..=self.cols).contains(&x);
        on_x_edge || on_y_edge
    }

    fn exists(&self, x: i64, y: i64) -> bool {
        self.signalized(x, y) || self.boundary(x, y)
    }

    fn nodes(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for x in 0..=self.cols + 1 {
            for y in 0..=self.rows + 1 {
                if self.exists(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    fn has_road(&self, x: i64, y: i64, heading: usize) -> bool {
        let (nx, ny) = step(x, y, heading);
        self.exists(x, y) && self.exists(nx, ny) && (self.signalized(x, y) || self.signalized(nx, ny))
    }
}

fn turn_heading(heading: usize, turn: TurnKind) -> usize {
    match turn {
        TurnKind::Left => (heading + 1) % 4,
        TurnKind::Straight => heading,
        TurnKind::Right => (heading + 3) % 4,
    }
}

fn lane_role(turn: TurnKind) -> usize {
    match turn {
        TurnKind::Left => 0,
        TurnKind::Straight => 1,
        TurnKind::Right => 2,
    }
}

/// (approach headings, turns) granted green by each phase.
fn phase_table(plan: PhasePlan) -> Vec<(Vec<usize>, Vec<TurnKind>)> {
    use TurnKind::*;
    let through = vec![Straight, Right];
    let all = vec![Left, Straight, Right];
    match plan {
        PhasePlan::Eight => vec![
            (vec![EAST, WEST], through.clone()),
            (vec![NORTH, SOUTH], through),
            (vec![EAST, WEST], vec![Left]),
            (vec![NORTH, SOUTH], vec![Left]),
            (vec![EAST], all.clone()),
            (vec![WEST], all.clone()),
            (vec![NORTH], all.clone()),
            (vec![SOUTH], all),
        ],
        PhasePlan::Four => vec![
            (vec![EAST, WEST], through.clone()),
            (vec![EAST, WEST], vec![Left]),
            (vec![NORTH, SOUTH], through),
            (vec![NORTH, SOUTH], vec![Left]),
        ],
    }
}

/// A rows × cols grid of signalized intersections, 300 m blocks, three lanes
/// per road (left, straight, right by index).
pub fn grid(rows: usize, cols: usize, plan: PhasePlan) -> RoadNetwork {
    let g = Grid {
        rows: rows as i64,
        cols: cols as i64,
    };
    let mut intersections = Vec::new();
    let mut roads = Vec::new();
    let mut lanes = Vec::new();
    let mut movements = Vec::new();

    for (x, y) in g.nodes() {
        for heading in 0..4 {
            if !g.has_road(x, y, heading) {
                continue;
            }
            let (nx, ny) = step(x, y, heading);
            let id = road_id(x, y, heading);
            let lane_ids: Vec<String> = (0..LANES_PER_ROAD).map(|i| lane_id(&id, i)).collect();
            for (index, lid) in lane_ids.iter().enumerate() {
                lanes.push(Lane {
                    id: lid.clone(),
                    road: id.clone(),
                    index,
                    length: BLOCK_LENGTH,
                    max_speed: SPEED_LIMIT,
                });
            }
            roads.push(Road {
                id,
                from: intersection_id(x, y),
                to: intersection_id(nx, ny),
                length: BLOCK_LENGTH,
                lanes: lane_ids,
                speed_limit: SPEED_LIMIT,
            });
        }
    }

    for (x, y) in g.nodes() {
        let position = Point::new(x as f64 * BLOCK_LENGTH, y as f64 * BLOCK_LENGTH);
        let id = intersection_id(x, y);
        if !g.signalized(x, y) {
            intersections.push(Intersection {
                id,
                position,
                is_virtual: true,
                phases: Vec::new(),
                yellow_time: YELLOW_TIME,
            });
            continue;
        }
        // movements by (approach heading, turn)
        let mut by_approach: Vec<(usize, TurnKind, String)> = Vec::new();
        for heading in 0..4 {
            let (fx, fy) = step(x, y, (heading + 2) % 4);
            let in_road = road_id(fx, fy, heading);
            for turn in [TurnKind::Left, TurnKind::Straight, TurnKind::Right] {
                let out_road = road_id(x, y, turn_heading(heading, turn));
                let in_lane = lane_id(&in_road, lane_role(turn));
                for out_index in 0..LANES_PER_ROAD {
                    let out_lane = lane_id(&out_road, out_index);
                    let mid = movement_id(&in_lane, &out_lane);
                    movements.push(Movement {
                        id: mid.clone(),
                        in_lane: in_lane.clone(),
                        out_lane,
                        turn,
                    });
                    by_approach.push((heading, turn, mid));
                }
            }
        }
        let phases = phase_table(plan)
            .into_iter()
            .enumerate()
            .map(|(index, (headings, turns))| Phase {
                index,
                movements: by_approach
                    .iter()
                    .filter(|(h, t, _)| headings.contains(h) && turns.contains(t))
                    .map(|(_, _, m)| m.clone())
                    .collect::<BTreeSet<_>>(),
            })
            .collect();
        intersections.push(Intersection {
            id,
            position,
            is_virtual: false,
            phases,
            yellow_time: YELLOW_TIME,
        });
    }

    RoadNetwork::new(intersections, roads, lanes, movements)
}

/// Spawn intervals (seconds) for the synthetic demand. Larger is lighter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandProfile {
    /// Straight-through traffic entering from the west or east.
    pub east_west_straight: f64,
    /// Straight-through traffic entering from the north or south.
    pub north_south_straight: f64,
    /// Left or right turn at the first intersection reached.
    pub turning: f64,
    pub end_time: f64,
}

impl DemandProfile {
    /// Heavier east-west demand than north-south.
    pub fn asymmetric() -> Self {
        Self {
            east_west_straight: 6.0,
            north_south_straight: 15.0,
            turning: 30.0,
            end_time: 3000.0,
        }
    }

    pub fn balanced() -> Self {
        Self {
            east_west_straight: 10.0,
            north_south_straight: 10.0,
            turning: 30.0,
            end_time: 3000.0,
        }
    }
}

/// Origin-destination demand: from every boundary entry road, one flow going
/// straight across and one flow per turn taken at the first intersection, each
/// continuing straight to the boundary. Routes are listed in full.
///
/// `seed` jitters each flow's first departure within one interval; seed 0
/// means no jitter.
pub fn demand(rows: usize, cols: usize, profile: DemandProfile, seed: u64) -> FlowSet {
    let g = Grid {
        rows: rows as i64,
        cols: cols as i64,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flows = Vec::new();
    for (x, y) in g.nodes() {
        if !g.boundary(x, y) {
            continue;
        }
        for heading in 0..4 {
            let (nx, ny) = step(x, y, heading);
            if !g.signalized(nx, ny) {
                continue;
            }
            for turn in [TurnKind::Straight, TurnKind::Left, TurnKind::Right] {
                let mut route = vec![road_id(x, y, heading)];
                let out = turn_heading(heading, turn);
                let (mut cx, mut cy) = (nx, ny);
                while g.signalized(cx, cy) {
                    route.push(road_id(cx, cy, out));
                    (cx, cy) = step(cx, cy, out);
                }
                let interval = match turn {
                    TurnKind::Straight if heading == EAST || heading == WEST => profile.east_west_straight,
                    TurnKind::Straight => profile.north_south_straight,
                    _ => profile.turning,
                };
                let start_time = if seed == 0 {
                    0.0
                } else {
                    rng.gen_range(0..interval.max(1.0) as u64) as f64
                };
                flows.push(FlowSpec {
                    route,
                    route_kind: RouteKind::Full,
                    start_time,
                    end_time: profile.end_time,
                    interval,
                    vehicle: VehicleParams::default(),
                });
            }
        }
    }
    FlowSet::new(flows)
}

/// The same demand with routes reduced to their origin and destination roads.
pub fn origin_destination_only(flows: &FlowSet) -> FlowSet {
    FlowSet::new(
        flows
            .flows
            .iter()
            .map(|f| FlowSpec {
                route: vec![f.route[0].clone(), f.route[f.route.len() - 1].clone()],
                route_kind: RouteKind::OriginDestination,
                ..f.clone()
            })
            .collect(),
    )
}

/// Named scenarios shipped under `fixtures/`.
pub fn scenario(name: &str) -> Option<(RoadNetwork, FlowSet)> {
    let profile = DemandProfile::asymmetric();
    let (rows, cols, plan) = match name {
        "grid1x1" => (1, 1, PhasePlan::Eight),
        "grid1x1_4phase" => (1, 1, PhasePlan::Four),
        "arterial1x3" => (1, 3, PhasePlan::Eight),
        "grid4x4" => (4, 4, PhasePlan::Eight),
        _ => return None,
    };
    Some((grid(rows, cols, plan), demand(rows, cols, profile, 0)))
}

pub const SCENARIOS: [&str; 4] = ["grid1x1", "grid1x1_4phase", "arterial1x3", "grid4x4"];
