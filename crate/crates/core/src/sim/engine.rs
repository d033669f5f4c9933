use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::topology::{InterIdx, LaneIdx, RoadIdx, Topology};
use super::{DepartSpeed, SimConfig, SimError};
use crate::model::{FlowSet, ModelError, RoadNetwork, RouteKind, VehicleParams};

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    /// Spawn order, starting at 0.
    pub id: u64,
    pub flow: usize,
    /// Index of the current road within the flow's route.
    pub route_pos: usize,
    pub lane: LaneIdx,
    /// Front bumper, meters from the lane start.
    pub position: f64,
    pub speed: f64,
    pub params: VehicleParams,
    pub enter_time: f64,
    pub cumulative_waiting: f64,
}

impl VehicleState {
    pub fn rear(&self) -> f64 {
        self.position - self.params.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalState {
    pub current_phase: usize,
    pub phase_elapsed: f64,
    /// Zero while green.
    pub yellow_remaining: f64,
    pub pending_phase: Option<usize>,
}

impl SignalState {
    fn initial() -> Self {
        Self {
            current_phase: 0,
            phase_elapsed: 0.0,
            yellow_remaining: 0.0,
            pending_phase: None,
        }
    }

    pub fn in_yellow(&self) -> bool {
        self.yellow_remaining > 0.0
    }

    /// The phase that is, or is about to become, green.
    pub fn target_phase(&self) -> usize {
        self.pending_phase.unwrap_or(self.current_phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub id: u64,
    pub flow: usize,
    pub enter_time: f64,
    pub exit_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinishedTrip {
    pub id: u64,
    pub enter_time: f64,
    pub exit_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub spawned: u32,
    pub finished: u32,
    /// Due vehicles that could not enter this tick and stay pending.
    pub blocked_spawns: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneQuery {
    Count,
    WaitingCount,
    WaitingTimeSum,
    MeanSpeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct FlowCursor {
    dispatched: u64,
    pending: u64,
}

/// Complete simulator snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub clock: f64,
    pub tick: u64,
    /// Vehicles per lane, front (largest position) first.
    lanes: Vec<VecDeque<VehicleState>>,
    /// `None` for virtual intersections.
    signals: Vec<Option<SignalState>>,
    rng: ChaCha8Rng,
    cursors: Vec<FlowCursor>,
    /// Indexed by vehicle id.
    trips: Vec<Trip>,
    finished: Vec<FinishedTrip>,
    blocked_total: u64,
}

#[derive(Debug)]
struct CompiledFlow {
    route: Vec<RoadIdx>,
    /// Lanes of `route[k]` from which the rest of the route can be driven,
    /// ordered by lane index within the road.
    feasible: Vec<Vec<LaneIdx>>,
    departures: Vec<f64>,
    vehicle: VehicleParams,
    free_flow: f64,
}

/// Read-only queries used by controllers and the environment.
pub trait TrafficView {
    fn topology(&self) -> &Topology;
    fn lane_vehicle_count(&self, lane: LaneIdx) -> usize;
    fn lane_waiting_count(&self, lane: LaneIdx) -> usize;
    fn signal(&self, intersection: InterIdx) -> Option<SignalState>;
}

/// A simulator instance: shared topology and demand plus an owned state.
#[derive(Debug, Clone)]
pub struct Engine {
    topo: Arc<Topology>,
    flows: Arc<Vec<CompiledFlow>>,
    cfg: SimConfig,
    state: SimState,
}

fn compile_flows(topo: &Topology, flows: &FlowSet) -> Result<Vec<CompiledFlow>, SimError> {
    let mut out = Vec::with_capacity(flows.flows.len());
    for (n, f) in flows.flows.iter().enumerate() {
        let err = |reason: String| SimError::Route { flow: n, reason };
        f.check().map_err(err)?;
        if f.route_kind == RouteKind::OriginDestination {
            return Err(err("incomplete route (origin/destination only)".into()));
        }
        let route = f
            .route
            .iter()
            .map(|r| {
                topo.road_index(r)
                    .ok_or_else(|| err(format!("unknown road `{r}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for w in route.windows(2) {
            if topo.roads[w[0]].to != topo.roads[w[1]].from {
                return Err(err(format!(
                    "incomplete route: `{}` is not followed by `{}`",
                    topo.roads[w[0]].id, topo.roads[w[1]].id
                )));
            }
        }
        let mut feasible: Vec<Vec<LaneIdx>> = vec![Vec::new(); route.len()];
        let last = route.len() - 1;
        feasible[last] = topo.roads[route[last]].lanes.clone();
        for k in (0..last).rev() {
            let (head, tail) = feasible.split_at_mut(k + 1);
            head[k] = topo.roads[route[k]]
                .lanes
                .iter()
                .copied()
                .filter(|&l| {
                    topo.lanes[l]
                        .movements
                        .iter()
                        .any(|&m| tail[0].contains(&topo.movements[m].out_lane))
                })
                .collect();
            if head[k].is_empty() {
                return Err(err(format!(
                    "no lane movement leads from `{}` to `{}`",
                    topo.roads[route[k]].id,
                    topo.roads[route[k + 1]].id
                )));
            }
        }
        out.push(CompiledFlow {
            free_flow: topo.free_flow_time(&route),
            route,
            feasible,
            departures: f.departures().collect(),
            vehicle: f.vehicle,
        });
    }
    Ok(out)
}

impl Engine {
    pub fn new(net: &RoadNetwork, flows: &FlowSet, cfg: SimConfig) -> Result<Self, SimError> {
        let topo = Arc::new(Topology::build(net)?);
        Self::with_topology(topo, flows, cfg)
    }

    pub fn with_topology(topo: Arc<Topology>, flows: &FlowSet, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.check()?;
        let flows = Arc::new(compile_flows(&topo, flows)?);
        let state = Self::initial_state(&topo, &flows, cfg.seed);
        Ok(Self { topo, flows, cfg, state })
    }

    fn initial_state(topo: &Topology, flows: &[CompiledFlow], seed: u64) -> SimState {
        SimState {
            clock: 0.0,
            tick: 0,
            lanes: vec![VecDeque::new(); topo.lanes.len()],
            signals: topo
                .intersections
                .iter()
                .map(|i| (!i.is_virtual).then(SignalState::initial))
                .collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cursors: vec![FlowCursor::default(); flows.len()],
            trips: Vec::new(),
            finished: Vec::new(),
            blocked_total: 0,
        }
    }

    /// Fresh state (clock 0, no vehicles, every signal at phase 0) with a new seed.
    pub fn reset(&mut self, seed: u64) {
        self.cfg.seed = seed;
        self.state = Self::initial_state(&self.topo, &self.flows, seed);
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn shared_topology(&self) -> Arc<Topology> {
        Arc::clone(&self.topo)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn clock(&self) -> f64 {
        self.state.clock
    }

    pub fn is_finished(&self) -> bool {
        self.state.tick >= self.cfg.ticks()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.state.rng
    }

    pub fn lane_vehicles(&self, lane: LaneIdx) -> impl ExactSizeIterator<Item = &VehicleState> {
        self.state.lanes[lane].iter()
    }

    /// All vehicles in the network, ordered by id.
    pub fn vehicles(&self) -> Vec<&VehicleState> {
        let mut all: Vec<&VehicleState> = self.state.lanes.iter().flatten().collect();
        all.sort_by_key(|v| v.id);
        all
    }

    pub fn vehicles_in_network(&self) -> usize {
        self.state.lanes.iter().map(VecDeque::len).sum()
    }

    pub fn total_spawned(&self) -> usize {
        self.state.trips.len()
    }

    pub fn total_blocked(&self) -> u64 {
        self.state.blocked_total
    }

    /// Enter/exit log of every vehicle that entered, indexed by vehicle id.
    pub fn trips(&self) -> &[Trip] {
        &self.state.trips
    }

    /// Finished trips in completion order.
    pub fn finished(&self) -> &[FinishedTrip] {
        &self.state.finished
    }

    /// Free-flow travel time of a flow's route.
    pub fn free_flow_time(&self, flow: usize) -> f64 {
        self.flows[flow].free_flow
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn signal_state(&self, intersection: InterIdx) -> Option<&SignalState> {
        self.state.signals[intersection].as_ref()
    }

    pub fn lane_query(&self, lane: LaneIdx, kind: LaneQuery) -> f64 {
        let vehicles = &self.state.lanes[lane];
        let threshold = self.cfg.waiting_speed_threshold;
        match kind {
            LaneQuery::Count => vehicles.len() as f64,
            LaneQuery::WaitingCount => vehicles.iter().filter(|v| v.speed < threshold).count() as f64,
            LaneQuery::WaitingTimeSum => vehicles.iter().map(|v| v.cumulative_waiting).sum(),
            LaneQuery::MeanSpeed => {
                if vehicles.is_empty() {
                    self.topo.lanes[lane].max_speed
                } else {
                    vehicles.iter().map(|v| v.speed).sum::<f64>() / vehicles.len() as f64
                }
            }
        }
    }

    /// [`Engine::lane_query`] by lane id.
    pub fn lane_query_by_id(&self, lane_id: &str, kind: LaneQuery) -> Result<f64, SimError> {
        let lane = self
            .topo
            .lane_index(lane_id)
            .ok_or_else(|| ModelError::UnknownLane(lane_id.to_string()))?;
        Ok(self.lane_query(lane, kind))
    }

    /// Requests a phase. Switching to a different phase starts a yellow
    /// interlude; a request during yellow only replaces the pending phase.
    pub fn set_phase(&mut self, intersection: InterIdx, phase: usize) -> Result<(), SimError> {
        let info = &self.topo.intersections[intersection];
        if info.is_virtual {
            return Err(ModelError::VirtualIntersection(info.id.clone()).into());
        }
        if phase >= info.phase_count() {
            return Err(ModelError::PhaseOutOfRange {
                intersection: info.id.clone(),
                index: phase,
                count: info.phase_count(),
            }
            .into());
        }
        let yellow = info.yellow_time;
        let s = self.state.signals[intersection].as_mut().expect("signalized");
        if s.in_yellow() {
            s.pending_phase = Some(phase);
        } else if phase != s.current_phase {
            if yellow > 0.0 {
                s.yellow_remaining = yellow;
                s.pending_phase = Some(phase);
            } else {
                s.current_phase = phase;
                s.phase_elapsed = 0.0;
            }
        }
        Ok(())
    }

    pub fn set_phase_by_id(&mut self, intersection_id: &str, phase: usize) -> Result<(), SimError> {
        let i = self
            .topo
            .intersection_index(intersection_id)
            .ok_or_else(|| ModelError::UnknownIntersection(intersection_id.to_string()))?;
        self.set_phase(i, phase)
    }

    fn permitted(&self, movement: usize) -> bool {
        let m = &self.topo.movements[movement];
        match &self.state.signals[m.intersection] {
            None => true,
            Some(s) => !s.in_yellow() && m.phase_mask & (1u64 << s.current_phase) != 0,
        }
    }

    /// Lane of the next road the front vehicle of `lane` may enter now.
    fn next_lane(&self, lane: LaneIdx, vehicle: &VehicleState, arrivals: &[u32]) -> Option<LaneIdx> {
        let flow = &self.flows[vehicle.flow];
        let allowed = &flow.feasible[vehicle.route_pos + 1];
        self.topo.lanes[lane]
            .movements
            .iter()
            .copied()
            .filter(|&m| allowed.contains(&self.topo.movements[m].out_lane) && self.permitted(m))
            .map(|m| self.topo.movements[m].out_lane)
            .min_by_key(|&l| {
                (
                    self.state.lanes[l].len() + arrivals[l] as usize,
                    self.topo.lanes[l].index,
                )
            })
    }

    fn tail_space(&self, lane: LaneIdx) -> f64 {
        self.state.lanes[lane]
            .back()
            .map(VehicleState::rear)
            .unwrap_or(self.topo.lanes[lane].length)
    }

    /// Advances the simulation by one tick.
    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        if self.is_finished() {
            return Err(SimError::PastHorizon(self.cfg.horizon));
        }
        let dt = self.cfg.dt;
        let threshold = self.cfg.waiting_speed_threshold;
        let tick = self.state.tick + 1;
        let now = tick as f64 * dt;
        let mut outcome = StepOutcome::default();

        // (1) signal timers
        for s in self.state.signals.iter_mut().flatten() {
            if s.in_yellow() {
                s.yellow_remaining -= dt;
                if s.yellow_remaining <= 1e-9 {
                    s.yellow_remaining = 0.0;
                    s.current_phase = s.pending_phase.take().expect("pending phase during yellow");
                    s.phase_elapsed = 0.0;
                }
            } else {
                s.phase_elapsed += dt;
            }
        }

        // (2)-(3) speeds and positions, lane by lane, front to back
        let lane_count = self.topo.lanes.len();
        let mut reserved = vec![f64::INFINITY; lane_count];
        let mut arrival_count = vec![0u32; lane_count];
        let mut arrivals: Vec<VehicleState> = Vec::new();
        for l in 0..lane_count {
            if self.state.lanes[l].is_empty() {
                continue;
            }
            let mut queue = std::mem::take(&mut self.state.lanes[l]);
            let lane_length = self.topo.lanes[l].length;
            let lane_speed = self.topo.lanes[l].max_speed;
            let mut leader_rear: Option<f64> = None;
            let mut leaving: Option<(Option<LaneIdx>, VehicleState)> = None;
            for (idx, v) in queue.iter_mut().enumerate() {
                let free_speed = v.params.max_speed.min(lane_speed);
                let desired = (v.speed + v.params.accel * dt).min(free_speed);
                let mut target = None;
                let gap = match leader_rear {
                    Some(rear) => rear - v.position,
                    None if v.route_pos + 1 == self.flows[v.flow].route.len() => f64::INFINITY,
                    None => match self.next_lane(l, v, &arrival_count) {
                        None => lane_length - v.position,
                        Some(next) => {
                            target = Some(next);
                            lane_length - v.position + self.tail_space(next).min(reserved[next])
                        }
                    },
                };
                let safe = ((gap - v.params.min_gap) / dt).max(0.0);
                let speed = desired.min(safe).max(0.0);
                leader_rear = Some(v.rear());
                v.speed = speed;
                v.position += speed * dt;
                if speed < threshold {
                    v.cumulative_waiting += dt;
                }
                if idx == 0 && v.position > lane_length {
                    leaving = Some((target, v.clone()));
                }
            }
            if let Some((target, mut v)) = leaving {
                queue.pop_front();
                match target {
                    None => {
                        let trip = &mut self.state.trips[v.id as usize];
                        trip.exit_time = Some(now);
                        self.state.finished.push(FinishedTrip {
                            id: v.id,
                            enter_time: v.enter_time,
                            exit_time: now,
                        });
                        outcome.finished += 1;
                    }
                    Some(next) => {
                        v.position -= lane_length;
                        v.lane = next;
                        v.route_pos += 1;
                        v.speed = v.speed.min(self.topo.lanes[next].max_speed);
                        reserved[next] = reserved[next].min(v.rear());
                        arrival_count[next] += 1;
                        arrivals.push(v);
                    }
                }
            }
            self.state.lanes[l] = queue;
        }
        for v in arrivals {
            let lane = v.lane;
            self.state.lanes[lane].push_back(v);
        }

        // (4) spawning
        for f in 0..self.flows.len() {
            let flow = &self.flows[f];
            let cursor = &mut self.state.cursors[f];
            while (cursor.dispatched as usize) < flow.departures.len()
                && flow.departures[cursor.dispatched as usize] < now - 1e-9
            {
                cursor.dispatched += 1;
                cursor.pending += 1;
            }
            while self.state.cursors[f].pending > 0 {
                let params = flow.vehicle;
                let headroom = params.length + params.min_gap;
                let lane = flow.feasible[0]
                    .iter()
                    .copied()
                    .filter(|&l| self.state.lanes[l].back().is_none_or(|b| b.rear() >= headroom))
                    .min_by_key(|&l| (self.state.lanes[l].len(), self.topo.lanes[l].index));
                let Some(lane) = lane else { break };
                let free_speed = params.max_speed.min(self.topo.lanes[lane].max_speed);
                let speed = match self.cfg.depart_speed {
                    DepartSpeed::Zero => 0.0,
                    DepartSpeed::Max => free_speed.min(((self.tail_space(lane) - params.min_gap) / dt).max(0.0)),
                };
                let id = self.state.trips.len() as u64;
                self.state.trips.push(Trip {
                    id,
                    flow: f,
                    enter_time: now,
                    exit_time: None,
                });
                self.state.lanes[lane].push_back(VehicleState {
                    id,
                    flow: f,
                    route_pos: 0,
                    lane,
                    position: 0.0,
                    speed,
                    params,
                    enter_time: now,
                    // (5) applies to newly entered vehicles too
                    cumulative_waiting: if speed < threshold { dt } else { 0.0 },
                });
                self.state.cursors[f].pending -= 1;
                outcome.spawned += 1;
            }
            let pending = self.state.cursors[f].pending;
            outcome.blocked_spawns += pending as u32;
            self.state.blocked_total += pending;
        }

        self.state.tick = tick;
        self.state.clock = now;
        Ok(outcome)
    }
}

impl TrafficView for Engine {
    fn topology(&self) -> &Topology {
        &self.topo
    }

    fn lane_vehicle_count(&self, lane: LaneIdx) -> usize {
        self.state.lanes[lane].len()
    }

    fn lane_waiting_count(&self, lane: LaneIdx) -> usize {
        let threshold = self.cfg.waiting_speed_threshold;
        self.state.lanes[lane].iter().filter(|v| v.speed < threshold).count()
    }

    fn signal(&self, intersection: InterIdx) -> Option<SignalState> {
        self.state.signals[intersection]
    }
}
