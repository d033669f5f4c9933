#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscbench::fixtures::{self, DemandProfile, PhasePlan};
use tscbench::model::{FlowSet, Point, RoadNetwork, VehicleParams};
use tscbench::sim::{Engine, InterIdx, LaneIdx, SignalState, SimConfig, SimError, Topology, TrafficView, VehicleState};

/// A grid of random shape with perturbed geometry, speeds, yellow times and a
/// few movements removed. Always passes validation.
pub fn random_network(seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.gen_range(1..=3);
    let cols = rng.gen_range(1..=3);
    let plan = if rng.gen_bool(0.5) { PhasePlan::Eight } else { PhasePlan::Four };
    let (mut inters, mut roads, mut lanes, mut moves) = fixtures::grid(rows, cols, plan).into_parts();
    for i in &mut inters {
        i.position = Point::new(i.position.x + rng.gen_range(-20.0..20.0), i.position.y + rng.gen_range(-20.0..20.0));
        if !i.is_virtual {
            i.yellow_time = [0.0, 2.0, 3.0, 5.0][rng.gen_range(0..4)];
        }
    }
    for r in &mut roads {
        r.length = rng.gen_range(60.0..500.0);
        r.speed_limit = rng.gen_range(8.0..20.0);
    }
    for l in &mut lanes {
        let road = roads.iter().find(|r| r.id == l.road).unwrap();
        l.length = road.length;
        l.max_speed = road.speed_limit * rng.gen_range(0.7..=1.0);
    }
    let mut dropped = Vec::new();
    for m in &moves {
        if !rng.gen_bool(0.08) {
            continue;
        }
        let at = inters
            .iter()
            .position(|i| i.phases.iter().any(|p| p.movements.contains(&m.id)))
            .unwrap();
        let keeps_phases = inters[at]
            .phases
            .iter()
            .all(|p| !p.movements.contains(&m.id) || p.movements.len() > 1);
        if keeps_phases {
            dropped.push(m.id.clone());
            for p in &mut inters[at].phases {
                p.movements.remove(&m.id);
            }
        }
    }
    moves.retain(|m| !dropped.contains(&m.id));
    RoadNetwork::new(inters, roads, lanes, moves)
}

/// Random demand over the boundary roads of `random_network(seed)`'s grid.
pub fn random_flows(seed: u64, net: &RoadNetwork) -> FlowSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf10f);
    let (rows, cols) = grid_shape(net);
    let profile = DemandProfile {
        east_west_straight: rng.gen_range(3.0..20.0),
        north_south_straight: rng.gen_range(3.0..20.0),
        turning: rng.gen_range(10.0..60.0),
        end_time: rng.gen_range(100.0..3000.0),
    };
    let mut flows = fixtures::demand(rows, cols, profile, rng.gen());
    for f in &mut flows.flows {
        f.vehicle = VehicleParams {
            max_speed: rng.gen_range(10.0..20.0),
            accel: rng.gen_range(1.0..3.0),
            decel: rng.gen_range(3.0..6.0),
            length: rng.gen_range(4.0..6.0),
            min_gap: rng.gen_range(1.5..3.0),
        };
    }
    // scramble order so sorting is observable
    let n = flows.flows.len();
    for i in (1..n).rev() {
        flows.flows.swap(i, rng.gen_range(0..=i));
    }
    flows
}

/// (rows, cols) of a fixture grid, read back from its signalized ids.
pub fn grid_shape(net: &RoadNetwork) -> (usize, usize) {
    let mut rows = 0;
    let mut cols = 0;
    for i in net.intersections().iter().filter(|i| !i.is_virtual) {
        let mut parts = i.id.rsplit('_');
        let y: usize = parts.next().unwrap().parse().unwrap();
        let x: usize = parts.next().unwrap().parse().unwrap();
        rows = rows.max(y);
        cols = cols.max(x);
    }
    (rows, cols)
}

/// Some movement leads from a lane of `a` to a lane of `b`.
pub fn movement_link(net: &RoadNetwork, a: &str, b: &str) -> bool {
    net.movements()
        .iter()
        .any(|m| net.lane(&m.in_lane).unwrap().road == a && net.lane(&m.out_lane).unwrap().road == b)
}

/// Independent shortest-path oracle: Bellman-Ford relaxation of
/// (cost, hops, id sequence) labels until a fixed point.
pub fn oracle_path(net: &RoadNetwork, from: &str, to: &str) -> Option<Vec<String>> {
    let roads: Vec<&str> = net.roads().iter().map(|r| r.id.as_str()).collect();
    let cost = |r: &str| {
        let road = net.road(r).unwrap();
        road.length / road.speed_limit
    };
    let better = |a: &(f64, Vec<String>), b: &(f64, Vec<String>)| {
        a.0 < b.0 || (a.0 == b.0 && (a.1.len(), &a.1) < (b.1.len(), &b.1))
    };
    let links: std::collections::HashSet<(&str, &str)> = net
        .movements()
        .iter()
        .map(|m| (net.lane(&m.in_lane).unwrap().road.as_str(), net.lane(&m.out_lane).unwrap().road.as_str()))
        .collect();
    let mut label: HashMap<String, (f64, Vec<String>)> = HashMap::new();
    label.insert(from.to_string(), (cost(from), vec![from.to_string()]));
    loop {
        let mut changed = false;
        for a in &roads {
            let Some(la) = label.get(*a).cloned() else { continue };
            for b in &roads {
                if la.1.iter().any(|p| p == b) || !links.contains(&(*a, *b)) {
                    continue;
                }
                let mut path = la.1.clone();
                path.push(b.to_string());
                let cand = (la.0 + cost(b), path);
                if label.get(*b).is_none_or(|cur| better(&cand, cur)) {
                    label.insert(b.to_string(), cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    label.remove(to).map(|(_, p)| p)
}

/// Conservation, gap and speed checks on the engine's current state.
pub fn check_engine(e: &Engine) -> Result<(), String> {
    let finished = e.finished().len();
    if e.total_spawned() != e.vehicles_in_network() + finished {
        return Err(format!(
            "t={}: spawned {} != in-network {} + finished {finished}",
            e.clock(),
            e.total_spawned(),
            e.vehicles_in_network()
        ));
    }
    let topo = e.topology();
    for (l, lane) in topo.lanes.iter().enumerate() {
        let mut leader: Option<&VehicleState> = None;
        for v in e.lane_vehicles(l) {
            let bound = v.params.max_speed.min(lane.max_speed);
            if !(v.speed >= 0.0 && v.speed <= bound + 1e-9) {
                return Err(format!("t={}: vehicle {} speed {} outside [0, {bound}]", e.clock(), v.id, v.speed));
            }
            if let Some(lead) = leader {
                let gap = lead.position - lead.params.length - v.position;
                if gap < -1e-9 {
                    return Err(format!("t={}: gap {gap} behind vehicle {} on {}", e.clock(), lead.id, lane.id));
                }
            }
            leader = Some(v);
        }
    }
    Ok(())
}

/// `random_flows` restricted to routes the lane movements can serve, since
/// dropped movements may cut some of them.
pub fn drivable_flows(seed: u64, net: &RoadNetwork) -> FlowSet {
    let mut flows = random_flows(seed, net);
    loop {
        match Engine::new(net, &flows, SimConfig::default()) {
            Err(SimError::Route { flow, .. }) => {
                flows.flows.remove(flow);
            }
            Err(e) => panic!("seed {seed}: {e}"),
            Ok(_) => return flows,
        }
    }
}

/// Max relative error between `Mlp::backward` and central differences of
/// `output · g` on a random network, input and `g`. Parameters whose
/// perturbation flips a ReLU are skipped; the count of skipped ones is returned.
pub fn gradient_check(seed: u64) -> (f64, usize) {
    use tscbench::agent::Mlp;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=3);
    let mut sizes = vec![rng.gen_range(1..=12)];
    for _ in 0..depth {
        sizes.push(rng.gen_range(1..=16));
    }
    sizes.push(rng.gen_range(1..=8));
    let mut net = Mlp::new(&sizes, &mut rng);
    // nonzero biases so the check covers them
    let mut params = net.params();
    params.iter_mut().for_each(|p| *p += rng.gen_range(-0.1..0.1));
    net.set_params(&params).unwrap();
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let g: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let analytic = net.backward(&x, &g).unwrap().flat();

    let h = 1e-5;
    let pattern = |n: &Mlp| -> Vec<bool> { hidden_signs(n, &x) };
    let base = pattern(&net);
    let objective = |n: &Mlp| -> f64 { n.forward(&x).unwrap().iter().zip(&g).map(|(o, w)| o * w).sum() };
    let (mut worst, mut skipped) = (0.0f64, 0);
    let mut probe = net.clone();
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] += h;
        probe.set_params(&p).unwrap();
        let (up, up_signs) = (objective(&probe), pattern(&probe));
        p[k] -= 2.0 * h;
        probe.set_params(&p).unwrap();
        let (down, down_signs) = (objective(&probe), pattern(&probe));
        if up_signs != base || down_signs != base {
            skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    (worst, skipped)
}

/// Activation pattern of the hidden ReLUs for input `x`.
fn hidden_signs(net: &tscbench::agent::Mlp, x: &[f64]) -> Vec<bool> {
    let mut a = x.to_vec();
    let mut signs = Vec::new();
    let layers = net.layers();
    for (n, l) in layers.iter().enumerate() {
        let z: Vec<f64> = (0..l.outputs)
            .map(|o| l.bias[o] + (0..l.inputs).map(|i| l.weights[o * l.inputs + i] * a[i]).sum::<f64>())
            .collect();
        if n + 1 < layers.len() {
            signs.extend(z.iter().map(|&v| v > 0.0));
            a = z.iter().map(|&v| v.max(0.0)).collect();
        }
    }
    signs
}

/// Static lane waiting counts plus a phase, as seen by a controller.
pub struct Snapshot {
    pub topo: Topology,
    pub waiting: Vec<usize>,
    pub phase: usize,
}

impl TrafficView for Snapshot {
    fn topology(&self) -> &Topology {
        &self.topo
    }
    fn lane_vehicle_count(&self, lane: LaneIdx) -> usize {
        self.waiting[lane] + 1
    }
    fn lane_waiting_count(&self, lane: LaneIdx) -> usize {
        self.waiting[lane]
    }
    fn signal(&self, _: InterIdx) -> Option<SignalState> {
        Some(SignalState {
            current_phase: self.phase,
            phase_elapsed: 0.0,
            yellow_remaining: 0.0,
            pending_phase: None,
        })
    }
}

/// A random network, one of its signalized intersections and random queues.
pub fn random_state(seed: u64) -> (RoadNetwork, Snapshot, InterIdx) {
    let net = random_network(seed);
    let topo = Topology::build(&net).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inter = topo.signalized[rng.gen_range(0..topo.signalized.len())];
    let cap = rng.gen_range(1..40);
    let waiting = (0..topo.lanes.len()).map(|_| rng.gen_range(0..=cap)).collect();
    let phase = rng.gen_range(0..topo.intersections[inter].phase_count());
    (net, Snapshot { topo, waiting, phase }, inter)
}

/// Exhaustive per-phase argmax, lowest index on ties, computed from the
/// model's movement ids.
pub fn oracle_max_pressure(net: &RoadNetwork, s: &Snapshot, inter: InterIdx) -> usize {
    let model = net.intersection(&s.topo.intersections[inter].id).unwrap();
    let w = |lane: &str| s.waiting[s.topo.lane_index(lane).unwrap()] as i64;
    let pressures: Vec<i64> = model
        .phases
        .iter()
        .map(|p| {
            p.movements
                .iter()
                .map(|id| {
                    let m = net.movement(id).unwrap();
                    w(&m.in_lane) - w(&m.out_lane)
                })
                .sum()
        })
        .collect();
    let best = *pressures.iter().max().unwrap();
    pressures.iter().position(|&p| p == best).unwrap()
}
