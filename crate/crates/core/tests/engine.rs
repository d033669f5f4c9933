mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscbench::fixtures::{self, DemandProfile, PhasePlan};
use tscbench::sim::{Engine, LaneQuery, SimConfig, TrafficView};

fn random_engine(seed: u64, horizon: f64) -> Engine {
    let net = common::random_network(seed);
    let flows = common::drivable_flows(seed, &net);
    let cfg = SimConfig {
        horizon,
        seed,
        ..SimConfig::default()
    };
    Engine::new(&net, &flows, cfg).unwrap()
}

/// Steps `e` to the horizon, switching phases at random.
fn drive(e: &mut Engine, rng: &mut ChaCha8Rng, mut each: impl FnMut(&Engine)) {
    let signalized = e.topology().signalized.clone();
    while !e.is_finished() {
        for &i in &signalized {
            if rng.gen_bool(0.1) {
                let k = e.topology().intersections[i].phase_count();
                e.set_phase(i, rng.gen_range(0..k)).unwrap();
            }
        }
        e.step().unwrap();
        each(e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_gaps_and_speeds(seed in 0u64..1_000_000) {
        let mut e = random_engine(seed, 1200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut failure = None;
        drive(&mut e, &mut rng, |e| {
            if failure.is_none() {
                failure = common::check_engine(e).err();
            }
        });
        prop_assert!(failure.is_none(), "{}", failure.unwrap());
    }

    #[test]
    fn same_seed_same_trajectory(seed in 0u64..1_000_000) {
        let run = || {
            let mut e = random_engine(seed, 600.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            drive(&mut e, &mut rng, |_| {});
            e
        };
        let (a, b) = (run(), run());
        prop_assert!(a.state() == b.state());
    }

    #[test]
    fn reset_replays_the_episode(seed in 0u64..1_000_000) {
        let mut e = random_engine(seed, 300.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        drive(&mut e, &mut rng, |_| {});
        let first = e.state().clone();
        e.reset(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        drive(&mut e, &mut rng, |_| {});
        prop_assert!(e.state() == &first);
    }

    #[test]
    fn lane_queries_agree_with_vehicle_list(seed in 0u64..1_000_000) {
        let mut e = random_engine(seed, 400.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let threshold = e.config().waiting_speed_threshold;
        let mut failure = None;
        drive(&mut e, &mut rng, |e| {
            for l in 0..e.topology().lanes.len() {
                let speeds: Vec<f64> = e.lane_vehicles(l).map(|v| v.speed).collect();
                let waiting = speeds.iter().filter(|&&s| s < threshold).count();
                if e.lane_vehicle_count(l) != speeds.len()
                    || e.lane_waiting_count(l) != waiting
                    || e.lane_query(l, LaneQuery::WaitingCount) != waiting as f64
                {
                    failure.get_or_insert(format!("t={} lane {l}", e.clock()));
                }
            }
            for v in e.vehicles() {
                if v.cumulative_waiting > e.clock() - v.enter_time + e.config().dt + 1e-9 {
                    failure.get_or_insert(format!("vehicle {} waited longer than it existed", v.id));
                }
            }
        });
        prop_assert!(failure.is_none(), "{}", failure.unwrap());
    }
}

#[test]
fn exits_respect_free_flow_time() {
    // a vehicle cannot beat its free-flow time by more than the discretisation
    let net = fixtures::grid(2, 2, PhasePlan::Eight);
    let flows = fixtures::demand(2, 2, DemandProfile::balanced(), 5);
    let mut e = Engine::new(&net, &flows, SimConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    drive(&mut e, &mut rng, |_| {});
    assert!(!e.finished().is_empty());
    for t in e.trips() {
        if let Some(exit) = t.exit_time {
            assert!(exit - t.enter_time >= e.free_flow_time(t.flow) - 2.0, "trip {}", t.id);
        }
    }
}
