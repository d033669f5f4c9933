//! Classical signal controllers: FixedTime, MaxPressure and SOTL.
//!
//! All three are pure functions of a traffic snapshot, the time spent in the
//! current phase and their config.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{InterIdx, LaneIdx, TrafficView};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControllerError {
    #[error("unknown intersection index {0}")]
    UnknownIntersection(InterIdx),
    #[error("intersection `{0}` is virtual")]
    Virtual(String),
    #[error("intersection has no phases")]
    NoPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedTimeConfig {
    /// Seconds per phase.
    pub t_fixed: f64,
}

impl Default for FixedTimeConfig {
    fn default() -> Self {
        Self { t_fixed: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaxPressureConfig {
    /// Minimum green in seconds.
    pub t_min: f64,
}

impl Default for MaxPressureConfig {
    fn default() -> Self {
        Self { t_min: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SotlConfig {
    pub t_min: f64,
    pub min_green_vehicle: u32,
    pub max_red_vehicle: u32,
}

impl Default for SotlConfig {
    fn default() -> Self {
        Self {
            t_min: 5.0,
            min_green_vehicle: 3,
            max_red_vehicle: 6,
        }
    }
}

/// `floor(clock / t_fixed) mod phase_count`.
pub fn fixed_time_action(clock: f64, phase_count: usize, cfg: &FixedTimeConfig) -> usize {
    assert!(phase_count >= 1, "phase_count must be positive");
    // clocks are tick multiples; the epsilon guards 30.000000001 / 29.99999999
    let k = ((clock + 1e-9) / cfg.t_fixed).floor().max(0.0) as u64;
    (k % phase_count as u64) as usize
}

fn signal_phase(view: &impl TrafficView, intersection: InterIdx) -> Result<usize, ControllerError> {
    let topo = view.topology();
    let info = topo
        .intersections
        .get(intersection)
        .ok_or(ControllerError::UnknownIntersection(intersection))?;
    if info.is_virtual {
        return Err(ControllerError::Virtual(info.id.clone()));
    }
    if info.phases.is_empty() {
        return Err(ControllerError::NoPhases);
    }
    Ok(view.signal(intersection).map_or(0, |s| s.target_phase()))
}

/// Per phase: `Σ over its movements of (in-lane waiting − out-lane waiting)`.
pub fn phase_pressures(view: &impl TrafficView, intersection: InterIdx) -> Vec<i64> {
    let topo = view.topology();
    topo.intersections[intersection]
        .phases
        .iter()
        .map(|movements| {
            movements
                .iter()
                .map(|&m| {
                    let mv = &topo.movements[m];
                    view.lane_waiting_count(mv.in_lane) as i64 - view.lane_waiting_count(mv.out_lane) as i64
                })
                .sum()
        })
        .collect()
}

/// Holds the current phase until `t_min` has elapsed, then picks the phase with
/// the largest pressure (lowest index on ties).
pub fn max_pressure_action(
    view: &impl TrafficView,
    intersection: InterIdx,
    elapsed_in_phase: f64,
    cfg: &MaxPressureConfig,
) -> Result<usize, ControllerError> {
    let current = signal_phase(view, intersection)?;
    if elapsed_in_phase < cfg.t_min {
        return Ok(current);
    }
    let pressures = phase_pressures(view, intersection);
    let mut best = 0;
    for (p, &v) in pressures.iter().enumerate() {
        if v > pressures[best] {
            best = p;
        }
    }
    Ok(best)
}

fn waiting_on(view: &impl TrafficView, lanes: &BTreeSet<LaneIdx>) -> u64 {
    lanes.iter().map(|&l| view.lane_waiting_count(l) as u64).sum()
}

/// Green/red waiting counts over the distinct in-lanes of the current phase's
/// movements and of every other movement at the intersection.
pub fn sotl_counts(view: &impl TrafficView, intersection: InterIdx, phase: usize) -> (u64, u64) {
    let topo = view.topology();
    let info = &topo.intersections[intersection];
    let green: BTreeSet<LaneIdx> = info.phases[phase].iter().map(|&m| topo.movements[m].in_lane).collect();
    let red: BTreeSet<LaneIdx> = info
        .movements
        .iter()
        .map(|&m| topo.movements[m].in_lane)
        .filter(|l| !green.contains(l))
        .collect();
    (waiting_on(view, &green), waiting_on(view, &red))
}

/// Advances to the next phase in cyclic order when the minimum green has
/// passed, red demand exceeds `max_red_vehicle` and the green queue is either
/// empty or at least `min_green_vehicle` long.
pub fn sotl_action(
    view: &impl TrafficView,
    intersection: InterIdx,
    elapsed_in_phase: f64,
    cfg: &SotlConfig,
) -> Result<usize, ControllerError> {
    let current = signal_phase(view, intersection)?;
    let count = view.topology().intersections[intersection].phase_count();
    let (g, r) = sotl_counts(view, intersection, current);
    let platoon_forming = g > 0 && g < cfg.min_green_vehicle as u64;
    if elapsed_in_phase >= cfg.t_min && r > cfg.max_red_vehicle as u64 && !platoon_forming {
        Ok((current + 1) % count)
    } else {
        Ok(current)
    }
}

/// A controller choosing one action per agent at each decision point.
#[derive(Debug, Clone, PartialEq)]
pub enum Classical {
    FixedTime(FixedTimeConfig),
    MaxPressure(MaxPressureConfig),
    Sotl(SotlConfig),
}

impl Classical {
    pub fn name(&self) -> &'static str {
        match self {
            Classical::FixedTime(_) => "fixedtime",
            Classical::MaxPressure(_) => "maxpressure",
            Classical::Sotl(_) => "sotl",
        }
    }

    pub fn act(&self, env: &crate::env::TscEnv) -> Result<Vec<usize>, ControllerError> {
        let engine = env.engine();
        env.agents()
            .iter()
            .map(|&i| {
                let elapsed = engine.signal(i).map_or(0.0, |s| s.phase_elapsed);
                match self {
                    Classical::FixedTime(cfg) => Ok(fixed_time_action(
                        env.clock(),
                        engine.topology().intersections[i].phase_count(),
                        cfg,
                    )),
                    Classical::MaxPressure(cfg) => max_pressure_action(engine, i, elapsed, cfg),
                    Classical::Sotl(cfg) => sotl_action(engine, i, elapsed, cfg),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, PhasePlan};
    use crate::sim::{SignalState, Topology};

    struct Snapshot {
        topo: Topology,
        waiting: Vec<usize>,
        phase: usize,
    }

    impl TrafficView for Snapshot {
        fn topology(&self) -> &Topology {
            &self.topo
        }
        fn lane_vehicle_count(&self, lane: LaneIdx) -> usize {
            self.waiting[lane]
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

    fn snapshot(plan: PhasePlan) -> (Snapshot, InterIdx) {
        let topo = Topology::build(&fixtures::grid(1, 1, plan)).unwrap();
        let i = topo.signalized[0];
        let waiting = vec![0; topo.lanes.len()];
        (Snapshot { topo, waiting, phase: 0 }, i)
    }

    #[test]
    fn fixed_time_examples() {
        let cfg = FixedTimeConfig { t_fixed: 30.0 };
        for clock in 0..30 {
            assert_eq!(fixed_time_action(clock as f64, 4, &cfg), 0);
        }
        assert_eq!(fixed_time_action(30.0, 4, &cfg), 1);
        assert_eq!(fixed_time_action(125.0, 4, &cfg), 0);
    }

    #[test]
    fn fixed_time_visits_each_phase_once_per_cycle() {
        let cfg = FixedTimeConfig { t_fixed: 10.0 };
        let mut seen = vec![0; 8];
        for clock in (0..80).step_by(10) {
            seen[fixed_time_action(clock as f64 + 800.0, 8, &cfg)] += 1;
        }
        assert_eq!(seen, vec![1; 8]);
    }

    #[test]
    fn max_pressure_all_zero_picks_phase_zero() {
        let (mut s, i) = snapshot(PhasePlan::Eight);
        s.phase = 5;
        assert_eq!(max_pressure_action(&s, i, 20.0, &MaxPressureConfig::default()), Ok(0));
    }

    #[test]
    fn max_pressure_holds_before_t_min() {
        let (mut s, i) = snapshot(PhasePlan::Eight);
        s.phase = 3;
        s.waiting.iter_mut().for_each(|w| *w = 4);
        let lane = s.topo.movements[s.topo.intersections[i].phases[1][0]].in_lane;
        s.waiting[lane] = 40;
        assert_eq!(max_pressure_action(&s, i, 3.0, &MaxPressureConfig::default()), Ok(3));
        assert_eq!(max_pressure_action(&s, i, 10.0, &MaxPressureConfig::default()), Ok(1));
    }

    #[test]
    fn max_pressure_errors() {
        let (s, _) = snapshot(PhasePlan::Eight);
        let v = s.topo.intersections.iter().position(|x| x.is_virtual).unwrap();
        let cfg = MaxPressureConfig::default();
        assert!(matches!(max_pressure_action(&s, v, 20.0, &cfg), Err(ControllerError::Virtual(_))));
        assert_eq!(
            max_pressure_action(&s, 999, 20.0, &cfg),
            Err(ControllerError::UnknownIntersection(999))
        );
    }

    fn set_green_red(s: &mut Snapshot, i: InterIdx, g: usize, r: usize) {
        s.waiting.iter_mut().for_each(|w| *w = 0);
        let info = &s.topo.intersections[i];
        let green: BTreeSet<_> = info.phases[s.phase].iter().map(|&m| s.topo.movements[m].in_lane).collect();
        let red: BTreeSet<_> = info
            .movements
            .iter()
            .map(|&m| s.topo.movements[m].in_lane)
            .filter(|l| !green.contains(l))
            .collect();
        s.waiting[*green.iter().next().unwrap()] = g;
        s.waiting[*red.iter().next().unwrap()] = r;
    }

    #[test]
    fn sotl_examples() {
        let cfg = SotlConfig::default();
        let (mut s, i) = snapshot(PhasePlan::Eight);
        s.phase = 0;
        set_green_red(&mut s, i, 0, 20);
        assert_eq!(sotl_action(&s, i, 2.0, &cfg), Ok(0));
        set_green_red(&mut s, i, 0, 7);
        assert_eq!(sotl_counts(&s, i, 0), (0, 7));
        assert_eq!(sotl_action(&s, i, 6.0, &cfg), Ok(1));
        set_green_red(&mut s, i, 2, 10);
        assert_eq!(sotl_action(&s, i, 6.0, &cfg), Ok(0));
        set_green_red(&mut s, i, 3, 10);
        assert_eq!(sotl_action(&s, i, 6.0, &cfg), Ok(1));
        set_green_red(&mut s, i, 0, 6);
        assert_eq!(sotl_action(&s, i, 6.0, &cfg), Ok(0));
        s.phase = 7;
        set_green_red(&mut s, i, 0, 7);
        assert_eq!(sotl_action(&s, i, 6.0, &cfg), Ok(0));
    }
}
