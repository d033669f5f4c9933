//! Evaluation metrics: streaming per-tick accumulators plus end-of-episode
//! reductions over the engine's trip log.
//!
//! Smaller is better for travel time, queue, delay and real delay; larger is
//! better for throughput.

use serde::{Deserialize, Serialize};

use crate::sim::{Engine, LaneQuery, TrafficView};

/// `1 − Σv / (n·v_max)` for the vehicles of one lane. `None` for an empty lane.
pub fn approx_delay(speeds: &[f64], v_max: f64) -> Option<f64> {
    if speeds.is_empty() || !(v_max > 0.0) {
        return None;
    }
    let sum: f64 = speeds.iter().sum();
    Some(1.0 - sum / (speeds.len() as f64 * v_max))
}

/// Mean of `exit − enter`; unfinished trips use `horizon` as their exit.
/// Returns `None` when nothing entered.
pub fn average_travel_time<I>(trips: I, horizon: f64) -> Option<f64>
where
    I: IntoIterator<Item = (f64, Option<f64>)>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for (enter, exit) in trips {
        sum += exit.unwrap_or(horizon) - enter;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean over `(actual, expected)` pairs of `max(0, actual − expected)`.
pub fn real_delay<I>(pairs: I) -> Option<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for (actual, expected) in pairs {
        sum += (actual - expected).max(0.0);
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Reduced metrics of one episode (or of the episode so far).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub travel_time: f64,
    pub queue: f64,
    pub delay: f64,
    pub real_delay: f64,
    pub throughput: u64,
    /// Vehicles still in the network, counted in travel time with the horizon as exit.
    pub unfinished: u64,
    /// No vehicle entered: travel time reported as 0.
    pub travel_time_undefined: bool,
    /// No vehicle finished: real delay reported as 0.
    pub real_delay_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    TravelTime,
    Queue,
    Delay,
    RealDelay,
    Throughput,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::TravelTime,
        MetricName::Queue,
        MetricName::Delay,
        MetricName::RealDelay,
        MetricName::Throughput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::TravelTime => "travel_time",
            MetricName::Queue => "queue",
            MetricName::Delay => "delay",
            MetricName::RealDelay => "real_delay",
            MetricName::Throughput => "throughput",
        }
    }

    pub fn smaller_is_better(self) -> bool {
        !matches!(self, MetricName::Throughput)
    }
}

impl EpisodeMetrics {
    pub fn get(&self, metric: MetricName) -> f64 {
        match metric {
            MetricName::TravelTime => self.travel_time,
            MetricName::Queue => self.queue,
            MetricName::Delay => self.delay,
            MetricName::RealDelay => self.real_delay,
            MetricName::Throughput => self.throughput as f64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsAccumulator {
    ticks: u64,
    queue_sum: f64,
    delay_sum: f64,
    delay_ticks: u64,
    last_throughput: u64,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Samples the engine after one tick.
    pub fn record_tick(&mut self, engine: &Engine) {
        let topo = engine.topology();
        let mut waiting = 0usize;
        let (mut lane_delay_sum, mut lanes) = (0.0, 0usize);
        let mut speeds = Vec::new();
        for (l, info) in topo.lanes.iter().enumerate() {
            waiting += engine.lane_waiting_count(l);
            speeds.clear();
            speeds.extend(engine.lane_vehicles(l).map(|v| v.speed));
            if let Some(d) = approx_delay(&speeds, info.max_speed) {
                lane_delay_sum += d;
                lanes += 1;
            }
        }
        self.ticks += 1;
        self.queue_sum += waiting as f64;
        if lanes > 0 {
            self.delay_sum += lane_delay_sum / lanes as f64;
            self.delay_ticks += 1;
        }
        self.last_throughput = engine.finished().len() as u64;
    }

    /// Time-averaged network waiting count; `None` before the first tick.
    pub fn average_queue(&self) -> Option<f64> {
        (self.ticks > 0).then(|| self.queue_sum / self.ticks as f64)
    }

    /// Time-averaged delay over ticks with at least one occupied lane.
    pub fn average_delay(&self) -> f64 {
        if self.delay_ticks == 0 {
            0.0
        } else {
            self.delay_sum / self.delay_ticks as f64
        }
    }

    pub fn throughput(&self) -> u64 {
        self.last_throughput
    }

    /// Full reduction at the engine's current clock.
    pub fn finish(&self, engine: &Engine) -> EpisodeMetrics {
        let horizon = engine.clock();
        let trips = engine.trips();
        let travel = average_travel_time(trips.iter().map(|t| (t.enter_time, t.exit_time)), horizon);
        let real = real_delay(
            trips
                .iter()
                .filter_map(|t| t.exit_time.map(|x| (x - t.enter_time, engine.free_flow_time(t.flow)))),
        );
        let finished = engine.finished().len() as u64;
        EpisodeMetrics {
            travel_time: travel.unwrap_or(0.0),
            queue: self.average_queue().unwrap_or(0.0),
            delay: self.average_delay(),
            real_delay: real.unwrap_or(0.0),
            throughput: finished,
            unfinished: trips.len() as u64 - finished,
            travel_time_undefined: travel.is_none(),
            real_delay_undefined: real.is_none(),
        }
    }
}

/// Mean speed of a lane's vehicles through [`LaneQuery::MeanSpeed`], for callers
/// that only need the lane-level aggregate.
pub fn lane_delay(engine: &Engine, lane: usize) -> Option<f64> {
    let n = engine.lane_query(lane, LaneQuery::Count);
    if n == 0.0 {
        return None;
    }
    let v_max = engine.topology().lanes[lane].max_speed;
    Some(1.0 - engine.lane_query(lane, LaneQuery::MeanSpeed) / v_max)
}
