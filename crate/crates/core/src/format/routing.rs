//! Static route completion over the road graph.
//!
//! Road `a` may be followed by road `b` when some movement connects a lane of
//! `a` to a lane of `b`. Path cost is the free-flow travel time
//! `Σ length / speed_limit` over every road of the path. Among equal-cost paths
//! the one with fewer roads wins, then the lexicographically smallest sequence
//! of road ids.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use super::FormatError;
use crate::model::{roads_connected, FlowSet, FlowSpec, RoadNetwork, RouteKind};

/// Road adjacency induced by movements; indices follow `net.roads()` (id order).
pub struct RoadGraph<'a> {
    net: &'a RoadNetwork,
    index: HashMap<&'a str, usize>,
    next: Vec<Vec<usize>>,
    cost: Vec<f64>,
}

impl<'a> RoadGraph<'a> {
    pub fn new(net: &'a RoadNetwork) -> Self {
        let index: HashMap<&str, usize> = net
            .roads()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect();
        let mut next: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); net.roads().len()];
        for m in net.movements() {
            let (Some(a), Some(b)) = (net.lane(&m.in_lane), net.lane(&m.out_lane)) else {
                continue;
            };
            if let (Some(&ra), Some(&rb)) = (index.get(a.road.as_str()), index.get(b.road.as_str())) {
                next[ra].insert(rb);
            }
        }
        Self {
            cost: net.roads().iter().map(|r| r.length / r.speed_limit).collect(),
            next: next.into_iter().map(|s| s.into_iter().collect()).collect(),
            index,
            net,
        }
    }

    pub fn road_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn successors(&self, road: usize) -> &[usize] {
        &self.next[road]
    }

    pub fn road_cost(&self, road: usize) -> f64 {
        self.cost[road]
    }

    pub fn road_id(&self, road: usize) -> &str {
        &self.net.roads()[road].id
    }

    /// Minimum travel-time road sequence from `from` to `to`, both included.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let n = self.next.len();
        let mut best: Vec<Option<Label>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        let start = Label {
            cost: self.cost[from],
            path: vec![from],
        };
        best[from] = Some(start.clone());
        heap.push(std::cmp::Reverse(start));
        while let Some(std::cmp::Reverse(label)) = heap.pop() {
            let node = *label.path.last().expect("non-empty path");
            if best[node].as_ref() != Some(&label) {
                continue;
            }
            if node == to {
                return Some(label.path);
            }
            for &succ in &self.next[node] {
                if label.path.contains(&succ) {
                    continue;
                }
                let mut path = label.path.clone();
                path.push(succ);
                let cand = Label {
                    cost: label.cost + self.cost[succ],
                    path,
                };
                if best[succ].as_ref().is_none_or(|b| cand < *b) {
                    best[succ] = Some(cand.clone());
                    heap.push(std::cmp::Reverse(cand));
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    path: Vec<usize>,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.path.len().cmp(&other.path.len()))
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Expands every flow into a connected road sequence.
///
/// Consecutive route roads that already share an intersection are kept as
/// they are; any other gap is filled with the shortest path between the two
/// roads. Completed flows are marked [`RouteKind::Full`].
pub fn complete_routes(net: &RoadNetwork, flows: &FlowSet) -> Result<FlowSet, FormatError> {
    let graph = RoadGraph::new(net);
    let mut cache: HashMap<(usize, usize), Option<Vec<usize>>> = HashMap::new();
    let mut out = Vec::with_capacity(flows.flows.len());
    for (n, flow) in flows.flows.iter().enumerate() {
        for r in &flow.route {
            if graph.road_index(r).is_none() {
                return Err(FormatError::semantic(format!("flow_{n}"), format!("unknown road `{r}`")));
            }
        }
        let mut route: Vec<String> = Vec::with_capacity(flow.route.len());
        route.push(flow.route[0].clone());
        for pair in flow.route.windows(2) {
            if roads_connected(net, &pair[0], &pair[1]) {
                route.push(pair[1].clone());
                continue;
            }
            let a = graph.road_index(&pair[0]).expect("checked");
            let b = graph.road_index(&pair[1]).expect("checked");
            let path = cache
                .entry((a, b))
                .or_insert_with(|| graph.shortest_path(a, b))
                .as_ref()
                .ok_or_else(|| FormatError::Unreachable {
                    flow: n,
                    from: pair[0].clone(),
                    to: pair[1].clone(),
                })?;
            route.extend(path[1..].iter().map(|&i| graph.road_id(i).to_string()));
        }
        out.push(FlowSpec {
            route,
            route_kind: RouteKind::Full,
            ..flow.clone()
        });
    }
    Ok(FlowSet::new(out))
}
