//! Proximity graphs over vehicles and the centrality measures computed on them.
//!
//! Two vehicles are adjacent when their centres are at most `d_min` apart; the
//! edge carries the Euclidean distance. Closeness is evaluated per connected
//! component, so disconnected traffic yields finite values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VehicleState;

/// Default neighbour radius, m.
pub const DEFAULT_D_MIN: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("vehicle {0} has no trajectory in the graph history")]
    UnknownVehicle(u32),
}

/// How an edge of length `d` is charged in shortest-path sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeighting {
    #[default]
    Distance,
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph {
    pub vertex_ids: Vec<u32>,
    pub positions: Vec<(f64, f64)>,
    /// Row-major `N×N`; `Some(d)` for an edge of length `d`.
    adjacency: Vec<Option<f64>>,
    pub d_min: f64,
    pub weighting: EdgeWeighting,
}

pub fn build_graph(states: &[VehicleState], d_min: f64) -> ProximityGraph {
    ProximityGraph::from_points(
        states.iter().map(|s| (s.id, (s.x, s.y))),
        d_min,
        EdgeWeighting::Distance,
    )
}

impl ProximityGraph {
    pub fn from_points(
        points: impl IntoIterator<Item = (u32, (f64, f64))>,
        d_min: f64,
        weighting: EdgeWeighting,
    ) -> Self {
        let (vertex_ids, positions): (Vec<_>, Vec<_>) = points.into_iter().unzip();
        let n = vertex_ids.len();
        let mut adjacency = vec![None; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (xi, yi) = positions[i];
                let (xj, yj) = positions[j];
                let d = (xi - xj).hypot(yi - yj);
                if d <= d_min {
                    adjacency[i * n + j] = Some(d);
                    adjacency[j * n + i] = Some(d);
                }
            }
        }
        Self { vertex_ids, positions, adjacency, d_min, weighting }
    }

    /// A graph from explicit weighted edges, mostly for tests and examples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adjacency = vec![None; n * n];
        for &(i, j, w) in edges {
            adjacency[i * n + j] = Some(w);
            adjacency[j * n + i] = Some(w);
        }
        Self {
            vertex_ids: (0..n as u32).collect(),
            positions: vec![(0.0, 0.0); n],
            adjacency,
            d_min: f64::INFINITY,
            weighting: EdgeWeighting::Distance,
        }
    }

    pub fn with_weighting(mut self, weighting: EdgeWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i * self.len() + j]
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.vertex_ids.iter().position(|&v| v == id)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.edge(i, j).is_some())
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|e| e.is_some()).count() / 2
    }

    fn cost(&self, i: usize, j: usize) -> Option<f64> {
        self.edge(i, j).map(|d| match self.weighting {
            EdgeWeighting::Distance => d,
            EdgeWeighting::Unit => 1.0,
        })
    }

    /// Single-source path costs (dense Dijkstra); unreachable vertices are `∞`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut u = None;
            for v in 0..n {
                if !done[v] && dist[v].is_finite() && u.is_none_or(|u: usize| dist[v] < dist[u]) {
                    u = Some(v);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            for v in 0..n {
                if let Some(w) = self.cost(u, v) {
                    let alt = dist[u] + w;
                    if alt < dist[v] {
                        dist[v] = alt;
                    }
                }
            }
        }
        dist
    }
}

/// All-pairs minimum path costs, row-major `N×N`.
pub fn shortest_paths(g: &ProximityGraph) -> Vec<Vec<f64>> {
    (0..g.len()).map(|i| g.distances_from(i)).collect()
}

/// `(N - 1) / Σ D(i, j)` over the connected component of vertex `i`;
/// 0 for an isolated vertex.
pub fn closeness_centrality(g: &ProximityGraph, i: usize) -> f64 {
    let dist = g.distances_from(i);
    let (count, sum) = dist
        .iter()
        .enumerate()
        .filter(|&(j, d)| j != i && d.is_finite())
        .fold((0usize, 0.0), |(c, s), (_, d)| (c + 1, s + d));
    if count == 0 {
        0.0
    } else {
        count as f64 / sum
    }
}

/// A graph snapshot tagged with its simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedGraph {
    pub time: f64,
    pub graph: ProximityGraph,
}

/// Cumulative number of distinct vehicles ever adjacent to `id` in graphs with
/// time `≤ t`.
pub fn degree_centrality(history: &[TimedGraph], id: u32, t: f64) -> Result<usize, GraphError> {
    if !history.iter().any(|f| f.graph.index_of(id).is_some()) {
        return Err(GraphError::UnknownVehicle(id));
    }
    let mut seen = BTreeSet::new();
    for frame in history.iter().take_while(|f| f.time <= t) {
        if let Some(i) = frame.graph.index_of(id) {
            seen.extend(frame.graph.neighbors(i).map(|j| frame.graph.vertex_ids[j]));
        }
    }
    Ok(seen.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralitySeries {
    pub vehicle_id: u32,
    pub timestamps: Vec<f64>,
    pub closeness: Vec<f64>,
    pub degree: Vec<usize>,
}

impl CentralitySeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Closeness and cumulative degree series for every vehicle in the history,
/// sampled at each frame in which the vehicle is present.
pub fn centrality_series(history: &[TimedGraph]) -> BTreeMap<u32, CentralitySeries> {
    let mut out: BTreeMap<u32, CentralitySeries> = BTreeMap::new();
    let mut seen: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for frame in history {
        let g = &frame.graph;
        for (i, &id) in g.vertex_ids.iter().enumerate() {
            let neighbours = seen.entry(id).or_default();
            neighbours.extend(g.neighbors(i).map(|j| g.vertex_ids[j]));
            let series = out.entry(id).or_insert_with(|| CentralitySeries {
                vehicle_id: id,
                timestamps: Vec::new(),
                closeness: Vec::new(),
                degree: Vec::new(),
            });
            series.timestamps.push(frame.time);
            series.closeness.push(closeness_centrality(g, i));
            series.degree.push(neighbours.len());
        }
    }
    out
}
