//! Level-crossing diagrams, cycle bases and the zero-area condition.
//!
//! Vertices are coupled crossing points; edges are the pieces of diabatic
//! levels between consecutive vertices. Integrability condition (i) asks that
//! every closed path on this graph encloses zero signed area, i.e. that the
//! phase integral of the diabatic energy is path independent.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiabaticModel;

/// Point where two or more diabatic levels meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub energy: f64,
    pub levels: Vec<usize>,
    pub coupled: bool,
}

/// Relative tolerance for treating pairwise crossings as one event.
pub fn grouping_tolerance(t: f64, e: f64) -> f64 {
    1e-9 * 1f64.max(t.abs()).max(e.abs())
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// All crossings of diabatic levels, grouped into events and sorted by time
/// (ties by lowest level index).
pub fn find_crossings(model: &DiabaticModel) -> Vec<CrossingEvent> {
    let n = model.n_levels();
    let (b, e) = (model.slopes(), model.offsets());
    let mut pairs = Vec::new();
    for m in 0..n {
        for k in m + 1..n {
            if b[m] != b[k] {
                let t = (e[k] - e[m]) / (b[m] - b[k]);
                pairs.push((m, k, t, model.energy(m, t)));
            }
        }
    }
    let mut uf = UnionFind::new(pairs.len());
    for a in 0..pairs.len() {
        for c in a + 1..pairs.len() {
            let (pa, pc) = (pairs[a], pairs[c]);
            let shares = pa.0 == pc.0 || pa.0 == pc.1 || pa.1 == pc.0 || pa.1 == pc.1;
            let tol = grouping_tolerance(pa.2, pa.3);
            if shares && (pa.2 - pc.2).abs() <= tol && (pa.3 - pc.3).abs() <= tol {
                uf.union(a, c);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); pairs.len()];
    for k in 0..pairs.len() {
        let r = uf.find(k);
        groups[r].push(k);
    }
    let mut events: Vec<CrossingEvent> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let mut levels: Vec<usize> = g.iter().flat_map(|&k| [pairs[k].0, pairs[k].1]).collect();
            levels.sort_unstable();
            levels.dedup();
            let time = g.iter().map(|&k| pairs[k].2).sum::<f64>() / g.len() as f64;
            let energy = g.iter().map(|&k| pairs[k].3).sum::<f64>() / g.len() as f64;
            let coupled = g.iter().any(|&k| model.coupling(pairs[k].0, pairs[k].1) != 0.0);
            CrossingEvent { time, energy, levels, coupled }
        })
        .collect();
    events.sort_by(|x, y| x.time.total_cmp(&y.time).then(x.levels[0].cmp(&y.levels[0])));
    events
}

/// Splits `levels` into groups connected by couplings among themselves.
pub(crate) fn coupling_components(model: &DiabaticModel, levels: &[usize]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(levels.len());
    for a in 0..levels.len() {
        for c in a + 1..levels.len() {
            if model.coupling(levels[a], levels[c]) != 0.0 {
                uf.union(a, c);
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = vec![Vec::new(); levels.len()];
    for a in 0..levels.len() {
        let r = uf.find(a);
        comps[r].push(levels[a]);
    }
    comps.into_iter().filter(|c| !c.is_empty()).collect()
}

/// Coupled crossing point: the levels of one coupling-connected group
/// within an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub event: usize,
    pub time: f64,
    pub energy: f64,
    pub levels: Vec<usize>,
}

/// Segment of one level between consecutive vertices; `None` ends are
/// half-infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub level: usize,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

impl Edge {
    pub fn is_finite(&self) -> bool {
        self.from.is_some() && self.to.is_some()
    }
}

/// An edge traversed from vertex `from` to vertex `to` (possibly backwards in time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleEdge {
    pub edge: usize,
    pub level: usize,
    pub from: usize,
    pub to: usize,
    pub t_from: f64,
    pub t_to: f64,
}

impl CycleEdge {
    pub fn reversed(self) -> Self {
        Self { from: self.to, to: self.from, t_from: self.t_to, t_to: self.t_from, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cycle {
    pub edges: Vec<CycleEdge>,
}

impl Cycle {
    pub fn reversed(&self) -> Self {
        Self { edges: self.edges.iter().rev().map(|e| e.reversed()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGraph {
    pub events: Vec<CrossingEvent>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Fundamental cycles, one per finite non-tree edge.
    pub cycles: Vec<Cycle>,
    /// Connected components of the graph restricted to finite edges.
    pub n_components: usize,
    /// For each vertex, the tree edge leading to its parent (None at roots).
    parent: Vec<Option<CycleEdge>>,
    /// Spanning-forest root of each vertex.
    root: Vec<usize>,
    depth: Vec<usize>,
}

impl LevelGraph {
    pub fn n_finite_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_finite()).count()
    }

    /// Finite edge `edge` traversed forward (`true`) or backward in time.
    pub fn oriented(&self, edge: usize, forward: bool) -> Option<CycleEdge> {
        let e = &self.edges[edge];
        let (a, b) = (e.from?, e.to?);
        let ce = CycleEdge {
            edge,
            level: e.level,
            from: a,
            to: b,
            t_from: self.vertices[a].time,
            t_to: self.vertices[b].time,
        };
        Some(if forward { ce } else { ce.reversed() })
    }

    /// Path from `u` to `v` along the spanning forest, if they are connected.
    pub fn tree_path(&self, u: usize, v: usize) -> Option<Vec<CycleEdge>> {
        if self.root[u] != self.root[v] {
            return None;
        }
        let (mut a, mut b) = (u, v);
        let mut up = Vec::new();
        let mut down = Vec::new();
        while self.depth[a] > self.depth[b] {
            let e = self.parent[a]?;
            up.push(e);
            a = e.to;
        }
        while self.depth[b] > self.depth[a] {
            let e = self.parent[b]?;
            down.push(e.reversed());
            b = e.to;
        }
        while a != b {
            let ea = self.parent[a]?;
            let eb = self.parent[b]?;
            up.push(ea);
            down.push(eb.reversed());
            a = ea.to;
            b = eb.to;
        }
        up.extend(down.into_iter().rev());
        Some(up)
    }
}

pub fn build_level_graph(model: &DiabaticModel) -> LevelGraph {
    let events = find_crossings(model);
    let mut vertices = Vec::new();
    for (k, ev) in events.iter().enumerate().filter(|(_, ev)| ev.coupled) {
        for comp in coupling_components(model, &ev.levels) {
            if comp.len() >= 2 {
                vertices.push(Vertex { event: k, time: ev.time, energy: ev.energy, levels: comp });
            }
        }
    }
    let mut edges = Vec::new();
    for level in 0..model.n_levels() {
        let on_level: Vec<usize> = (0..vertices.len()).filter(|&v| vertices[v].levels.contains(&level)).collect();
        edges.push(Edge { level, from: None, to: on_level.first().copied() });
        for w in on_level.windows(2) {
            edges.push(Edge { level, from: Some(w[0]), to: Some(w[1]) });
        }
        if let Some(&last) = on_level.last() {
            edges.push(Edge { level, from: Some(last), to: None });
        }
    }

    let nv = vertices.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (k, e) in edges.iter().enumerate() {
        if let (Some(a), Some(b)) = (e.from, e.to) {
            adjacency[a].push(k);
            adjacency[b].push(k);
        }
    }
    let mut graph = LevelGraph {
        events,
        vertices,
        edges,
        cycles: Vec::new(),
        n_components: 0,
        parent: vec![None; nv],
        root: vec![usize::MAX; nv],
        depth: vec![0; nv],
    };
    let mut is_tree = vec![false; graph.edges.len()];
    for start in 0..nv {
        if graph.root[start] != usize::MAX {
            continue;
        }
        graph.n_components += 1;
        graph.root[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &k in &adjacency[u] {
                let e = &graph.edges[k];
                let (a, b) = (e.from.unwrap(), e.to.unwrap());
                let w = if a == u { b } else { a };
                if graph.root[w] == usize::MAX {
                    graph.root[w] = start;
                    graph.depth[w] = graph.depth[u] + 1;
                    is_tree[k] = true;
                    // Parent edge oriented from child w to parent u.
                    graph.parent[w] = graph.oriented(k, a == w);
                    queue.push_back(w);
                }
            }
        }
    }
    for k in 0..graph.edges.len() {
        if graph.edges[k].is_finite() && !is_tree[k] {
            let first = graph.oriented(k, true).unwrap();
            let mut edges = vec![first];
            edges.extend(graph.tree_path(first.to, first.from).unwrap());
            graph.cycles.push(Cycle { edges });
        }
    }
    graph
}

/// ∫ (b t + ε) dt over the edge's traversal.
fn edge_integral(model: &DiabaticModel, e: &CycleEdge) -> f64 {
    let (b, eps) = (model.slopes()[e.level], model.offsets()[e.level]);
    (e.t_to - e.t_from) * (0.5 * b * (e.t_to + e.t_from) + eps)
}

/// Signed area swept by a closed path: Σ ∫ (b t + ε) dt along each edge.
///
/// Terms are summed in an orientation-independent order so that reversing the
/// cycle negates the result exactly.
pub fn loop_area(model: &DiabaticModel, cycle: &Cycle) -> Result<f64> {
    let n = cycle.edges.len();
    if n == 0 {
        return Ok(0.0);
    }
    for k in 0..n {
        if cycle.edges[k].to != cycle.edges[(k + 1) % n].from {
            return Err(Error::NotClosed(k));
        }
    }
    let mut terms: Vec<(usize, usize, usize, f64)> = cycle
        .edges
        .iter()
        .map(|e| (e.edge, e.from.min(e.to), e.from.max(e.to), edge_integral(model, e)))
        .collect();
    terms.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)).then(a.3.abs().total_cmp(&b.3.abs())));
    Ok(terms.iter().map(|t| t.3).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ic1Report {
    pub holds: bool,
    pub tolerance: f64,
    pub cycles: Vec<Cycle>,
    pub areas: Vec<f64>,
    /// Index and area of the largest-magnitude cycle, if any cycle fails.
    pub worst: Option<(usize, f64)>,
    /// Phase integral S at each vertex relative to its component root;
    /// present only when the condition holds.
    pub action: Option<Vec<f64>>,
    /// Whether S reproduces the integral along every non-tree edge.
    pub action_consistent: bool,
}

/// Characteristic area used to scale the zero-area tolerance.
pub fn characteristic_area(model: &DiabaticModel, graph: &LevelGraph) -> f64 {
    let max_slope = model.slopes().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let (lo, hi) = graph
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.time), hi.max(v.time)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    (max_slope * span * span).max(f64::MIN_POSITIVE)
}

pub fn check_ic1(model: &DiabaticModel) -> Ic1Report {
    let graph = build_level_graph(model);
    let tolerance = 1e-9 * characteristic_area(model, &graph);
    let areas: Vec<f64> = graph.cycles.iter().map(|c| loop_area(model, c).expect("basis cycles are closed")).collect();
    let worst = areas
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, a)| a.abs() >= tolerance)
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));

    // Action along the spanning forest, in BFS (depth) order.
    let nv = graph.vertices.len();
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by_key(|&v| graph.depth[v]);
    let mut action = vec![0.0; nv];
    for &v in &order {
        if let Some(pe) = graph.parent[v] {
            // pe runs v -> parent, so S(v) = S(parent) - ∫_{v}^{parent}.
            action[v] = action[pe.to] - edge_integral(model, &pe);
        }
    }
    let action_consistent = graph.cycles.iter().all(|c| {
        let e = &c.edges[0];
        (action[e.to] - action[e.from] - edge_integral(model, e)).abs() < tolerance
    });
    let holds = worst.is_none();
    Ic1Report {
        holds,
        tolerance,
        cycles: graph.cycles.clone(),
        areas,
        worst,
        action: holds.then_some(action),
        action_consistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn do3() -> DiabaticModel {
        DiabaticModel::new(vec![0.5, -0.5, -0.5], vec![0.0, -1.0, 1.0], [(0, 1, 0.5), (0, 2, 0.5)]).unwrap()
    }

    #[test]
    fn lz_single_event() {
        let m = DiabaticModel::new(vec![1.0, -1.0], vec![0.0, 0.0], [(0, 1, 0.3)]).unwrap();
        let ev = find_crossings(&m);
        assert_eq!(ev.len(), 1);
        assert!(ev[0].coupled);
        assert_eq!(ev[0].time, 0.0);
    }

    #[test]
    fn do3_graph_is_tree() {
        let g = build_level_graph(&do3());
        assert_eq!(g.vertices.len(), 2);
        assert!(g.cycles.is_empty());
        let r = check_ic1(&do3());
        assert!(r.holds && r.action_consistent);
    }

    #[test]
    fn parallel_levels_give_no_event() {
        let m = DiabaticModel::new(vec![1.0, 1.0], vec![0.0, 1.0], []).unwrap();
        assert!(find_crossings(&m).is_empty());
    }

    #[test]
    fn open_path_rejected() {
        let m = DiabaticModel::new(vec![1.0, -1.0], vec![0.0, 0.0], [(0, 1, 0.3)]).unwrap();
        let c = Cycle {
            edges: vec![CycleEdge { edge: 0, level: 0, from: 0, to: 1, t_from: 0.0, t_to: 1.0 }],
        };
        assert_eq!(loop_area(&m, &c), Err(Error::NotClosed(0)));
    }
}
