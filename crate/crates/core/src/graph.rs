//! Core graph and dataset types.
//!
//! `Graph` is an undirected simple graph with dense node features and an
//! optional label; construction validates the invariants (no self-loops,
//! no duplicates, endpoints in range, one feature row per node) so the
//! rest of the crate can rely on them.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Target(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Task {
    Classification { classes: usize },
    Regression { dims: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    id: u64,
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    features: Vec<Vec<f64>>,
    label: Option<Label>,
}

impl Graph {
    /// Builds a graph, normalizing each edge to `(min, max)` and sorting
    /// the edge list. Fails on self-loops, duplicate edges, out-of-range
    /// endpoints, ragged or non-finite features, or a feature row count
    /// that differs from `n`.
    pub fn new(
        id: u64,
        n: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<Vec<f64>>,
        label: Option<Label>,
    ) -> Result<Self> {
        if features.len() != n {
            return Err(Error::InvalidGraph(format!(
                "graph {id}: {} feature rows for {n} nodes",
                features.len()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        for (v, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidGraph(format!(
                    "graph {id}: feature row {v} has length {} (expected {dim})",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGraph(format!("graph {id}: non-finite feature at node {v}")));
            }
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("graph {id}: self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "graph {id}: edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        if norm.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("graph {id}: duplicate edge")));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &norm {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph { id, n, edges: norm, adj, features, label })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.adj[u].binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn label(&self) -> Option<&Label> {
        self.label.as_ref()
    }

    pub fn set_label(&mut self, label: Option<Label>) {
        self.label = label;
    }

    pub fn set_features(&mut self, features: Vec<Vec<f64>>) -> Result<()> {
        let rebuilt = Graph::new(self.id, self.n, self.edges.clone(), features, self.label.clone())?;
        *self = rebuilt;
        Ok(())
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if u == v {
            return Err(Error::InvalidGraph(format!("graph {}: self-loop at node {u}", self.id)));
        }
        if u >= self.n || v >= self.n {
            return Err(Error::InvalidGraph(format!(
                "graph {}: edge ({u}, {v}) out of range",
                self.id
            )));
        }
        if self.has_edge(u, v) {
            return Err(Error::InvalidGraph(format!("graph {}: edge ({u}, {v}) already present", self.id)));
        }
        let e = (u.min(v), u.max(v));
        let pos = self.edges.binary_search(&e).unwrap_err();
        self.edges.insert(pos, e);
        let pu = self.adj[e.0].binary_search(&e.1).unwrap_err();
        self.adj[e.0].insert(pu, e.1);
        let pv = self.adj[e.1].binary_search(&e.0).unwrap_err();
        self.adj[e.1].insert(pv, e.0);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> Result<()> {
        let e = (u.min(v), u.max(v));
        let pos = self
            .edges
            .binary_search(&e)
            .map_err(|_| Error::InvalidGraph(format!("graph {}: edge ({u}, {v}) not present", self.id)))?;
        self.edges.remove(pos);
        let pu = self.adj[e.0].binary_search(&e.1).unwrap();
        self.adj[e.0].remove(pu);
        let pv = self.adj[e.1].binary_search(&e.0).unwrap();
        self.adj[e.1].remove(pv);
        Ok(())
    }

    /// Non-edges `(u, v)` with `u < v`, lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// BFS hop distances from `src`; unreachable nodes get `usize::MAX`.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Connected component id per node, ids assigned in order of the
    /// smallest node they contain.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adj[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        if self.n == 0 {
            return 0;
        }
        self.components().iter().max().unwrap() + 1
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub task: Task,
}

impl Dataset {
    /// Validates id uniqueness and label/task consistency.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, task: Task) -> Result<Self> {
        let name = name.into();
        let mut ids: Vec<u64> = graphs.iter().map(Graph::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset(format!("{name}: duplicate graph id")));
        }
        for g in &graphs {
            match (&task, g.label()) {
                (Task::Classification { classes }, Some(Label::Class(c))) => {
                    if c >= classes {
                        return Err(Error::InvalidDataset(format!(
                            "{name}: graph {} has class {c}, but the task has {classes} classes",
                            g.id()
                        )));
                    }
                }
                (Task::Regression { dims }, Some(Label::Target(t))) => {
                    if t.len() != *dims {
                        return Err(Error::InvalidDataset(format!(
                            "{name}: graph {} target has dim {}, expected {dims}",
                            g.id(),
                            t.len()
                        )));
                    }
                }
                (_, None) => {}
                _ => {
                    return Err(Error::InvalidDataset(format!(
                        "{name}: graph {} label does not match the task",
                        g.id()
                    )));
                }
            }
        }
        Ok(Dataset { name, graphs, task })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graph_by_id(&self, id: u64) -> Option<&Graph> {
        self.graphs.iter().find(|g| g.id() == id)
    }
}

/// Convenience builders for the small named graphs used throughout the
/// tests and docs.
pub mod build {
    use super::{Graph, Label};

    fn with_unit_features(id: u64, n: usize, edges: Vec<(usize, usize)>) -> Graph {
        Graph::new(id, n, edges, vec![vec![1.0]; n], None).expect("valid construction")
    }

    /// Path graph 0-1-...-(n-1).
    pub fn path(id: u64, n: usize) -> Graph {
        with_unit_features(id, n, (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect())
    }

    /// Cycle graph on n >= 3 nodes.
    pub fn cycle(id: u64, n: usize) -> Graph {
        assert!(n >= 3);
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((0, n - 1));
        with_unit_features(id, n, edges)
    }

    /// Complete graph on n nodes.
    pub fn complete(id: u64, n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        with_unit_features(id, n, edges)
    }

    /// Star with the hub at node 0 and n-1 leaves.
    pub fn star(id: u64, n: usize) -> Graph {
        assert!(n >= 1);
        with_unit_features(id, n, (1..n).map(|v| (0, v)).collect())
    }

    pub fn labeled(mut g: Graph, class: usize) -> Graph {
        g.set_label(Some(Label::Class(class)));
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_normalizes_and_validates() {
        let g = Graph::new(0, 3, vec![(2, 0), (0, 1)], vec![vec![0.0]; 3], None).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert!(g.has_edge(2, 0));
        assert!(!g.has_edge(1, 2));

        assert!(Graph::new(0, 3, vec![(1, 1)], vec![vec![0.0]; 3], None).is_err());
        assert!(Graph::new(0, 3, vec![(0, 3)], vec![vec![0.0]; 3], None).is_err());
        assert!(Graph::new(0, 3, vec![(0, 1), (1, 0)], vec![vec![0.0]; 3], None).is_err());
        assert!(Graph::new(0, 2, vec![(0, 1)], vec![vec![0.0]], None).is_err());
        assert!(Graph::new(0, 1, vec![], vec![vec![f64::NAN]], None).is_err());
    }

    #[test]
    fn edge_mutation_keeps_order() {
        let mut g = build::path(0, 4);
        g.add_edge(3, 0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert!(g.add_edge(0, 1).is_err());
        g.remove_edge(1, 0).unwrap();
        assert_eq!(g.edges(), &[(0, 3), (1, 2), (2, 3)]);
        assert!(g.remove_edge(0, 1).is_err());
        assert_eq!(g.degree(0), 1);
    }

    #[test]
    fn bfs_and_components() {
        let g = Graph::new(
            0,
            5,
            vec![(0, 1), (1, 2), (3, 4)],
            vec![vec![]; 5],
            None,
        )
        .unwrap();
        assert_eq!(g.bfs_distances(0), vec![0, 1, 2, usize::MAX, usize::MAX]);
        assert_eq!(g.components(), vec![0, 0, 0, 1, 1]);
        assert!(!g.is_connected());
        assert!(build::cycle(1, 5).is_connected());
    }

    #[test]
    fn dataset_validation() {
        let g0 = build::labeled(build::path(0, 3), 0);
        let g1 = build::labeled(build::cycle(1, 4), 1);
        let d = Dataset::new("toy", vec![g0.clone(), g1.clone()], Task::Classification { classes: 2 });
        assert!(d.is_ok());

        let dup = Dataset::new("toy", vec![g0.clone(), g0.clone()], Task::Classification { classes: 2 });
        assert!(dup.is_err());

        let bad = Dataset::new("toy", vec![g1], Task::Classification { classes: 1 });
        assert!(bad.is_err());
    }
}
