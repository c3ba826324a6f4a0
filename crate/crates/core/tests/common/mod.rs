//! Brute-force reference implementations for the acceptance suite.
//!
//! Everything here trades speed for obviousness: trees are unrolled
//! without sharing, assignments are enumerated as permutations, and
//! transportation problems are solved by scanning every basic feasible
//! solution. None of it calls the solvers under test.

use hetgraph_core::tmd::WeightSchedule;
use hetgraph_core::Graph;
use rand::rngs::StdRng;
use rand::Rng;

// ---------------------------------------------------------------------
// Reference tree distance
// ---------------------------------------------------------------------

pub struct RefTree {
    features: Vec<f64>,
    children: Vec<RefTree>,
}

impl RefTree {
    fn blank(dim: usize) -> Self {
        RefTree { features: vec![0.0; dim], children: Vec::new() }
    }

    fn depth(&self) -> usize {
        1 + self.children.iter().map(RefTree::depth).max().unwrap_or(0)
    }
}

/// Plain recursive unrolling of node `v`: at each level the children
/// are all graph neighbors, the parent included again.
pub fn unroll(g: &Graph, v: usize, levels: usize) -> RefTree {
    assert!(levels >= 1);
    let children = if levels == 1 {
        Vec::new()
    } else {
        g.neighbors(v).iter().map(|&u| unroll(g, u, levels - 1)).collect()
    };
    RefTree { features: g.features()[v].clone(), children }
}

/// Minimum-cost perfect matching on a square matrix by enumerating all
/// row-to-column permutations.
pub fn min_assignment(costs: &[Vec<f64>]) -> f64 {
    fn go(costs: &[Vec<f64>], row: usize, used: u32, acc: f64, best: &mut f64) {
        if row == costs.len() {
            *best = best.min(acc);
            return;
        }
        for col in 0..costs.len() {
            if used & (1 << col) == 0 {
                go(costs, row + 1, used | (1 << col), acc + costs[row][col], best);
            }
        }
    }
    let mut best = if costs.is_empty() { 0.0 } else { f64::INFINITY };
    go(costs, 0, 0, 0.0, &mut best);
    best
}

/// Cheapest matching between two tree multisets, the smaller side
/// blank-padded to equal cardinality first.
fn multiset_cost(a: &[RefTree], b: &[RefTree], w: &WeightSchedule) -> f64 {
    let dim = a
        .first()
        .or_else(|| b.first())
        .map(|t| t.features.len())
        .unwrap_or(0);
    let blank = RefTree::blank(dim);
    let m = a.len().max(b.len());
    let left: Vec<&RefTree> = (0..m).map(|i| a.get(i).unwrap_or(&blank)).collect();
    let right: Vec<&RefTree> = (0..m).map(|i| b.get(i).unwrap_or(&blank)).collect();
    let costs: Vec<Vec<f64>> = left
        .iter()
        .map(|x| right.iter().map(|y| ref_tree_distance(x, y, w)).collect())
        .collect();
    min_assignment(&costs)
}

/// Euclidean root distance plus the level weight times the cheapest
/// blank-padded child matching.
pub fn ref_tree_distance(a: &RefTree, b: &RefTree, w: &WeightSchedule) -> f64 {
    let root: f64 = a
        .features
        .iter()
        .zip(&b.features)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    if a.children.is_empty() && b.children.is_empty() {
        return root;
    }
    root + w.get(a.depth().max(b.depth())) * multiset_cost(&a.children, &b.children, w)
}

/// Graph distance: cheapest matching between the two blank-padded
/// multisets of depth-`levels` trees, one per node.
pub fn ref_tmd(a: &Graph, b: &Graph, levels: usize, w: &WeightSchedule) -> f64 {
    let ta: Vec<RefTree> = (0..a.n()).map(|v| unroll(a, v, levels)).collect();
    let tb: Vec<RefTree> = (0..b.n()).map(|v| unroll(b, v, levels)).collect();
    multiset_cost(&ta, &tb, w)
}

// ---------------------------------------------------------------------
// Reference transportation solver
// ---------------------------------------------------------------------

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }

    /// False when both ends already share a root.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Exact optimum of the balanced transportation problem by enumerating
/// every spanning tree of the supply-demand bipartite graph, solving
/// its unique flows by leaf peeling, and keeping the cheapest feasible
/// one. An optimal vertex always corresponds to such a tree, so the
/// scan attains the LP optimum. Supports up to 16 cells.
pub fn ref_transport(costs: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> f64 {
    let p = supply.len();
    let q = demand.len();
    assert!(p >= 1 && q >= 1 && p * q <= 16, "oracle handles at most 16 cells");
    assert!(costs.len() == p && costs.iter().all(|r| r.len() == q));
    let cells: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..q).map(move |j| (i, j))).collect();
    let picks = p + q - 1;
    let mut best = f64::INFINITY;

    for mask in 0u32..(1 << cells.len()) {
        if mask.count_ones() as usize != picks {
            continue;
        }
        let mut uf = UnionFind::new(p + q);
        let mut acyclic = true;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p + q];
        for (idx, &(i, j)) in cells.iter().enumerate() {
            if mask & (1 << idx) == 0 {
                continue;
            }
            if !uf.union(i, p + j) {
                acyclic = false;
                break;
            }
            adj[i].push((p + j, idx));
            adj[p + j].push((i, idx));
        }
        // picks edges and no cycle over p + q nodes means a spanning tree.
        if !acyclic {
            continue;
        }

        let mut need: Vec<f64> = supply.iter().chain(demand).copied().collect();
        let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut removed = vec![false; cells.len()];
        let mut flow = vec![0.0; cells.len()];
        let mut leaves: Vec<usize> = (0..p + q).filter(|&v| degree[v] == 1).collect();
        let mut done = vec![false; p + q];
        while let Some(v) = leaves.pop() {
            if done[v] {
                continue;
            }
            let Some(&(other, idx)) = adj[v].iter().find(|&&(_, idx)| !removed[idx]) else {
                continue;
            };
            flow[idx] = need[v];
            need[other] -= need[v];
            need[v] = 0.0;
            removed[idx] = true;
            done[v] = true;
            degree[other] -= 1;
            if degree[other] == 1 {
                leaves.push(other);
            }
        }
        if flow.iter().any(|&f| f < -1e-12) {
            continue;
        }
        let cost: f64 = cells
            .iter()
            .enumerate()
            .map(|(idx, &(i, j))| flow[idx] * costs[i][j])
            .sum();
        best = best.min(cost);
    }
    best
}

// ---------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------

/// Erdos-Renyi draw with unit features, patched into one component by
/// bridging consecutive components.
pub fn random_connected_graph(rng: &mut StdRng, id: u64, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let mut g = Graph::new(id, n, edges, vec![vec![1.0]; n], None).unwrap();
    while !g.is_connected() {
        let comp = g.components();
        let a = (0..n).position(|v| comp[v] == 0).unwrap();
        let other = comp.iter().max().copied().unwrap();
        let b = (0..n).position(|v| comp[v] == other).unwrap();
        g.add_edge(a, b).unwrap();
    }
    g
}

/// Random graph with scalar features for the tree-distance checks;
/// isolated nodes and empty edge sets are allowed.
pub fn random_featured_graph(rng: &mut StdRng, id: u64, max_nodes: usize) -> Graph {
    let n = rng.gen_range(1..=max_nodes);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.5) {
                edges.push((u, v));
            }
        }
    }
    let features = (0..n).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
    Graph::new(id, n, edges, features, None).unwrap()
}
