//! Ollivier-Ricci edge curvature via exact optimal transport, the
//! curvature gap statistic, the LCP node encoding, and curvature-guided
//! (BORF-style) rewiring.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ot;
use crate::rewiring::{RewireAction, RewireEvent, RewiringReport};
use crate::spectral::{fiedler, LaplacianKind};

/// Non-lazy random walks by default.
pub const DEFAULT_ALPHA: f64 = 0.0;

/// Curvature of every edge, stored in `Graph::edges` order.
#[derive(Debug, Clone)]
pub struct CurvatureMap {
    alpha: f64,
    edges: Vec<((usize, usize), f64)>,
}

impl CurvatureMap {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let key = (u.min(v), u.max(v));
        self.edges
            .binary_search_by(|(e, _)| e.cmp(&key))
            .ok()
            .map(|i| self.edges[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "laziness must lie in [0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// The walk measure at `node`: mass `alpha` on the node itself and
/// `(1 - alpha) / deg` on each neighbor.
fn walk_measure(g: &Graph, node: usize, alpha: f64) -> (Vec<usize>, Vec<f64>) {
    let deg = g.degree(node) as f64;
    let mut atoms = Vec::with_capacity(g.degree(node) + 1);
    let mut mass = Vec::with_capacity(g.degree(node) + 1);
    if alpha > 0.0 {
        atoms.push(node);
        mass.push(alpha);
    }
    for &nb in g.neighbors(node) {
        atoms.push(nb);
        mass.push((1.0 - alpha) / deg);
    }
    (atoms, mass)
}

/// kappa(u, v) = 1 - W1(mu_u, mu_v) / d(u, v) for every edge, with W1
/// solved exactly over full-graph shortest-path costs. Adjacent nodes
/// have d(u, v) = 1, so kappa = 1 - W1.
pub fn ollivier_curvature(g: &Graph, alpha: f64) -> Result<CurvatureMap> {
    validate_alpha(alpha)?;

    // One BFS per non-isolated node; every transport atom lies in the
    // closed neighborhood of an edge endpoint, so these rows cover all
    // cost lookups.
    let dist: Vec<Option<Vec<usize>>> = (0..g.n())
        .map(|v| (g.degree(v) > 0).then(|| g.bfs_distances(v)))
        .collect();

    let edges = g
        .edges()
        .par_iter()
        .map(|&(u, v)| -> Result<((usize, usize), f64)> {
            let (a_atoms, a_mass) = walk_measure(g, u, alpha);
            let (b_atoms, b_mass) = walk_measure(g, v, alpha);
            let costs: Vec<Vec<f64>> = a_atoms
                .iter()
                .map(|&a| {
                    let row = dist[a].as_ref().expect("edge-endpoint neighborhoods have degree > 0");
                    b_atoms.iter().map(|&b| row[b] as f64).collect()
                })
                .collect();
            let w1 = ot::transportation(&costs, &a_mass, &b_mass)?;
            Ok(((u, v), 1.0 - w1))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CurvatureMap { alpha, edges })
}

/// Standardized separation between negatively curved (inter-community)
/// and positively curved (intra-community) edges.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureGap {
    pub value: f64,
    /// Set when a class is empty or both class variances vanish; the
    /// value then falls back to 0.
    pub degenerate: bool,
}

fn mean_and_population_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Delta-kappa = |mean(kappa < 0) - mean(kappa > 0)| / sigma with
/// sigma = sqrt((var_inter + var_intra) / 2). Zero-curvature edges are
/// left out of both classes.
pub fn curvature_gap(map: &CurvatureMap) -> CurvatureGap {
    let inter: Vec<f64> = map.iter().map(|(_, k)| k).filter(|&k| k < 0.0).collect();
    let intra: Vec<f64> = map.iter().map(|(_, k)| k).filter(|&k| k > 0.0).collect();
    if inter.is_empty() || intra.is_empty() {
        return CurvatureGap { value: 0.0, degenerate: true };
    }
    let (m_inter, v_inter) = mean_and_population_var(&inter);
    let (m_intra, v_intra) = mean_and_population_var(&intra);
    let sigma = ((v_inter + v_intra) / 2.0).sqrt();
    if sigma == 0.0 {
        return CurvatureGap { value: 0.0, degenerate: true };
    }
    CurvatureGap { value: (m_inter - m_intra).abs() / sigma, degenerate: false }
}

/// Per-node curvature profile: min, max, mean, std, median of kappa over
/// the node's incident edges.
pub fn lcp_encoding(g: &Graph) -> Result<Vec<Vec<f64>>> {
    if let Some(v) = (0..g.n()).find(|&v| g.degree(v) == 0) {
        return Err(Error::InvalidGraph(format!(
            "curvature profile undefined for isolated node {v} in graph {}",
            g.id()
        )));
    }
    let map = ollivier_curvature(g, DEFAULT_ALPHA)?;
    let rows = (0..g.n())
        .map(|v| {
            let mut ks: Vec<f64> = g
                .neighbors(v)
                .iter()
                .map(|&nb| map.get(v, nb).expect("incident edge has a curvature"))
                .collect();
            ks.sort_by(|a, b| a.total_cmp(b));
            let (mean, var) = mean_and_population_var(&ks);
            let median = if ks.len() % 2 == 1 {
                ks[ks.len() / 2]
            } else {
                (ks[ks.len() / 2 - 1] + ks[ks.len() / 2]) / 2.0
            };
            vec![ks[0], *ks.last().unwrap(), mean, var.sqrt(), median]
        })
        .collect();
    Ok(rows)
}

// ---------------------------------------------------------------------
// BORF
// ---------------------------------------------------------------------

fn common_neighbors(g: &Graph, p: usize, q: usize) -> usize {
    let (mut a, mut b) = (g.neighbors(p).iter().peekable(), g.neighbors(q).iter().peekable());
    let mut count = 0;
    while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                count += 1;
                a.next();
                b.next();
            }
        }
    }
    count
}

/// For the flattest-curvature edge rule: the non-edge (p, q) bridging
/// the endpoint neighborhoods with the most common neighbors.
fn best_addition(g: &Graph, u: usize, v: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, (usize, usize))> = None;
    for &p in g.neighbors(u) {
        for &q in g.neighbors(v) {
            if p == q {
                continue;
            }
            let pair = (p.min(q), p.max(q));
            if g.has_edge(pair.0, pair.1) {
                continue;
            }
            let score = common_neighbors(g, pair.0, pair.1);
            let better = match best {
                None => true,
                Some((s, e)) => score > s || (score == s && pair < e),
            };
            if better {
                best = Some((score, pair));
            }
        }
    }
    best.map(|(_, e)| e)
}

/// Curvature-guided rewiring. Each batch recomputes curvature, then
/// around each of the `h_add` most negative edges adds the best
/// neighborhood-bridging non-edge, then removes the `h_del` most
/// positive edges, skipping any removal that would disconnect the
/// graph. Edits are applied sequentially, so later choices see earlier
/// ones.
pub fn borf_rewire(
    g: &Graph,
    batches: usize,
    h_add: usize,
    h_del: usize,
    alpha: f64,
) -> Result<(Graph, RewiringReport)> {
    validate_alpha(alpha)?;
    if !g.is_connected() {
        return Err(Error::Disconnected(format!(
            "curvature rewiring expects a connected graph, graph {} has {} components",
            g.id(),
            g.component_count()
        )));
    }
    let lambda2_of = |g: &Graph| -> Result<f64> {
        if g.n() < 2 {
            return Ok(0.0);
        }
        Ok(fiedler(g, LaplacianKind::Combinatorial)?.lambda2)
    };

    let mut work = g.clone();
    let mut report = RewiringReport::untouched(g.id(), lambda2_of(g)?);

    for _ in 0..batches {
        if work.m() == 0 {
            break;
        }
        let map = ollivier_curvature(&work, alpha)?;
        let mut ranked: Vec<((usize, usize), f64)> = map.iter().collect();
        // Stable sorts keep the lexicographic edge order within ties.
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));

        for &((u, v), kappa) in ranked.iter().take(h_add) {
            match best_addition(&work, u, v) {
                Some(edge) => {
                    work.add_edge(edge.0, edge.1)?;
                    report.edges_added.push(edge);
                    report.events.push(RewireEvent {
                        action: RewireAction::Add,
                        edge,
                        kappa: Some(kappa),
                        note: Some(format!("around edge ({u}, {v})")),
                    });
                }
                None => report.events.push(RewireEvent {
                    action: RewireAction::SkipAdd,
                    edge: (u, v),
                    kappa: Some(kappa),
                    note: Some("no non-edge bridges the endpoint neighborhoods".into()),
                }),
            }
        }

        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        for &((u, v), kappa) in ranked.iter().take(h_del) {
            work.remove_edge(u, v)?;
            if work.is_connected() {
                report.edges_removed.push((u, v));
                report.events.push(RewireEvent {
                    action: RewireAction::Remove,
                    edge: (u, v),
                    kappa: Some(kappa),
                    note: None,
                });
            } else {
                work.add_edge(u, v)?;
                report.events.push(RewireEvent {
                    action: RewireAction::SkipRemove,
                    edge: (u, v),
                    kappa: Some(kappa),
                    note: Some("removal would disconnect the graph".into()),
                });
            }
        }

        report.lambda2_steps.push(lambda2_of(&work)?);
    }

    report.lambda2_after = *report.lambda2_steps.last().unwrap();
    report.rewired = !report.edges_added.is_empty() || !report.edges_removed.is_empty();
    Ok((work, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build;
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn two_k4s_bridged() -> Graph {
        let mut edges = Vec::new();
        for a in 0..4 {
            for b in (a + 1)..4 {
                edges.push((a, b));
                edges.push((a + 4, b + 4));
            }
        }
        edges.push((3, 4));
        Graph::new(70, 8, edges, vec![vec![1.0]; 8], None).unwrap()
    }

    #[test]
    fn triangle_edges_curve_to_one_half() {
        let map = ollivier_curvature(&build::complete(0, 3), 0.0).unwrap();
        for (_, k) in map.iter() {
            assert_close(k, 0.5, 1e-12);
        }
    }

    #[test]
    fn hexagon_is_flat() {
        let map = ollivier_curvature(&build::cycle(0, 6), 0.0).unwrap();
        for (_, k) in map.iter() {
            assert_close(k, 0.0, 1e-12);
        }
    }

    #[test]
    fn single_edge_is_flat() {
        let map = ollivier_curvature(&build::complete(0, 2), 0.0).unwrap();
        assert_close(map.get(0, 1).unwrap(), 0.0, 1e-12);
    }

    #[test]
    fn laziness_out_of_range_rejected() {
        let g = build::complete(0, 3);
        assert!(ollivier_curvature(&g, 1.0).is_err());
        assert!(ollivier_curvature(&g, -0.1).is_err());
        assert!(ollivier_curvature(&g, f64::NAN).is_err());
    }

    #[test]
    fn curvature_survives_relabeling() {
        let mut rng = StdRng::seed_from_u64(30);
        for _ in 0..10 {
            let n = rng.gen_range(4..=8);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.5) {
                        edges.push((u, v));
                    }
                }
            }
            if edges.is_empty() {
                continue;
            }
            let g = Graph::new(71, n, edges.clone(), vec![vec![1.0]; n], None).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let relabeled = Graph::new(
                72,
                n,
                edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
                vec![vec![1.0]; n],
                None,
            )
            .unwrap();
            let a = ollivier_curvature(&g, 0.0).unwrap();
            let b = ollivier_curvature(&relabeled, 0.0).unwrap();
            for ((u, v), k) in a.iter() {
                assert_close(b.get(perm[u], perm[v]).unwrap(), k, 1e-9);
            }
        }
    }

    #[test]
    fn bridge_between_cliques_is_inter_community() {
        let g = two_k4s_bridged();
        let map = ollivier_curvature(&g, 0.0).unwrap();
        assert!(map.get(3, 4).unwrap() < 0.0, "bridge should curve negative");
        let gap = curvature_gap(&map);
        assert!(!gap.degenerate);
        assert!(gap.value > 0.0);
    }

    #[test]
    fn clique_gap_is_degenerate() {
        let map = ollivier_curvature(&build::complete(0, 5), 0.0).unwrap();
        assert!(map.iter().all(|(_, k)| k > 0.0));
        let gap = curvature_gap(&map);
        assert!(gap.degenerate);
        assert_eq!(gap.value, 0.0);
    }

    #[test]
    fn single_edge_per_class_is_degenerate() {
        // One positive and one negative edge: both class variances are
        // zero, so the normalizer vanishes.
        let map = CurvatureMap {
            alpha: 0.0,
            edges: vec![((0, 1), 0.4), ((1, 2), -0.3), ((2, 3), 0.0)],
        };
        let gap = curvature_gap(&map);
        assert!(gap.degenerate);
        assert_eq!(gap.value, 0.0);
    }

    #[test]
    fn lcp_rows_for_known_graphs() {
        for row in lcp_encoding(&build::complete(0, 3)).unwrap() {
            assert_eq!(row.len(), 5);
            for (got, want) in row.iter().zip([0.5, 0.5, 0.5, 0.0, 0.5]) {
                assert_close(*got, want, 1e-12);
            }
        }
        for row in lcp_encoding(&build::cycle(1, 6)).unwrap() {
            for v in row {
                assert_close(v, 0.0, 1e-12);
            }
        }
        for row in lcp_encoding(&build::complete(2, 2)).unwrap() {
            for v in row {
                assert_close(v, 0.0, 1e-12);
            }
        }
    }

    #[test]
    fn lcp_rejects_isolated_nodes() {
        let g = Graph::new(3, 3, vec![(0, 1)], vec![vec![1.0]; 3], None).unwrap();
        assert!(lcp_encoding(&g).is_err());
    }

    #[test]
    fn borf_without_budget_is_identity() {
        let g = build::cycle(0, 5);
        let (h, report) = borf_rewire(&g, 3, 0, 0, 0.0).unwrap();
        assert_eq!(h.edges(), g.edges());
        assert!(!report.rewired);
        assert!(report.events.is_empty());
    }

    #[test]
    fn borf_bridges_the_clique_pair() {
        let g = two_k4s_bridged();
        let (h, report) = borf_rewire(&g, 1, 1, 0, 0.0).unwrap();
        assert_eq!(report.edges_added.len(), 1);
        let (p, q) = report.edges_added[0];
        assert!(p < 4 && q >= 4, "expected a cross-clique edge, got ({p}, {q})");
        assert_eq!(h.m(), g.m() + 1);
        assert!(report.events.iter().any(|e| e.action == RewireAction::Add));
    }

    #[test]
    fn borf_removes_a_clique_edge_and_stays_connected() {
        let g = build::complete(0, 4);
        let (h, report) = borf_rewire(&g, 1, 0, 1, 0.0).unwrap();
        assert_eq!(report.edges_removed, vec![(0, 1)]);
        assert_eq!(h.m(), 5);
        assert!(h.is_connected());
    }

    #[test]
    fn borf_skips_disconnecting_removal() {
        let g = build::complete(0, 2);
        let (h, report) = borf_rewire(&g, 1, 0, 1, 0.0).unwrap();
        assert_eq!(h.m(), 1);
        assert!(report.edges_removed.is_empty());
        assert!(report
            .events
            .iter()
            .any(|e| e.action == RewireAction::SkipRemove));
        assert!(!report.rewired);
    }

    #[test]
    fn borf_edit_accounting_matches_edge_count() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..8 {
            let n = rng.gen_range(5..=9);
            let g = loop {
                let mut edges = Vec::new();
                for u in 0..n {
                    for v in (u + 1)..n {
                        if rng.gen_bool(0.45) {
                            edges.push((u, v));
                        }
                    }
                }
                let g = Graph::new(73, n, edges, vec![vec![1.0]; n], None).unwrap();
                if g.is_connected() {
                    break g;
                }
            };
            let (h, report) = borf_rewire(&g, 2, 2, 1, 0.0).unwrap();
            assert_eq!(
                h.m() as i64,
                g.m() as i64 + report.edges_added.len() as i64
                    - report.edges_removed.len() as i64
            );
            assert!(h.is_connected());
        }
    }

    #[test]
    fn borf_rejects_disconnected_input() {
        let g = Graph::new(4, 4, vec![(0, 1), (2, 3)], vec![vec![1.0]; 4], None).unwrap();
        assert!(borf_rewire(&g, 1, 1, 0, 0.0).is_err());
    }
}
