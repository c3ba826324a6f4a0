//! Classical topological graph characteristics used as regression
//! covariates: density, degrees, assortativity, diameter, clustering,
//! transitivity, algebraic connectivity, curvature gap, clique ratio.

use serde::Serialize;

use crate::curvature::{self, curvature_gap, ollivier_curvature};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{fiedler, LaplacianKind};

/// The nine per-graph features, in emission order, plus degeneracy
/// flags for the two statistics that can collapse.
#[derive(Debug, Clone, Serialize)]
pub struct TopoFeatures {
    pub edge_density: f64,
    pub average_degree: f64,
    pub degree_assortativity: f64,
    pub diameter: f64,
    pub avg_clustering: f64,
    pub transitivity: f64,
    pub algebraic_connectivity: f64,
    pub curvature_gap: f64,
    pub largest_clique_ratio: f64,
    pub assortativity_degenerate: bool,
    pub curvature_gap_degenerate: bool,
}

impl TopoFeatures {
    pub const COLUMNS: [&'static str; 9] = [
        "edge_density",
        "average_degree",
        "degree_assortativity",
        "diameter",
        "avg_clustering",
        "transitivity",
        "algebraic_connectivity",
        "curvature_gap",
        "largest_clique_ratio",
    ];

    pub fn row(&self) -> [f64; 9] {
        [
            self.edge_density,
            self.average_degree,
            self.degree_assortativity,
            self.diameter,
            self.avg_clustering,
            self.transitivity,
            self.algebraic_connectivity,
            self.curvature_gap,
            self.largest_clique_ratio,
        ]
    }
}

pub fn edge_density(g: &Graph) -> Result<f64> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("edge_density needs n >= 2, got {n}")));
    }
    Ok(2.0 * g.m() as f64 / (n as f64 * (n as f64 - 1.0)))
}

pub fn average_degree(g: &Graph) -> Result<f64> {
    if g.n() == 0 {
        return Err(Error::InvalidArgument("average_degree needs n >= 1".into()));
    }
    Ok(2.0 * g.m() as f64 / g.n() as f64)
}

/// Pearson correlation of endpoint degrees over both orientations of
/// every edge. Zero marginal variance yields (0, degenerate = true).
pub fn degree_assortativity(g: &Graph) -> Result<(f64, bool)> {
    if g.m() == 0 {
        return Err(Error::InvalidArgument("degree_assortativity needs at least one edge".into()));
    }
    let mut xs = Vec::with_capacity(2 * g.m());
    let mut ys = Vec::with_capacity(2 * g.m());
    for &(u, v) in g.edges() {
        let (du, dv) = (g.degree(u) as f64, g.degree(v) as f64);
        xs.push(du);
        ys.push(dv);
        xs.push(dv);
        ys.push(du);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok((0.0, true));
    }
    Ok(((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0), false))
}

/// Longest shortest path within the largest connected component (the
/// component with the most nodes; ties broken by smallest node id).
pub fn diameter(g: &Graph) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    let comp = g.components();
    let count = comp.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; count];
    for &c in &comp {
        sizes[c] += 1;
    }
    let largest = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
    let mut diam = 0usize;
    for v in 0..g.n() {
        if comp[v] != largest {
            continue;
        }
        let ecc = g
            .bfs_distances(v)
            .into_iter()
            .filter(|&d| d != usize::MAX)
            .max()
            .unwrap_or(0);
        diam = diam.max(ecc);
    }
    diam as f64
}

fn triangles_at(g: &Graph, v: usize) -> usize {
    let nb = g.neighbors(v);
    let mut t = 0;
    for (i, &a) in nb.iter().enumerate() {
        for &b in &nb[i + 1..] {
            if g.has_edge(a, b) {
                t += 1;
            }
        }
    }
    t
}

/// Mean local clustering coefficient; nodes of degree < 2 contribute 0.
pub fn avg_clustering(g: &Graph) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    let total: f64 = (0..g.n())
        .map(|v| {
            let d = g.degree(v);
            if d < 2 {
                0.0
            } else {
                2.0 * triangles_at(g, v) as f64 / (d as f64 * (d as f64 - 1.0))
            }
        })
        .sum();
    total / g.n() as f64
}

/// Global transitivity: 3 * triangles / triads, where a triad is a path
/// of length two (sum of C(deg, 2)); 0 when the graph has no triads.
pub fn transitivity(g: &Graph) -> f64 {
    let triads: usize = (0..g.n()).map(|v| g.degree(v) * (g.degree(v).saturating_sub(1)) / 2).sum();
    if triads == 0 {
        return 0.0;
    }
    // Each triangle is counted once per corner by triangles_at.
    let corners: usize = (0..g.n()).map(|v| triangles_at(g, v)).sum();
    corners as f64 / triads as f64
}

/// Size of the largest clique over n, via Bron-Kerbosch with pivoting.
/// `budget` caps the number of recursive expansions.
pub fn largest_clique_ratio_budgeted(g: &Graph, budget: usize) -> Result<f64> {
    if g.n() == 0 {
        return Err(Error::InvalidArgument("largest_clique_ratio needs n >= 1".into()));
    }
    let mut best = 1usize;
    let mut remaining = budget;
    let p: Vec<usize> = (0..g.n()).collect();
    bron_kerbosch(g, 0, p, Vec::new(), &mut best, &mut remaining)?;
    Ok(best as f64 / g.n() as f64)
}

pub fn largest_clique_ratio(g: &Graph) -> Result<f64> {
    largest_clique_ratio_budgeted(g, usize::MAX)
}

fn intersect_sorted(a: &[usize], g: &Graph, v: usize) -> Vec<usize> {
    a.iter().copied().filter(|&u| g.has_edge(u, v)).collect()
}

fn bron_kerbosch(
    g: &Graph,
    r_size: usize,
    mut p: Vec<usize>,
    mut x: Vec<usize>,
    best: &mut usize,
    remaining: &mut usize,
) -> Result<()> {
    if *remaining == 0 {
        return Err(Error::BudgetExceeded("clique search budget exhausted".into()));
    }
    *remaining = remaining.saturating_sub(1);
    if p.is_empty() && x.is_empty() {
        *best = (*best).max(r_size);
        return Ok(());
    }
    if r_size + p.len() <= *best {
        return Ok(());
    }
    // Pivot on the vertex of P u X covering the most of P.
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&w| g.has_edge(u, w)).count())
        .unwrap();
    let candidates: Vec<usize> = p.iter().copied().filter(|&v| !g.has_edge(pivot, v)).collect();
    for v in candidates {
        let np = intersect_sorted(&p, g, v);
        let nx = intersect_sorted(&x, g, v);
        bron_kerbosch(g, r_size + 1, np, nx, best, remaining)?;
        p.retain(|&u| u != v);
        x.push(v);
    }
    Ok(())
}

/// Assembles all nine features. Algebraic connectivity comes from the
/// combinatorial Laplacian; the curvature gap uses alpha = 0.
pub fn topo_features(g: &Graph) -> Result<TopoFeatures> {
    let (assort, assort_degenerate) = degree_assortativity(g)?;
    let fied = fiedler(g, LaplacianKind::Combinatorial)?;
    let curv = ollivier_curvature(g, curvature::DEFAULT_ALPHA)?;
    let gap = curvature_gap(&curv);
    Ok(TopoFeatures {
        edge_density: edge_density(g)?,
        average_degree: average_degree(g)?,
        degree_assortativity: assort,
        diameter: diameter(g),
        avg_clustering: avg_clustering(g),
        transitivity: transitivity(g),
        algebraic_connectivity: fied.lambda2,
        curvature_gap: gap.value,
        largest_clique_ratio: largest_clique_ratio(g)?,
        assortativity_degenerate: assort_degenerate,
        curvature_gap_degenerate: gap.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build, Graph};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn density_and_degree() {
        assert_eq!(edge_density(&build::complete(0, 3)).unwrap(), 1.0);
        assert_close(edge_density(&build::path(0, 3)).unwrap(), 2.0 / 3.0, 1e-15);
        let edgeless = Graph::new(0, 5, vec![], vec![vec![]; 5], None).unwrap();
        assert_eq!(edge_density(&edgeless).unwrap(), 0.0);
        assert!(edge_density(&build::path(0, 1)).is_err());

        assert_eq!(average_degree(&build::cycle(0, 4)).unwrap(), 2.0);
        assert_eq!(average_degree(&build::complete(0, 4)).unwrap(), 3.0);
        assert_close(average_degree(&build::star(0, 5)).unwrap(), 8.0 / 5.0, 1e-15);
    }

    #[test]
    fn assortativity_cases() {
        let (v, d) = degree_assortativity(&build::cycle(0, 4)).unwrap();
        assert_eq!((v, d), (0.0, true));

        let (v, d) = degree_assortativity(&build::path(0, 4)).unwrap();
        assert!(!d);
        assert_close(v, -0.5, 1e-12);

        let two_k2 = Graph::new(0, 4, vec![(0, 1), (2, 3)], vec![vec![]; 4], None).unwrap();
        let (v, d) = degree_assortativity(&two_k2).unwrap();
        assert_eq!((v, d), (0.0, true));

        let edgeless = Graph::new(0, 2, vec![], vec![vec![]; 2], None).unwrap();
        assert!(degree_assortativity(&edgeless).is_err());
    }

    #[test]
    fn diameter_uses_largest_component() {
        assert_eq!(diameter(&build::path(0, 4)), 3.0);
        assert_eq!(diameter(&build::complete(0, 5)), 1.0);
        // K3 plus P4: the path has more nodes, so its diameter wins.
        let mut edges = vec![(0, 1), (0, 2), (1, 2)];
        edges.extend([(3, 4), (4, 5), (5, 6)]);
        let g = Graph::new(0, 7, edges, vec![vec![]; 7], None).unwrap();
        assert_eq!(diameter(&g), 3.0);
    }

    #[test]
    fn clustering_and_transitivity() {
        assert_eq!(avg_clustering(&build::complete(0, 3)), 1.0);
        assert_eq!(transitivity(&build::complete(0, 3)), 1.0);
        assert_eq!(avg_clustering(&build::star(0, 4)), 0.0);
        assert_eq!(transitivity(&build::star(0, 4)), 0.0);

        // K4 minus one edge: 2 triangles, triads = C(3,2)*2 + C(2,2)*2 = 8.
        let g = Graph::new(0, 4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)], vec![vec![]; 4], None).unwrap();
        assert_close(transitivity(&g), 6.0 / 8.0, 1e-15);
        assert_close(avg_clustering(&g), (2.0 / 3.0 + 2.0 / 3.0 + 1.0 + 1.0) / 4.0, 1e-15);
    }

    #[test]
    fn clique_ratio() {
        assert_eq!(largest_clique_ratio(&build::complete(0, 4)).unwrap(), 1.0);
        assert_close(largest_clique_ratio(&build::path(0, 3)).unwrap(), 2.0 / 3.0, 1e-15);
        assert_close(largest_clique_ratio(&build::cycle(0, 5)).unwrap(), 2.0 / 5.0, 1e-15);
        for n in 2..=8 {
            assert_eq!(largest_clique_ratio(&build::complete(0, n)).unwrap(), 1.0);
        }
        assert!(matches!(
            largest_clique_ratio_budgeted(&build::complete(0, 8), 2),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn features_assemble() {
        let f = topo_features(&build::complete(0, 3)).unwrap();
        assert_eq!(f.edge_density, 1.0);
        assert_eq!(f.average_degree, 2.0);
        assert_eq!(f.degree_assortativity, 0.0);
        assert!(f.assortativity_degenerate);
        assert_eq!(f.diameter, 1.0);
        assert_eq!(f.avg_clustering, 1.0);
        assert_eq!(f.transitivity, 1.0);
        assert_close(f.algebraic_connectivity, 3.0, 1e-10);
        // All K3 curvatures are positive, so the gap degenerates to 0.
        assert_eq!(f.curvature_gap, 0.0);
        assert!(f.curvature_gap_degenerate);
        assert_eq!(f.largest_clique_ratio, 1.0);

        let p3 = topo_features(&build::path(0, 3)).unwrap();
        assert_close(p3.edge_density, 2.0 / 3.0, 1e-15);
        assert_close(p3.algebraic_connectivity, 1.0, 1e-10);

        let edgeless = Graph::new(0, 2, vec![], vec![vec![]; 2], None).unwrap();
        assert!(topo_features(&edgeless).is_err());
    }

    fn permute(g: &Graph, perm: &[usize]) -> Graph {
        let edges = g.edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut feats = vec![Vec::new(); g.n()];
        for v in 0..g.n() {
            feats[perm[v]] = g.features()[v].clone();
        }
        Graph::new(g.id(), g.n(), edges, feats, g.label().cloned()).unwrap()
    }

    #[test]
    fn relabeling_invariance() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(3..8);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.5) {
                        edges.push((u, v));
                    }
                }
            }
            if edges.is_empty() {
                edges.push((0, 1));
            }
            let g = Graph::new(0, n, edges, vec![vec![]; n], None).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let h = permute(&g, &perm);
            assert_close(edge_density(&g).unwrap(), edge_density(&h).unwrap(), 1e-12);
            assert_close(average_degree(&g).unwrap(), average_degree(&h).unwrap(), 1e-12);
            let (ag, _) = degree_assortativity(&g).unwrap();
            let (ah, _) = degree_assortativity(&h).unwrap();
            assert_close(ag, ah, 1e-12);
            assert_close(diameter(&g), diameter(&h), 1e-12);
            assert_close(avg_clustering(&g), avg_clustering(&h), 1e-12);
            assert_close(transitivity(&g), transitivity(&h), 1e-12);
            assert_close(
                largest_clique_ratio(&g).unwrap(),
                largest_clique_ratio(&h).unwrap(),
                1e-12,
            );
        }
    }

    #[test]
    fn regular_graphs_tie_clustering_and_transitivity() {
        // On vertex-transitive graphs every local coefficient is equal,
        // so the mean matches the triad ratio.
        for g in [build::cycle(0, 6), build::complete(1, 5)] {
            assert_close(avg_clustering(&g), transitivity(&g), 1e-12);
        }
        // C6 with opposite chords: vertex-transitive, all degrees 3.
        let prism = Graph::new(
            2,
            6,
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3), (1, 4), (2, 5)],
            vec![vec![]; 6],
            None,
        )
        .unwrap();
        assert_close(avg_clustering(&prism), transitivity(&prism), 1e-12);
    }

    #[test]
    fn monotone_under_edge_addition() {
        let mut g = build::path(0, 5);
        let before_density = edge_density(&g).unwrap();
        let before_degree = average_degree(&g).unwrap();
        g.add_edge(0, 4).unwrap();
        assert!(edge_density(&g).unwrap() >= before_density);
        assert!(average_degree(&g).unwrap() >= before_degree);
    }
}
