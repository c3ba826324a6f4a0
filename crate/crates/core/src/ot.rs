//! Exact solvers for the two optimal-transport shapes used in the crate:
//! the assignment problem (unit masses, equal cardinality) and the
//! balanced transportation problem (arbitrary nonnegative masses).
//!
//! Both are exact combinatorial solvers; no entropic regularization.

use crate::error::{Error, Result};

/// Solves the square assignment problem by shortest augmenting paths
/// with dual potentials in O(n^3). Returns the column assigned to each
/// row and the total cost.
///
/// All costs must be finite.
pub fn assignment(costs: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = costs.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    debug_assert!(costs.iter().all(|row| row.len() == n));
    debug_assert!(costs.iter().flatten().all(|c| c.is_finite()));

    // 1-indexed internals; p[j] is the row matched to column j, 0 = free.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i][j])
        .sum();
    (row_to_col, total)
}

/// Minimal total cost of the assignment problem.
pub fn assignment_cost(costs: &[Vec<f64>]) -> f64 {
    assignment(costs).1
}

const MASS_TOL: f64 = 1e-9;

/// Exact balanced transportation problem: moves `supply` onto `demand`
/// at `costs[i][j]` per unit, by successive shortest augmenting paths on
/// the bipartite residual network. Returns the minimal total cost.
///
/// Requires nonnegative finite costs and masses, and equal totals
/// (within 1e-9).
pub fn transportation(costs: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<f64> {
    let p = supply.len();
    let q = demand.len();
    if costs.len() != p || costs.iter().any(|row| row.len() != q) {
        return Err(Error::Dimension(format!("cost matrix is not {p} x {q}")));
    }
    if supply.iter().chain(demand).any(|&m| !(m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument("masses must be nonnegative and finite".into()));
    }
    if costs.iter().flatten().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument("costs must be nonnegative and finite".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > MASS_TOL {
        return Err(Error::InvalidArgument(format!(
            "unbalanced masses: supply {total_s} vs demand {total_d}"
        )));
    }

    // Node layout: supplies 0..p, demands p..p+q.
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut flow = vec![vec![0.0f64; q]; p];
    let n_nodes = p + q;

    loop {
        let active: f64 = rem_s.iter().sum();
        if active <= MASS_TOL {
            break;
        }
        // Bellman-Ford from all residual supplies over forward arcs i->j
        // (cost c_ij) and backward arcs j->i (cost -c_ij, present when
        // flow[i][j] > 0).
        let mut dist = vec![f64::INFINITY; n_nodes];
        let mut prev = vec![usize::MAX; n_nodes];
        for i in 0..p {
            if rem_s[i] > MASS_TOL {
                dist[i] = 0.0;
            }
        }
        for _ in 0..n_nodes {
            let mut changed = false;
            for i in 0..p {
                if dist[i].is_finite() {
                    for j in 0..q {
                        let nd = dist[i] + costs[i][j];
                        if nd < dist[p + j] - 1e-15 {
                            dist[p + j] = nd;
                            prev[p + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..q {
                if dist[p + j].is_finite() {
                    for i in 0..p {
                        if flow[i][j] > 0.0 {
                            let nd = dist[p + j] - costs[i][j];
                            if nd < dist[i] - 1e-15 {
                                dist[i] = nd;
                                prev[i] = p + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // Cheapest reachable demand with residual capacity.
        let mut best: Option<usize> = None;
        for j in 0..q {
            if rem_d[j] > MASS_TOL && dist[p + j].is_finite() {
                if best.is_none_or(|b| dist[p + j] < dist[p + b]) {
                    best = Some(j);
                }
            }
        }
        let Some(jt) = best else {
            return Err(Error::Degenerate("transportation ran out of augmenting paths".into()));
        };

        // Walk the path back to a supply, collecting the bottleneck.
        let mut path = Vec::new();
        let mut node = p + jt;
        while prev[node] != usize::MAX {
            path.push((prev[node], node));
            node = prev[node];
        }
        let src = node;
        let mut amount = rem_s[src].min(rem_d[jt]);
        for &(a, b) in &path {
            if a >= p {
                // backward arc j->i carries existing flow[i][j]
                amount = amount.min(flow[b][a - p]);
            }
        }
        rem_s[src] -= amount;
        rem_d[jt] -= amount;
        for &(a, b) in &path {
            if a < p {
                flow[a][b - p] += amount;
            } else {
                flow[b][a - p] -= amount;
            }
        }
    }

    let cost = flow
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, f)| f * costs[i][j]).sum::<f64>())
        .sum();
    Ok(cost)
}
