//! Dense symmetric eigensolver, graph Laplacians, Fiedler pairs,
//! consensus dynamics, and spectral node encodings.
//!
//! The eigensolver is a cyclic Jacobi sweep: robust, dependency-free,
//! and exact enough for the graph sizes this crate targets. Everything
//! downstream (algebraic connectivity, rewiring reports, consensus
//! rates) funnels through it, so its tolerances are the crate's
//! spectral ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest matrix order the dense eigensolver accepts.
pub const DENSE_LIMIT: usize = 4096;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 50;

// ---------------------------------------------------------------------
// Symmetric matrices
// ---------------------------------------------------------------------

/// Dense symmetric matrix, packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix { n, data: vec![0.0; n * (n + 1) / 2] }
    }

    /// Builds from `f(i, j)` evaluated on the lower triangle (`i >= j`).
    /// Entries must be finite.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite(), "symmetric matrix entries must be finite");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Frobenius norm of the full (unpacked) matrix.
    pub fn frobenius(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.get(i, j);
                sum += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        sum.sqrt()
    }

    fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.get(i, j);
            }
        }
        a
    }
}

/// Eigenpairs in ascending eigenvalue order; `eigenvectors[k]` is the
/// unit eigenvector for `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Full eigendecomposition by cyclic Jacobi rotations. Converges when
/// the off-diagonal Frobenius norm falls below 1e-12 of the input's
/// Frobenius norm; fails after 50 sweeps otherwise.
pub fn eig_sym(m: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = m.order();
    if n > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "matrix order {n} exceeds the dense eigensolver limit {DENSE_LIMIT}"
        )));
    }
    if n == 0 {
        return Ok(SpectralDecomposition { eigenvalues: Vec::new(), eigenvectors: Vec::new() });
    }

    let mut a = m.to_dense();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = JACOBI_REL_TOL * m.frobenius();

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut residual = off_norm(&a);
    let mut converged = residual <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        sweeps += 1;
        residual = off_norm(&a);
        converged = residual <= threshold;
    }
    if !converged {
        return Err(Error::NonConvergence {
            op: "jacobi eigensolver",
            residual,
            iterations: sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let eigenvalues = order.iter().map(|&k| a[k * n + k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| (0..n).map(|r| v[r * n + k]).collect())
        .collect();
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

// ---------------------------------------------------------------------
// Graph Laplacians
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaplacianKind {
    /// D - A.
    Combinatorial,
    /// I - D^{-1/2} A D^{-1/2}, with all-zero rows for isolated nodes.
    Normalized,
}

pub fn laplacian(g: &Graph, kind: LaplacianKind) -> SymmetricMatrix {
    let n = g.n();
    match kind {
        LaplacianKind::Combinatorial => SymmetricMatrix::from_fn(n, |i, j| {
            if i == j {
                g.degree(i) as f64
            } else if g.has_edge(i, j) {
                -1.0
            } else {
                0.0
            }
        }),
        LaplacianKind::Normalized => SymmetricMatrix::from_fn(n, |i, j| {
            if i == j {
                if g.degree(i) == 0 {
                    0.0
                } else {
                    1.0
                }
            } else if g.has_edge(i, j) {
                -1.0 / ((g.degree(i) as f64) * (g.degree(j) as f64)).sqrt()
            } else {
                0.0
            }
        }),
    }
}

// ---------------------------------------------------------------------
// Fiedler pair
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fiedler {
    pub lambda2: f64,
    pub vector: Vec<f64>,
}

/// Flips the sign so the first component above 1e-12 in magnitude is
/// positive.
pub fn fix_sign(v: &mut [f64]) {
    for &x in v.iter() {
        if x.abs() > 1e-12 {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

/// Algebraic connectivity and its unit eigenvector. Disconnected graphs
/// report exactly 0 (the second zero eigenvalue), so callers can test
/// `lambda2 == 0.0` without numerical slop.
pub fn fiedler(g: &Graph, kind: LaplacianKind) -> Result<Fiedler> {
    if g.n() < 2 {
        return Err(Error::InvalidArgument(format!(
            "fiedler needs at least 2 nodes, graph {} has {}",
            g.id(),
            g.n()
        )));
    }
    let dec = eig_sym(&laplacian(g, kind))?;
    let lambda2 = if g.is_connected() { dec.eigenvalues[1] } else { 0.0 };
    let mut vector = dec.eigenvectors[1].clone();
    fix_sign(&mut vector);
    Ok(Fiedler { lambda2, vector })
}

// ---------------------------------------------------------------------
// Consensus dynamics
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsensusMethod {
    /// Exact evolution through the eigendecomposition.
    Spectral,
    /// Explicit Euler steps; requires dt < 2 / lambda_max.
    Euler,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsensusTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Least-squares slope of log ||x(t) - x_inf|| over the second half
    /// of the trajectory; None when the residual is already at noise
    /// level. Approximately -lambda2 for generic initial states.
    pub decay_rate: Option<f64>,
}

/// Simulates x' = -L x on a connected graph, sampling at t = 0, dt,
/// 2 dt, ... up to t_end.
pub fn consensus_simulate(
    g: &Graph,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    method: ConsensusMethod,
    kind: LaplacianKind,
) -> Result<ConsensusTrajectory> {
    let n = g.n();
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has length {}, graph has {n} nodes", x0.len())));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("x0 must be finite".into()));
    }
    if !(t_end > 0.0) || !(dt > 0.0) || !t_end.is_finite() || !dt.is_finite() {
        return Err(Error::InvalidArgument("t_end and dt must be positive and finite".into()));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected(format!("graph {}", g.id())));
    }

    let dec = eig_sym(&laplacian(g, kind))?;
    let lambda_max = *dec.eigenvalues.last().unwrap();
    if method == ConsensusMethod::Euler && lambda_max > 0.0 && dt >= 2.0 / lambda_max {
        return Err(Error::UnstableStep { dt, limit: 2.0 / lambda_max });
    }

    let steps = (t_end / dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();

    // Projection of x0 on the stationary eigenvector gives the limit.
    let q0 = &dec.eigenvectors[0];
    let c0: f64 = q0.iter().zip(x0).map(|(q, x)| q * x).sum();
    let x_inf: Vec<f64> = q0.iter().map(|q| c0 * q).collect();

    let states: Vec<Vec<f64>> = match method {
        ConsensusMethod::Spectral => {
            let coeffs: Vec<f64> = dec
                .eigenvectors
                .iter()
                .map(|q| q.iter().zip(x0).map(|(a, b)| a * b).sum())
                .collect();
            times
                .iter()
                .map(|&t| {
                    let mut x = vec![0.0; n];
                    for (k, q) in dec.eigenvectors.iter().enumerate() {
                        let amp = coeffs[k] * (-dec.eigenvalues[k] * t).exp();
                        if amp == 0.0 {
                            continue;
                        }
                        for i in 0..n {
                            x[i] += amp * q[i];
                        }
                    }
                    x
                })
                .collect()
        }
        ConsensusMethod::Euler => {
            let lap = laplacian(g, kind);
            let mut x = x0.to_vec();
            let mut out = Vec::with_capacity(steps + 1);
            out.push(x.clone());
            for _ in 0..steps {
                let mut lx = vec![0.0; n];
                for i in 0..n {
                    let mut acc = lap.get(i, i) * x[i];
                    for &j in g.neighbors(i) {
                        acc += lap.get(i, j) * x[j];
                    }
                    lx[i] = acc;
                }
                for i in 0..n {
                    x[i] -= dt * lx[i];
                }
                out.push(x.clone());
            }
            out
        }
    };

    let decay_rate = fit_decay(&times, &states, &x_inf);
    Ok(ConsensusTrajectory { times, states, decay_rate })
}

/// Slope of the log residual over the second half of the trajectory.
fn fit_decay(times: &[f64], states: &[Vec<f64>], x_inf: &[f64]) -> Option<f64> {
    let start = times.len() / 2;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for k in start..times.len() {
        let r: f64 = states[k]
            .iter()
            .zip(x_inf)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if r > 1e-150 {
            pts.push((times[k], r.ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

// ---------------------------------------------------------------------
// Node encodings
// ---------------------------------------------------------------------

/// Laplacian positional encoding: columns are the sign-fixed unit
/// eigenvectors of the k smallest nonzero-index eigenvalues (lambda_2
/// through lambda_{k+1}). Returns an n x k matrix as rows.
pub fn lape_encoding(g: &Graph, k: usize, kind: LaplacianKind) -> Result<Vec<Vec<f64>>> {
    let n = g.n();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "lape needs k < n, got k = {k} with n = {n}"
        )));
    }
    let dec = eig_sym(&laplacian(g, kind))?;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for t in 0..k {
        match dec.eigenvectors.get(1 + t) {
            Some(col) => {
                let mut c = col.clone();
                fix_sign(&mut c);
                cols.push(c);
            }
            None => cols.push(vec![0.0; n]),
        }
    }
    Ok((0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Random-walk positional encoding: column t is the diagonal of
/// (D^{-1} A)^{t+1}, t = 0..k-1. Fails on isolated nodes.
pub fn rwpe_encoding(g: &Graph, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = g.n();
    if (0..n).any(|v| g.degree(v) == 0) {
        return Err(Error::Degenerate(format!(
            "rwpe undefined on graph {}: isolated node",
            g.id()
        )));
    }
    let mut out = vec![vec![0.0; k]; n];
    if k == 0 || n == 0 {
        return Ok(out);
    }
    // m holds (D^{-1} A)^t, updated by one sparse right-multiplication
    // per power: (m P)[i][j] = sum over w in N(j) of m[i][w] / deg(w).
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d = g.degree(i) as f64;
        for &j in g.neighbors(i) {
            m[i][j] = 1.0 / d;
        }
    }
    for t in 0..k {
        if t > 0 {
            let mut next = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for &w in g.neighbors(j) {
                        acc += m[i][w] / g.degree(w) as f64;
                    }
                    next[i][j] = acc;
                }
            }
            m = next;
        }
        for i in 0..n {
            out[i][t] = m[i][i];
        }
    }
    Ok(out)
}

/// Local degree profile: per node, degree plus min/max/mean/std of the
/// neighbor degrees (population std). Isolated nodes get all zeros.
pub fn ldp_encoding(g: &Graph) -> Vec<Vec<f64>> {
    (0..g.n())
        .map(|v| {
            let degs: Vec<f64> = g.neighbors(v).iter().map(|&u| g.degree(u) as f64).collect();
            if degs.is_empty() {
                return vec![0.0; 5];
            }
            let min = degs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = degs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = degs.iter().sum::<f64>() / degs.len() as f64;
            let var = degs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / degs.len() as f64;
            vec![g.degree(v) as f64, min, max, mean, var.sqrt()]
        })
        .collect()
}
