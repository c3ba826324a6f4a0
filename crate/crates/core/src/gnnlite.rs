//! Minimal deterministic message-passing forward pass (sum aggregation
//! over the closed neighborhood, two-matrix update maps, ReLU, sum
//! readout) together with computable Lipschitz bounds, used to verify
//! the tree-distance stability inequality.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tmd::{tmd, WeightSchedule};

/// One round of the update map: z -> W2 * relu(W1 * z + b1) + b2.
#[derive(Debug, Clone)]
pub struct Layer {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl Layer {
    fn input_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    fn output_dim(&self) -> usize {
        self.w2.len()
    }
}

/// Stacked update maps plus a linear readout applied to the sum of the
/// final node embeddings.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    layers: Vec<Layer>,
    readout: Vec<Vec<f64>>,
    readout_bias: Vec<f64>,
}

fn check_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension(format!("{name} is not {rows} x {cols}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has a non-finite entry")));
    }
    Ok(())
}

impl ForwardModel {
    pub fn new(
        layers: Vec<Layer>,
        readout: Vec<Vec<f64>>,
        readout_bias: Vec<f64>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a forward model needs at least one layer".into()));
        }
        let mut dim = layers[0].input_dim();
        if dim == 0 {
            return Err(Error::Dimension("layer 1 has input dim 0".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            let hidden = layer.w1.len();
            let out = layer.output_dim();
            if hidden == 0 || out == 0 {
                return Err(Error::Dimension(format!("layer {} has an empty map", i + 1)));
            }
            check_matrix(&format!("layer {} w1", i + 1), &layer.w1, hidden, dim)?;
            check_matrix(&format!("layer {} w2", i + 1), &layer.w2, out, hidden)?;
            if layer.b1.len() != hidden || layer.b2.len() != out {
                return Err(Error::Dimension(format!("layer {} bias dims", i + 1)));
            }
            if layer.b1.iter().chain(&layer.b2).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "layer {} has a non-finite bias",
                    i + 1
                )));
            }
            dim = out;
        }
        if readout.is_empty() {
            return Err(Error::Dimension("readout map is empty".into()));
        }
        check_matrix("readout", &readout, readout.len(), dim)?;
        if readout_bias.len() != readout.len() || readout_bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("readout bias dim".into()));
        }
        Ok(ForwardModel { layers, readout, readout_bias })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.readout.len()
    }

    /// Message-passing rounds, excluding the readout.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn readout(&self) -> &[Vec<f64>] {
        &self.readout
    }
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// L rounds of sum-aggregate-then-update over N(v) plus v itself, then
/// the linear readout of the summed embeddings.
pub fn gcn_forward(g: &Graph, model: &ForwardModel) -> Result<Vec<f64>> {
    if g.feature_dim() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "graph {} features have dim {}, model expects {}",
            g.id(),
            g.feature_dim(),
            model.input_dim()
        )));
    }
    let mut x: Vec<Vec<f64>> = g.features().to_vec();
    for layer in &model.layers {
        x = (0..g.n())
            .map(|v| {
                let mut agg = x[v].clone();
                for &u in g.neighbors(v) {
                    for (a, b) in agg.iter_mut().zip(&x[u]) {
                        *a += b;
                    }
                }
                let mut hidden = matvec(&layer.w1, &agg);
                for (h, b) in hidden.iter_mut().zip(&layer.b1) {
                    *h = (*h + b).max(0.0);
                }
                let mut out = matvec(&layer.w2, &hidden);
                for (o, b) in out.iter_mut().zip(&layer.b2) {
                    *o += b;
                }
                out
            })
            .collect();
    }
    let dim = x[0].len();
    let mut pooled = vec![0.0; dim];
    for row in &x {
        for (p, v) in pooled.iter_mut().zip(row) {
            *p += v;
        }
    }
    let mut out = matvec(&model.readout, &pooled);
    for (o, b) in out.iter_mut().zip(&model.readout_bias) {
        *o += b;
    }
    Ok(out)
}

/// Largest singular value by alternating power iteration on W and its
/// transpose, run to 1e-10 relative tolerance.
fn spectral_norm(m: &[Vec<f64>]) -> f64 {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    // Deterministic, mildly asymmetric start.
    let mut v: Vec<f64> = (0..cols).map(|j| 1.0 + 0.001 * j as f64).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    let mut sigma = 0.0;
    for _ in 0..100_000 {
        let u = matvec(m, &v);
        let next_sigma = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if next_sigma == 0.0 {
            return 0.0;
        }
        let mut vt = vec![0.0; cols];
        for (i, row) in m.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                vt[j] += a * u[i];
            }
        }
        let vt_norm = vt.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut vt {
            *x /= vt_norm;
        }
        let done = (next_sigma - sigma).abs() <= 1e-10 * next_sigma.max(1e-300);
        sigma = next_sigma;
        v = vt;
        if done {
            break;
        }
    }
    sigma
}

/// Per-layer Lipschitz constants: the product of the two weight-matrix
/// spectral norms for each update map (ReLU contributes 1), and the
/// readout norm as the final entry.
pub fn lipschitz_bounds(model: &ForwardModel) -> Vec<f64> {
    let mut ks: Vec<f64> = model
        .layers
        .iter()
        .map(|l| spectral_norm(&l.w1) * spectral_norm(&l.w2))
        .collect();
    ks.push(spectral_norm(&model.readout));
    ks
}

/// The level weights under which the depth-(L+1) tree distance
/// dominates the forward pass's amplification: tree level l >= 2 gets
/// eps * (l-1) / (L+2-l), so the per-level products telescope to the
/// binomial path counts of sum aggregation with a self-loop. Level 1
/// (bare leaves) never weights a transport term; it carries a positive
/// filler to keep the schedule total.
pub fn stability_weights(layers: usize, eps: f64) -> Result<WeightSchedule> {
    if layers == 0 {
        return Err(Error::InvalidArgument("stability schedule needs L >= 1".into()));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let table: Vec<f64> = (1..=layers + 1)
        .map(|l| {
            if l == 1 {
                eps / (layers + 1) as f64
            } else {
                eps * (l - 1) as f64 / (layers + 2 - l) as f64
            }
        })
        .collect();
    WeightSchedule::from_table(table, 1.0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the output distance against the product of the layer
/// Lipschitz constants times the depth-(L+1) tree distance under the
/// stability schedule.
pub fn verify_tmd_bound(
    a: &Graph,
    b: &Graph,
    model: &ForwardModel,
    eps: f64,
) -> Result<BoundCheck> {
    let ha = gcn_forward(a, model)?;
    let hb = gcn_forward(b, model)?;
    let lhs = ha
        .iter()
        .zip(&hb)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let schedule = stability_weights(model.depth(), eps)?;
    let distance = tmd(a, b, model.depth() + 1, &schedule)?;
    let rhs = lipschitz_bounds(model).iter().product::<f64>() * distance;
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs + 1e-9 })
}

// ---------------------------------------------------------------------
// Randomized suite
// ---------------------------------------------------------------------

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Uniform(-1, 1) weights with zero internal biases: the stability
/// argument compares against blank (all-zero) trees, which embed to
/// zero only when every update map fixes the origin. The readout bias
/// cancels in output differences and stays random.
pub fn random_model(rng: &mut ChaCha8Rng, input_dim: usize, layers: usize) -> ForwardModel {
    let mut dim = input_dim;
    let mut stack = Vec::with_capacity(layers);
    for _ in 0..layers {
        let hidden = rng.gen_range(1..=4);
        let out = rng.gen_range(1..=4);
        stack.push(Layer {
            w1: random_matrix(rng, hidden, dim),
            b1: vec![0.0; hidden],
            w2: random_matrix(rng, out, hidden),
            b2: vec![0.0; out],
        });
        dim = out;
    }
    let out_dim = rng.gen_range(1..=2);
    let readout = random_matrix(rng, out_dim, dim);
    let readout_bias = (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ForwardModel::new(stack, readout, readout_bias).expect("generated dims chain")
}

pub fn random_graph_pair(
    rng: &mut ChaCha8Rng,
    max_nodes: usize,
    dim: usize,
) -> (Graph, Graph) {
    let mut make = |id: u64| {
        let n = rng.gen_range(1..=max_nodes);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(0.4) {
                    edges.push((u, v));
                }
            }
        }
        let features = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Graph::new(id, n, edges, features, None).expect("valid random graph")
    };
    (make(0), make(1))
}

/// Seeded exhaustive check: draws model/graph-pair instances and runs
/// the bound on each, in parallel.
pub fn random_bound_suite(
    n_pairs: usize,
    max_nodes: usize,
    max_layers: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<BoundCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let dim = rng.gen_range(1..=3);
        let layers = rng.gen_range(1..=max_layers.max(1));
        let model = random_model(&mut rng, dim, layers);
        let (a, b) = random_graph_pair(&mut rng, max_nodes.max(1), dim);
        instances.push((a, b, model));
    }
    instances
        .par_iter()
        .map(|(a, b, model)| verify_tmd_bound(a, b, model, eps))
        .collect()
}
