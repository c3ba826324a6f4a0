//! Aggregation of prediction logs into per-graph profiles, plus the
//! statistical layer on top: correlation, lasso regression, optimal
//! depth histograms, training dynamics, and encoding effect ratios.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graphio::PredictionRecord;

/// What a prediction value means: correctness in {0,1} (higher is
/// better) or absolute error (lower is better).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Mae,
}

impl Metric {
    /// True when `a` is a strictly better score than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Mae => a < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub graph_id: u64,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Per-graph evaluation statistics, rows sorted by mean so emitted
/// profiles are directly plottable.
#[derive(Debug, Clone, Serialize)]
pub struct HeterogeneityProfile {
    pub metric: Metric,
    pub rows: Vec<ProfileRow>,
    /// Graphs evaluated fewer than 100 times; a caution, not an error.
    pub low_count: Vec<u64>,
}

impl HeterogeneityProfile {
    pub fn mean_by_id(&self) -> BTreeMap<u64, f64> {
        self.rows.iter().map(|r| (r.graph_id, r.mean)).collect()
    }
}

fn unbiased_variance(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Groups records by graph and reduces each group to count, mean, and
/// unbiased variance. Accuracy mode insists on 0/1 values.
pub fn build_profile(records: &[PredictionRecord], metric: Metric) -> Result<HeterogeneityProfile> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no prediction records".into()));
    }
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        if metric == Metric::Accuracy && r.value != 0.0 && r.value != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "graph {}: accuracy records are 0/1 correctness, found {}",
                r.graph_id, r.value
            )));
        }
        groups.entry(r.graph_id).or_default().push(r.value);
    }
    let mut rows = Vec::with_capacity(groups.len());
    let mut low_count = Vec::new();
    for (graph_id, values) in groups {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if values.len() < 100 {
            low_count.push(graph_id);
        }
        rows.push(ProfileRow {
            graph_id,
            count: values.len(),
            mean,
            variance: unbiased_variance(&values, mean),
        });
    }
    rows.sort_by(|a, b| {
        a.mean
            .partial_cmp(&b.mean)
            .expect("finite means")
            .then(a.graph_id.cmp(&b.graph_id))
    });
    Ok(HeterogeneityProfile { metric, rows, low_count })
}

/// Sample correlation with a two-sided p-value from the exact Student-t
/// transform t = r * sqrt((n - 2) / (1 - r^2)).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} x values against {} y values",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 3 points, got {n}"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("a variable with zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return Ok((r, 0.0));
    }
    let t = r * ((n - 2) as f64 / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 2) as f64)
        .expect("positive degrees of freedom");
    let p = 2.0 * dist.cdf(-t.abs());
    Ok((r, p))
}

/// Linear model with an L1 penalty, coefficients reported in the
/// original feature scale.
#[derive(Debug, Clone, Serialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub r_squared: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// Constant columns excluded from the fit (coefficient fixed at 0).
    pub dropped: Vec<usize>,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }

    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

struct Standardized {
    z: Vec<Vec<f64>>,
    kept: Vec<usize>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

fn standardize(x: &[Vec<f64>]) -> Result<Standardized> {
    let n = x.len();
    let p = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != p) {
        return Err(Error::Dimension(format!(
            "design row of length {} in a {p}-column matrix",
            bad.len()
        )));
    }
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    let mut kept = Vec::new();
    for j in 0..p {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let v = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
        means[j] = m;
        stds[j] = v.sqrt();
        if stds[j] > 0.0 {
            kept.push(j);
        }
    }
    let z = x
        .iter()
        .map(|r| kept.iter().map(|&j| (r[j] - means[j]) / stds[j]).collect())
        .collect();
    Ok(Standardized { z, kept, means, stds })
}

/// Cyclic coordinate descent with soft-thresholding on the internally
/// standardized problem, objective (1/2n) * ||y - X b - b0||^2 + lambda * ||b||_1.
/// Stops when the largest coefficient change in a sweep is at most
/// 1e-8; gives up after 10^4 sweeps.
pub fn lasso_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoFit> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::Dimension(format!(
            "{n} design rows against {} targets",
            y.len()
        )));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty {lambda} out of range")));
    }
    let p = x[0].len();
    let std = standardize(x)?;
    let k = std.kept.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut beta = vec![0.0; k];
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut sweeps = 0;
    let mut delta = 0.0f64;
    let mut converged = k == 0;
    while sweeps < 10_000 && !converged {
        delta = 0.0;
        for j in 0..k {
            // Population-standardized columns have (1/n) * sum z^2 = 1, so
            // the coordinate update is a bare soft-threshold.
            let rho = std
                .z
                .iter()
                .zip(&residual)
                .map(|(row, r)| row[j] * (r + row[j] * beta[j]))
                .sum::<f64>()
                / n as f64;
            let next = soft_threshold(rho, lambda);
            let step = next - beta[j];
            if step != 0.0 {
                for (row, r) in std.z.iter().zip(residual.iter_mut()) {
                    *r -= row[j] * step;
                }
                beta[j] = next;
            }
            delta = delta.max(step.abs());
        }
        sweeps += 1;
        converged = delta <= 1e-8;
    }
    if !converged {
        return Err(Error::NonConvergence {
            op: "lasso coordinate descent".into(),
            residual: delta,
            iterations: sweeps,
        });
    }

    let mut coefficients = vec![0.0; p];
    let mut intercept = y_mean;
    for (slot, &j) in std.kept.iter().enumerate() {
        coefficients[j] = beta[slot] / std.stds[j];
        intercept -= coefficients[j] * std.means[j];
    }
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &t)| {
            let pred = intercept
                + row.iter().zip(&coefficients).map(|(v, b)| v * b).sum::<f64>();
            (t - pred).powi(2)
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let dropped = (0..p).filter(|j| !std.kept.contains(j)).collect();
    Ok(LassoFit {
        coefficients,
        intercept,
        lambda,
        r_squared,
        feature_means: std.means,
        feature_stds: std.stds,
        dropped,
        sweeps,
    })
}

/// Smallest penalty that zeroes every coefficient on the standardized
/// problem.
pub fn lambda_max(x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} design rows against {} targets",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let std = standardize(x)?;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut best: f64 = 0.0;
    for j in 0..std.kept.len() {
        let dot = std
            .z
            .iter()
            .zip(y)
            .map(|(row, &t)| row[j] * (t - y_mean))
            .sum::<f64>();
        best = best.max((dot / n as f64).abs());
    }
    Ok(best)
}

/// 20 penalties, log-spaced from `top` down to `top` / 10^3.
pub fn lambda_grid(top: f64) -> Vec<f64> {
    let points = 20;
    (0..points)
        .map(|i| top * 1000f64.powf(-(i as f64) / (points - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    pub fit: LassoFit,
    /// (lambda, mean held-out squared error) over the grid, lambda descending.
    pub grid: Vec<(f64, f64)>,
}

/// Picks the penalty by k-fold cross-validation over the default grid
/// (contiguous folds, so the result is deterministic), then refits on
/// all rows. Ties prefer the larger, sparser penalty.
pub fn lasso_cv(x: &[Vec<f64>], y: &[f64], folds: usize) -> Result<CrossValidation> {
    let n = x.len();
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds for {n} rows"
        )));
    }
    let top = lambda_max(x, y)?;
    if top == 0.0 {
        return Err(Error::Degenerate("target uncorrelated with every feature".into()));
    }
    let lambdas = lambda_grid(top);
    let mut scores = vec![0.0; lambdas.len()];
    for fold in 0..folds {
        let lo = fold * n / folds;
        let hi = (fold + 1) * n / folds;
        let mut train_x = Vec::with_capacity(n - (hi - lo));
        let mut train_y = Vec::with_capacity(n - (hi - lo));
        for i in (0..n).filter(|i| *i < lo || *i >= hi) {
            train_x.push(x[i].clone());
            train_y.push(y[i]);
        }
        for (s, &lambda) in scores.iter_mut().zip(&lambdas) {
            let fit = lasso_fit(&train_x, &train_y, lambda)?;
            let err: f64 = (lo..hi)
                .map(|i| (y[i] - fit.predict(&x[i])).powi(2))
                .sum();
            *s += err / (hi - lo) as f64;
        }
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    let fit = lasso_fit(x, y, lambdas[best])?;
    let grid = lambdas
        .iter()
        .zip(&scores)
        .map(|(&l, &s)| (l, s / folds as f64))
        .collect();
    Ok(CrossValidation { fit, grid })
}

/// For each graph, the depth whose profile scores best (ties go to the
/// shallowest), histogrammed over all provided depths.
pub fn optimal_depth_distribution(
    profiles: &BTreeMap<usize, HeterogeneityProfile>,
) -> Result<BTreeMap<usize, usize>> {
    if profiles.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need profiles for at least 2 depths, got {}",
            profiles.len()
        )));
    }
    let metric = profiles.values().next().expect("nonempty").metric;
    if profiles.values().any(|p| p.metric != metric) {
        return Err(Error::InvalidArgument("profiles mix metric kinds".into()));
    }
    let reference: BTreeSet<u64> =
        profiles.values().next().expect("nonempty").rows.iter().map(|r| r.graph_id).collect();
    let mut means: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
    for (&depth, profile) in profiles {
        let ids: BTreeSet<u64> = profile.rows.iter().map(|r| r.graph_id).collect();
        if ids != reference {
            return Err(Error::InvalidDataset(format!(
                "depth {depth} covers a different graph set"
            )));
        }
        means.insert(depth, profile.mean_by_id());
    }
    let mut histogram: BTreeMap<usize, usize> =
        profiles.keys().map(|&d| (d, 0)).collect();
    for &id in &reference {
        let mut best: Option<(usize, f64)> = None;
        for (&depth, by_id) in &means {
            let mean = by_id[&id];
            let wins = match best {
                None => true,
                Some((_, incumbent)) => metric.better(mean, incumbent),
            };
            if wins {
                best = Some((depth, mean));
            }
        }
        let (depth, _) = best.expect("at least 2 depths");
        *histogram.get_mut(&depth).expect("depth key") += 1;
    }
    Ok(histogram)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Per-epoch spread across graphs: each graph is reduced to its mean
/// value for the epoch, then the cross-graph mean and unbiased variance
/// of those means are reported.
pub fn training_dynamics(records: &[PredictionRecord]) -> Result<Vec<EpochStats>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no prediction records".into()));
    }
    let mut per_epoch: BTreeMap<usize, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let epoch = r.epoch.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "record for graph {} run {} carries no epoch",
                r.graph_id, r.run_id
            ))
        })?;
        per_epoch
            .entry(epoch)
            .or_default()
            .entry(r.graph_id)
            .or_default()
            .push(r.value);
    }
    let mut out = Vec::with_capacity(per_epoch.len());
    for (epoch, graphs) in per_epoch {
        let means: Vec<f64> = graphs
            .values()
            .map(|vs| vs.iter().sum::<f64>() / vs.len() as f64)
            .collect();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        out.push(EpochStats {
            epoch,
            mean,
            variance: unbiased_variance(&means, mean),
        });
    }
    Ok(out)
}

/// enc.mean / base.mean per graph; ratios above 1 mean the encoding
/// helped. 0/0 counts as 1, improvement from zero as +inf.
pub fn encoding_effect(
    base: &HeterogeneityProfile,
    enc: &HeterogeneityProfile,
) -> Result<Vec<(u64, f64)>> {
    if base.metric != Metric::Accuracy || enc.metric != Metric::Accuracy {
        return Err(Error::InvalidArgument(
            "encoding effect is defined for accuracy profiles".into(),
        ));
    }
    let b = base.mean_by_id();
    let e = enc.mean_by_id();
    if b.keys().ne(e.keys()) {
        return Err(Error::InvalidDataset(
            "profiles cover different graph sets".into(),
        ));
    }
    Ok(b
        .iter()
        .map(|(&id, &bm)| {
            let em = e[&id];
            let ratio = if bm == 0.0 {
                if em == 0.0 { 1.0 } else { f64::INFINITY }
            } else {
                em / bm
            };
            (id, ratio)
        })
        .collect())
}
