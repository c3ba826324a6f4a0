//! Tree mover's distance: computation trees, blank-tree padding, the
//! weighted recursive tree distance solved through exact assignment
//! problems, pairwise distance matrices with row checkpointing, and
//! class-distance ratios.

use std::collections::HashMap;
use std::fs;
use std::hash::{Hash, Hasher};
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, Label, Task};
use crate::ot;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv_step(mut h: u64, word: u64) -> u64 {
    for b in word.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Feature value as hashed: quantized at 1e-12 so values that differ
/// only by float dust share a bucket. Equality checks stay exact.
fn quantized_bits(x: f64) -> u64 {
    let y = (x / 1e-12).round() * 1e-12;
    let y = if y == 0.0 { 0.0 } else { y };
    y.to_bits()
}

/// One node of an unrolled message-passing neighborhood. Children are
/// kept in a canonical order (structural hash, full comparison on
/// ties), so structurally equal trees are representation-equal.
#[derive(Debug)]
pub struct ComputationTree {
    features: Vec<f64>,
    children: Vec<Arc<ComputationTree>>,
    depth: usize,
    hash: u64,
}

impl ComputationTree {
    pub fn new(features: Vec<f64>, mut children: Vec<Arc<ComputationTree>>) -> Self {
        let features: Vec<f64> =
            features.iter().map(|&x| if x == 0.0 { 0.0 } else { x }).collect();
        children.sort_by(|a, b| a.hash.cmp(&b.hash).then_with(|| structural_cmp(a, b)));
        let depth = 1 + children.iter().map(|c| c.depth).max().unwrap_or(0);
        let mut h = FNV_OFFSET;
        h = fnv_step(h, depth as u64);
        h = fnv_step(h, features.len() as u64);
        for &x in &features {
            h = fnv_step(h, quantized_bits(x));
        }
        h = fnv_step(h, children.len() as u64);
        for c in &children {
            h = fnv_step(h, c.hash);
        }
        ComputationTree { features, children, depth, hash: h }
    }

    pub fn leaf(features: Vec<f64>) -> Self {
        ComputationTree::new(features, Vec::new())
    }

    /// The padding element: a single node carrying the zero vector.
    pub fn blank(dim: usize) -> Self {
        ComputationTree::leaf(vec![0.0; dim])
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn children(&self) -> &[Arc<ComputationTree>] {
        &self.children
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

fn structural_cmp(a: &ComputationTree, b: &ComputationTree) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    a.depth
        .cmp(&b.depth)
        .then(a.features.len().cmp(&b.features.len()))
        .then_with(|| {
            for (x, y) in a.features.iter().zip(&b.features) {
                let ord = x.total_cmp(y);
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
        .then(a.children.len().cmp(&b.children.len()))
        .then_with(|| {
            for (x, y) in a.children.iter().zip(&b.children) {
                let ord = structural_cmp(x, y);
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
}

fn structural_eq(a: &Arc<ComputationTree>, b: &Arc<ComputationTree>) -> bool {
    if Arc::ptr_eq(a, b) {
        return true;
    }
    a.hash == b.hash
        && a.depth == b.depth
        && a.features == b.features
        && a.children.len() == b.children.len()
        && a.children.iter().zip(&b.children).all(|(x, y)| structural_eq(x, y))
}

/// Unrolls node `v` to a depth-`levels` tree: every tree node's children
/// are all of that node's graph neighbors, the parent included again.
pub fn computation_tree(g: &Graph, v: usize, levels: usize) -> Result<Arc<ComputationTree>> {
    if v >= g.n() {
        return Err(Error::InvalidArgument(format!(
            "node {v} out of range for graph {} with {} nodes",
            g.id(),
            g.n()
        )));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("computation trees need depth >= 1".into()));
    }
    Ok(graph_trees(g, levels).swap_remove(v))
}

/// Depth-`levels` trees for every node at once; level l reuses the
/// shared level l-1 trees, so the unrolling stays linear in n * levels.
fn graph_trees(g: &Graph, levels: usize) -> Vec<Arc<ComputationTree>> {
    let mut current: Vec<Arc<ComputationTree>> = (0..g.n())
        .map(|v| Arc::new(ComputationTree::leaf(g.features()[v].clone())))
        .collect();
    for _ in 1..levels {
        current = (0..g.n())
            .map(|v| {
                let children = g.neighbors(v).iter().map(|&u| current[u].clone()).collect();
                Arc::new(ComputationTree::new(g.features()[v].clone(), children))
            })
            .collect();
    }
    current
}

/// Pads the smaller multiset with blank trees until sizes match.
pub fn blank_tree_augment(
    mut a: Vec<Arc<ComputationTree>>,
    mut b: Vec<Arc<ComputationTree>>,
) -> (Vec<Arc<ComputationTree>>, Vec<Arc<ComputationTree>>) {
    let dim = a
        .first()
        .or_else(|| b.first())
        .map(|t| t.features.len())
        .unwrap_or(0);
    let blank = Arc::new(ComputationTree::blank(dim));
    while a.len() < b.len() {
        a.push(blank.clone());
    }
    while b.len() < a.len() {
        b.push(blank.clone());
    }
    (a, b)
}

// ---------------------------------------------------------------------
// Weight schedules
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum ScheduleKind {
    Constant(f64),
    Pascal { eps: f64, depth: usize },
    Table,
}

/// Positive per-level weights w(1), w(2), ... applied to the subtree
/// transport cost at each recursion depth. Levels beyond the stored
/// range fall back to a constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    levels: Vec<f64>,
    tail: f64,
    kind: ScheduleKind,
}

impl WeightSchedule {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weights must be positive, got {c}"
            )));
        }
        Ok(WeightSchedule { levels: Vec::new(), tail: c, kind: ScheduleKind::Constant(c) })
    }

    /// Explicit per-level weights with a constant tail above the table.
    pub fn from_table(levels: Vec<f64>, tail: f64) -> Result<Self> {
        if levels.iter().chain([&tail]).any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
        Ok(WeightSchedule { levels, tail, kind: ScheduleKind::Table })
    }

    /// w(level), 1-indexed.
    pub fn get(&self, level: usize) -> f64 {
        assert!(level >= 1, "weight levels are 1-indexed");
        self.levels.get(level - 1).copied().unwrap_or(self.tail)
    }

    /// Short human-readable form for output metadata.
    pub fn describe(&self) -> String {
        match self.kind {
            ScheduleKind::Constant(c) => format!("constant({c})"),
            ScheduleKind::Pascal { eps, depth } => format!("pascal(eps={eps}, L={depth})"),
            ScheduleKind::Table => format!("table({:?}, tail={})", self.levels, self.tail),
        }
    }
}

/// The binomial-ratio schedule: w(l) = eps * C(L+1, l-1) / C(L+1, l)
/// for l <= L, which simplifies to eps * l / (L + 2 - l); levels above
/// L weigh 1.
pub fn pascal_weights(levels: usize, eps: f64) -> Result<WeightSchedule> {
    if levels == 0 {
        return Err(Error::InvalidArgument("pascal schedule needs L >= 1".into()));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let table: Vec<f64> = (1..=levels)
        .map(|l| eps * l as f64 / (levels + 2 - l) as f64)
        .collect();
    Ok(WeightSchedule {
        levels: table,
        tail: 1.0,
        kind: ScheduleKind::Pascal { eps, depth: levels },
    })
}

// ---------------------------------------------------------------------
// Tree distance
// ---------------------------------------------------------------------

struct TreeKey(Arc<ComputationTree>);

impl PartialEq for TreeKey {
    fn eq(&self, other: &Self) -> bool {
        structural_eq(&self.0, &other.0)
    }
}

impl Eq for TreeKey {}

impl Hash for TreeKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

/// Distances are memoized on interned structural identities, so shared
/// subtrees (and the blanks they are compared against) are solved once.
#[derive(Default)]
struct DistanceCache {
    ids: HashMap<TreeKey, usize>,
    memo: HashMap<(usize, usize), f64>,
}

impl DistanceCache {
    fn id(&mut self, t: &Arc<ComputationTree>) -> usize {
        let next = self.ids.len();
        *self.ids.entry(TreeKey(t.clone())).or_insert(next)
    }

    fn distance(
        &mut self,
        a: &Arc<ComputationTree>,
        b: &Arc<ComputationTree>,
        w: &WeightSchedule,
    ) -> f64 {
        let (ia, ib) = (self.id(a), self.id(b));
        if ia == ib {
            return 0.0;
        }
        let key = (ia.min(ib), ia.max(ib));
        if let Some(&d) = self.memo.get(&key) {
            return d;
        }
        let root: f64 = a
            .features
            .iter()
            .zip(&b.features)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let total = if a.children.is_empty() && b.children.is_empty() {
            root
        } else {
            let (ca, cb) = blank_tree_augment(a.children.clone(), b.children.clone());
            let costs: Vec<Vec<f64>> = ca
                .iter()
                .map(|x| cb.iter().map(|y| self.distance(x, y, w)).collect())
                .collect();
            root + w.get(a.depth.max(b.depth)) * ot::assignment(&costs).1
        };
        self.memo.insert(key, total);
        total
    }
}

/// Weighted recursive distance: root feature distance plus w(depth)
/// times the exact transport cost between the blank-padded child
/// multisets (unit mass per tree, so an assignment problem).
pub fn tree_distance(
    a: &Arc<ComputationTree>,
    b: &Arc<ComputationTree>,
    w: &WeightSchedule,
) -> f64 {
    DistanceCache::default().distance(a, b, w)
}

fn check_dims(a: &Graph, b: &Graph) -> Result<()> {
    if a.feature_dim() != b.feature_dim() {
        return Err(Error::Dimension(format!(
            "graphs {} and {} carry features of dim {} and {}",
            a.id(),
            b.id(),
            a.feature_dim(),
            b.feature_dim()
        )));
    }
    Ok(())
}

/// Distance between two graphs: exact assignment between their
/// blank-padded multisets of depth-`levels` computation trees.
pub fn tmd(a: &Graph, b: &Graph, levels: usize, w: &WeightSchedule) -> Result<f64> {
    if levels == 0 {
        return Err(Error::InvalidArgument("tree depth must be >= 1".into()));
    }
    check_dims(a, b)?;
    let ta = graph_trees(a, levels);
    let tb = graph_trees(b, levels);
    Ok(multiset_distance(ta, tb, w))
}

fn multiset_distance(
    a: Vec<Arc<ComputationTree>>,
    b: Vec<Arc<ComputationTree>>,
    w: &WeightSchedule,
) -> f64 {
    let (a, b) = blank_tree_augment(a, b);
    let mut cache = DistanceCache::default();
    let costs: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| cache.distance(x, y, w)).collect())
        .collect();
    ot::assignment(&costs).1
}

// ---------------------------------------------------------------------
// Pairwise matrices
// ---------------------------------------------------------------------

fn dataset_trees(d: &Dataset, levels: usize) -> Result<Vec<Vec<Arc<ComputationTree>>>> {
    if let Some(first) = d.graphs.first() {
        for g in &d.graphs {
            check_dims(first, g)?;
        }
    }
    Ok(d.graphs.iter().map(|g| graph_trees(g, levels)).collect())
}

/// All pairwise distances, zero diagonal, parallel across each row's
/// columns.
pub fn tmd_matrix(d: &Dataset, levels: usize, w: &WeightSchedule) -> Result<Vec<Vec<f64>>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("tree depth must be >= 1".into()));
    }
    let trees = dataset_trees(d, levels)?;
    let n = trees.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row: Vec<(usize, f64)> = ((i + 1)..n)
            .into_par_iter()
            .map(|j| (j, multiset_distance(trees[i].clone(), trees[j].clone(), w)))
            .collect();
        for (j, v) in row {
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    Ok(matrix)
}

/// As `tmd_matrix`, but every finished row is appended to `path` and
/// complete rows found there on entry are reused, so an interrupted run
/// resumes where it stopped. A torn final line (a crash mid-write) is
/// dropped and recomputed; malformed earlier lines are an error.
pub fn tmd_matrix_checkpointed(
    d: &Dataset,
    levels: usize,
    w: &WeightSchedule,
    path: &Path,
) -> Result<Vec<Vec<f64>>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("tree depth must be >= 1".into()));
    }
    let trees = dataset_trees(d, levels)?;
    let n = trees.len();
    let mut matrix = vec![vec![0.0; n]; n];

    let mut done = 0;
    if path.exists() {
        let text = fs::read_to_string(path)?;
        let lines: Vec<&str> = text.lines().collect();
        let file = path.display().to_string();
        for (idx, line) in lines.iter().enumerate() {
            if done >= n {
                return Err(Error::parse(&file, idx + 1, "more rows than graphs"));
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) if row.len() == n => {
                    matrix[done] = row;
                    done += 1;
                }
                _ if idx + 1 == lines.len() => break,
                Ok(row) => {
                    return Err(Error::parse(
                        &file,
                        idx + 1,
                        format!("expected {n} columns, found {}", row.len()),
                    ));
                }
                Err(e) => return Err(Error::parse(&file, idx + 1, e.to_string())),
            }
        }
        // Mirror the trusted prefix so resumed rows see their symmetric
        // counterparts.
        for i in 0..done {
            for j in 0..n {
                matrix[j][i] = matrix[i][j];
            }
        }
    }

    let mut out = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if done > 0 {
        // Drop any torn tail before appending.
        let keep: String = fs::read_to_string(path)?
            .lines()
            .take(done)
            .map(|l| format!("{l}\n"))
            .collect();
        fs::write(path, &keep)?;
        out = fs::OpenOptions::new().append(true).open(path)?;
    } else if path.exists() {
        fs::write(path, "")?;
        out = fs::OpenOptions::new().append(true).open(path)?;
    }

    for i in done..n {
        let row: Vec<(usize, f64)> = ((i + 1)..n)
            .into_par_iter()
            .map(|j| (j, multiset_distance(trees[i].clone(), trees[j].clone(), w)))
            .collect();
        for (j, v) in row {
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
        let line: Vec<String> = matrix[i].iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(matrix)
}

/// Nearest same-label distance over nearest different-label distance
/// for graph `i`, given the precomputed matrix. A zero denominator
/// (an identical graph under another label) yields +inf with the flag
/// set.
pub fn class_distance_ratio(
    d: &Dataset,
    i: usize,
    dist: &[Vec<f64>],
) -> Result<(f64, bool)> {
    if !matches!(d.task, Task::Classification { .. }) {
        return Err(Error::InvalidDataset(format!(
            "{}: class-distance ratios need a classification task",
            d.name
        )));
    }
    if i >= d.len() || dist.len() != d.len() {
        return Err(Error::InvalidArgument(format!(
            "graph index {i} with a {} x {} matrix over {} graphs",
            dist.len(),
            dist.first().map_or(0, Vec::len),
            d.len()
        )));
    }
    let label_of = |k: usize| -> Result<usize> {
        match d.graphs[k].label() {
            Some(Label::Class(c)) => Ok(*c),
            _ => Err(Error::InvalidDataset(format!(
                "{}: graph {} has no class label",
                d.name,
                d.graphs[k].id()
            ))),
        }
    };
    let mine = label_of(i)?;
    let mut same = f64::INFINITY;
    let mut other = f64::INFINITY;
    let mut saw_same = false;
    let mut saw_other = false;
    for j in 0..d.len() {
        if j == i {
            continue;
        }
        if label_of(j)? == mine {
            saw_same = true;
            same = same.min(dist[i][j]);
        } else {
            saw_other = true;
            other = other.min(dist[i][j]);
        }
    }
    if !saw_same || !saw_other {
        return Err(Error::InvalidDataset(format!(
            "{}: graph {} needs at least one same-label and one different-label companion",
            d.name,
            d.graphs[i].id()
        )));
    }
    if other == 0.0 {
        return Ok((f64::INFINITY, true));
    }
    Ok((same / other, false))
}
