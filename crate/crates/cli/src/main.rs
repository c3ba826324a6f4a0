//! hetgraph: every toolkit operation behind one deterministic binary.
//!
//! Output protocol: tables go to `--out` (or stdout) as CSV whose first
//! line is a `#` provenance comment recording the tool version and the
//! effective flag set; `--json` switches stdout to a JSON rendering of
//! the same result. Reruns with identical flags produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hetgraph_core::analysis::{
    build_profile, encoding_effect, lasso_cv, lasso_fit, optimal_depth_distribution, pearson,
    training_dynamics, HeterogeneityProfile, LassoFit, Metric, ProfileRow,
};
use hetgraph_core::curvature::{borf_rewire, lcp_encoding, DEFAULT_ALPHA};
use hetgraph_core::gnnlite::random_bound_suite;
use hetgraph_core::graphcore::{topo_features, TopoFeatures};
use hetgraph_core::graphio::{
    parse_prediction_log, parse_tu_dataset, read_table, sig6, write_table_with_preamble,
    write_tu_dataset,
};
use hetgraph_core::rewiring::{
    default_edge_budget, depth_heuristic, fosr_rewire, select_threshold, selective_fosr,
    RewiringReport, ThresholdPolicy,
};
use hetgraph_core::spectral::{
    consensus_simulate, fiedler, lape_encoding, ldp_encoding, rwpe_encoding, ConsensusMethod,
    LaplacianKind,
};
use hetgraph_core::tmd::{
    class_distance_ratio, pascal_weights, tmd_matrix, tmd_matrix_checkpointed, WeightSchedule,
};
use hetgraph_core::{Dataset, Graph};

#[derive(Parser)]
#[command(
    name = "hetgraph",
    version,
    about = "Graph-level performance heterogeneity toolkit",
    args_override_self = true
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Render results as JSON on stdout instead of CSV/plain text.
    #[arg(long, global = true)]
    json: bool,

    /// key=value defaults for the subcommand; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for commands that draw random instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Topological feature table, one row per graph.
    Features(FeaturesArgs),
    /// Second-smallest Laplacian eigenvalue of every graph.
    Fiedler(FiedlerArgs),
    /// Simulate averaging dynamics on one graph and fit the decay rate.
    Consensus(ConsensusArgs),
    /// Per-node positional encodings.
    Encode(EncodeArgs),
    /// Edge edits that raise the spectral gap or flatten curvature.
    Rewire(RewireArgs),
    /// Suggest a message-passing depth from the dataset's spectral gaps.
    Depth(DepthArgs),
    /// Pairwise tree mover's distance matrix.
    Tmd(TmdArgs),
    /// Class-distance ratio of every graph from a distance matrix.
    Cdr(CdrArgs),
    /// Check the distance-based output stability bound on random pairs.
    VerifyBound(VerifyBoundArgs),
    /// Per-graph evaluation statistics from a prediction log.
    Profile(ProfileArgs),
    /// Sparse linear model linking graph features to performance.
    Lasso(LassoArgs),
    /// Correlation between two per-graph quantities.
    Correlate(CorrelateArgs),
    /// Histogram of the best depth per graph across several logs.
    DepthDist(DepthDistArgs),
    /// Per-epoch mean and cross-graph variance of performance.
    Dynamics(DynamicsArgs),
    /// Per-graph performance ratio of an encoded run over a base run.
    EncodingEffect(EncodingEffectArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory holding the TU-format files.
    #[arg(long)]
    dataset: PathBuf,
    /// File prefix inside the directory (default: the directory name).
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LapFlag {
    Combinatorial,
    Normalized,
}

impl From<LapFlag> for LaplacianKind {
    fn from(f: LapFlag) -> Self {
        match f {
            LapFlag::Combinatorial => LaplacianKind::Combinatorial,
            LapFlag::Normalized => LaplacianKind::Normalized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricFlag {
    Acc,
    Mae,
}

impl From<MetricFlag> for Metric {
    fn from(f: MetricFlag) -> Self {
        match f {
            MetricFlag::Acc => Metric::Accuracy,
            MetricFlag::Mae => Metric::Mae,
        }
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiedlerArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_enum, default_value_t = LapFlag::Combinatorial)]
    laplacian: LapFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Graph to simulate on (default: the first graph).
    #[arg(long)]
    graph_id: Option<u64>,
    /// Initial state, one value per line.
    #[arg(long)]
    x0: PathBuf,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt: f64,
    /// Integrate with explicit Euler steps instead of the exact solution.
    #[arg(long)]
    euler: bool,
    #[arg(long, value_enum, default_value_t = LapFlag::Combinatorial)]
    laplacian: LapFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodeKind {
    Lape,
    Rwpe,
    Ldp,
    Lcp,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_enum)]
    kind: EncodeKind,
    /// Encoding width for the spectral and random-walk kinds.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value_t = LapFlag::Combinatorial)]
    laplacian: LapFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RewireArgs {
    #[command(subcommand)]
    method: RewireMethod,
}

#[derive(Subcommand)]
enum RewireMethod {
    /// Curvature-balancing edits around the most extreme edges.
    Borf(BorfArgs),
    /// Gap-raising edge additions on every graph.
    Fosr(FosrArgs),
    /// Gap-raising additions only below a spectral threshold.
    Selective(SelectiveArgs),
}

#[derive(Args)]
struct BorfArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    batches: usize,
    /// Additions per batch.
    #[arg(long)]
    h_add: usize,
    /// Removals per batch.
    #[arg(long)]
    h_del: usize,
    /// Self-weight of the per-node walk measure.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Directory for the rewired TU files and the edit report.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FosrArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Edges to add per graph.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = LapFlag::Combinatorial)]
    laplacian: LapFlag,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelectiveArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Gap quantile below which a graph is rewired.
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Edges to add per qualifying graph (default: the per-dataset table).
    #[arg(long)]
    budget: Option<usize>,
    /// Stop adding edges once the graph's gap reaches the threshold.
    #[arg(long)]
    stop_at_threshold: bool,
    #[arg(long, value_enum, default_value_t = LapFlag::Combinatorial)]
    laplacian: LapFlag,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DepthArgs {
    /// Directory holding the TU-format files.
    #[arg(long)]
    from_dataset: PathBuf,
    #[arg(long)]
    name: Option<String>,
    /// Gap quantile to align the depth to.
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    #[arg(long, value_enum, default_value_t = LapFlag::Combinatorial)]
    laplacian: LapFlag,
}

#[derive(Args)]
struct TmdArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Computation-tree depth.
    #[arg(long)]
    depth: usize,
    /// Use the depth-indexed weight family scaled by this factor.
    #[arg(long, conflicts_with = "w_const")]
    epsilon: Option<f64>,
    /// Use a constant level weight (default: 1).
    #[arg(long)]
    w_const: Option<f64>,
    /// Resumable row-by-row progress file.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CdrArgs {
    /// Distance matrix produced by the tmd subcommand.
    #[arg(long)]
    dist: PathBuf,
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyBoundArgs {
    #[arg(long, default_value_t = 100)]
    n_pairs: usize,
    #[arg(long, default_value_t = 8)]
    max_nodes: usize,
    /// Maximum message-passing depth of the sampled models.
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// JSON-lines prediction log.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LassoArgs {
    /// Per-graph covariate table (first column: graph id).
    #[arg(long)]
    features: PathBuf,
    /// Profile table supplying the target mean per graph.
    #[arg(long)]
    target: PathBuf,
    /// Fixed penalty; omitted, it is chosen by cross-validation.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// Column of --x to use (default: cdr, mean, or the second column).
    #[arg(long)]
    x_col: Option<String>,
    /// Column of --y to use (default: cdr, mean, or the second column).
    #[arg(long)]
    y_col: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DepthDistArgs {
    /// One prediction log per depth.
    #[arg(long, num_args = 1.., required = true)]
    logs: Vec<PathBuf>,
    /// Depth of each log (default: first digit run of each file name).
    #[arg(long, num_args = 1..)]
    depths: Vec<usize>,
    #[arg(long, value_enum)]
    metric: MetricFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DynamicsArgs {
    /// JSON-lines prediction log with per-epoch records.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricFlag::Acc)]
    metric: MetricFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodingEffectArgs {
    /// Profile table of the un-encoded runs.
    #[arg(long)]
    base: PathBuf,
    /// Profile table of the encoded runs.
    #[arg(long)]
    enc: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Shared run state: provenance string and output mode.
struct Ctx {
    provenance: String,
    json: bool,
    seed: u64,
}

/// Writes one line to stdout; a closed pipe (head, less) ends the
/// program quietly instead of panicking.
fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let result = out
        .write_all(line.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush());
    if let Err(e) = result {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: failed writing to stdout: {e}");
        std::process::exit(1);
    }
}

macro_rules! say {
    ($($t:tt)*) => { emit(&format!($($t)*)) };
}

fn main() -> ExitCode {
    let args = match effective_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code().clamp(0, 2) as u8;
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        // A second initialization (as in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let ctx = Ctx {
        provenance: format!("hetgraph {} {}", env!("CARGO_PKG_VERSION"), args[1..].join(" ")),
        json: cli.json,
        seed: cli.seed,
    };
    match run(cli.command, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// argv with `--config` key=value pairs spliced in directly after the
/// subcommand, so later (explicit) flags override them.
fn effective_args() -> Result<Vec<String>> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            config = args.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut extra = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{path}:{}: expected key=value", i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match value {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => {
                extra.push(format!("--{key}"));
                extra.push(value.to_string());
            }
        }
    }
    const COMMANDS: [&str; 15] = [
        "features", "fiedler", "consensus", "encode", "rewire", "depth", "tmd", "cdr",
        "verify-bound", "profile", "lasso", "correlate", "depth-dist", "dynamics",
        "encoding-effect",
    ];
    let mut at = None;
    for (i, a) in args.iter().enumerate().skip(1) {
        if COMMANDS.contains(&a.as_str()) {
            let mut pos = i + 1;
            if a == "rewire" {
                if let Some(next) = args.get(i + 1) {
                    if ["borf", "fosr", "selective"].contains(&next.as_str()) {
                        pos = i + 2;
                    }
                }
            }
            at = Some(pos);
            break;
        }
    }
    let Some(at) = at else {
        return Ok(args);
    };
    let mut spliced = args[..at].to_vec();
    spliced.extend(extra);
    spliced.extend(args[at..].iter().cloned());
    Ok(spliced)
}

fn run(command: Command, ctx: &Ctx) -> Result<()> {
    match command {
        Command::Features(a) => cmd_features(a, ctx),
        Command::Fiedler(a) => cmd_fiedler(a, ctx),
        Command::Consensus(a) => cmd_consensus(a, ctx),
        Command::Encode(a) => cmd_encode(a, ctx),
        Command::Rewire(a) => cmd_rewire(a, ctx),
        Command::Depth(a) => cmd_depth(a, ctx),
        Command::Tmd(a) => cmd_tmd(a, ctx),
        Command::Cdr(a) => cmd_cdr(a, ctx),
        Command::VerifyBound(a) => cmd_verify_bound(a, ctx),
        Command::Profile(a) => cmd_profile(a, ctx),
        Command::Lasso(a) => cmd_lasso(a, ctx),
        Command::Correlate(a) => cmd_correlate(a, ctx),
        Command::DepthDist(a) => cmd_depth_dist(a, ctx),
        Command::Dynamics(a) => cmd_dynamics(a, ctx),
        Command::EncodingEffect(a) => cmd_encoding_effect(a, ctx),
    }
}

// ---------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------

fn load_dataset(args: &DatasetArgs) -> Result<Dataset> {
    let name = match &args.name {
        Some(n) => n.clone(),
        None => args
            .dataset
            .file_name()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| anyhow!("cannot infer a dataset name from {:?}; pass --name", args.dataset))?,
    };
    let (d, report) = parse_tu_dataset(&args.dataset, &name)
        .with_context(|| format!("loading {name} from {}", args.dataset.display()))?;
    if report.self_loops_dropped > 0 {
        eprintln!("warning: dropped {} self-loops in {name}", report.self_loops_dropped);
    }
    if report.label_mapping.iter().any(|&(orig, dense)| orig != dense as i64) {
        let pairs: Vec<String> = report
            .label_mapping
            .iter()
            .map(|(o, d)| format!("{o}->{d}"))
            .collect();
        eprintln!("note: remapped class labels {}", pairs.join(", "));
    }
    Ok(d)
}

fn json_cell(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v.is_nan() {
        serde_json::json!("nan")
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

fn table_json(header: &[&str], rows: &[Vec<f64>]) -> serde_json::Value {
    let objects: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            let map: serde_json::Map<String, serde_json::Value> = header
                .iter()
                .zip(row)
                .map(|(h, &v)| (h.to_string(), json_cell(v)))
                .collect();
            serde_json::Value::Object(map)
        })
        .collect();
    serde_json::Value::Array(objects)
}

/// Emits a result table: to `--out` as commented CSV, to stdout as CSV
/// or JSON otherwise. Extra preamble lines ride along as comments.
fn deliver_table(
    ctx: &Ctx,
    header: &[&str],
    rows: &[Vec<f64>],
    extra: &[String],
    out: Option<&Path>,
) -> Result<()> {
    let mut preamble = vec![ctx.provenance.clone()];
    preamble.extend_from_slice(extra);
    if let Some(path) = out {
        write_table_with_preamble(rows, header, &preamble, path)
            .with_context(|| format!("writing {}", path.display()))?;
        if ctx.json {
            say!("{}", table_json(header, rows));
        } else {
            say!("wrote {} rows to {}", rows.len(), path.display());
        }
        return Ok(());
    }
    if ctx.json {
        say!("{}", table_json(header, rows));
    } else {
        let mut text = String::new();
        for line in &preamble {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str(&header.join(","));
        for row in rows {
            text.push('\n');
            let cells: Vec<String> = row.iter().map(|&v| sig6(v)).collect();
            text.push_str(&cells.join(","));
        }
        emit(&text);
    }
    Ok(())
}

/// Profile table written by the profile subcommand, read back in.
fn profile_from_csv(path: &Path) -> Result<HeterogeneityProfile> {
    let (header, rows) = read_table(path)?;
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: no {name} column", path.display()))
    };
    let (gi, ci, mi, vi) = (col("graph_id")?, col("count")?, col("mean")?, col("variance")?);
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        if row[mi] < 0.0 || row[mi] > 1.0 {
            bail!(
                "{}: mean {} outside [0,1]; encoding comparisons expect accuracy profiles",
                path.display(),
                row[mi]
            );
        }
        out.push(ProfileRow {
            graph_id: row[gi] as u64,
            count: row[ci] as usize,
            mean: row[mi],
            variance: row[vi],
        });
    }
    Ok(HeterogeneityProfile { metric: Metric::Accuracy, rows: out, low_count: Vec::new() })
}

/// (id, value) pairs from a per-graph table: id from the first column,
/// the value column picked by name or by convention.
fn keyed_column(path: &Path, wanted: Option<&str>) -> Result<Vec<(u64, f64)>> {
    let (header, rows) = read_table(path)?;
    if header.len() < 2 {
        bail!("{}: need an id column and a value column", path.display());
    }
    let idx = match wanted {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: no {name} column", path.display()))?,
        None => ["cdr", "mean"]
            .iter()
            .find_map(|name| header.iter().position(|h| h == name))
            .unwrap_or(1),
    };
    Ok(rows.iter().map(|r| (r[0] as u64, r[idx])).collect())
}

fn write_report_log(path: &Path, provenance: &str, reports: &[RewiringReport]) -> Result<()> {
    let mut text = format!("# {provenance}\n");
    for r in reports {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Rewired graphs re-emitted as a TU dataset plus a JSON-lines edit
/// report, with a one-line summary on stdout.
fn deliver_rewiring(
    ctx: &Ctx,
    d: &Dataset,
    graphs: Vec<Graph>,
    reports: Vec<RewiringReport>,
    out_dir: &Path,
) -> Result<()> {
    let rewired = Dataset::new(d.name.clone(), graphs, d.task.clone())?;
    write_tu_dataset(&rewired, out_dir)
        .with_context(|| format!("writing TU files to {}", out_dir.display()))?;
    let report_path = out_dir.join(format!("{}_rewiring.jsonl", d.name));
    write_report_log(&report_path, &ctx.provenance, &reports)?;
    let touched = reports.iter().filter(|r| r.rewired).count();
    let mean = |f: fn(&RewiringReport) -> f64| -> f64 {
        reports.iter().map(f).sum::<f64>() / reports.len() as f64
    };
    let before = mean(|r| r.lambda2_before);
    let after = mean(|r| r.lambda2_after);
    if ctx.json {
        say!(
            "{}",
            serde_json::json!({
                "graphs": reports.len(),
                "rewired": touched,
                "mean_lambda2_before": before,
                "mean_lambda2_after": after,
                "out_dir": out_dir.display().to_string(),
                "report": report_path.display().to_string(),
            })
        );
    } else {
        say!(
            "rewired {touched} of {} graphs, mean lambda2 {} -> {}",
            reports.len(),
            sig6(before),
            sig6(after)
        );
        say!("wrote TU files and {} to {}", report_path.display(), out_dir.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------

fn cmd_features(args: FeaturesArgs, ctx: &Ctx) -> Result<()> {
    use rayon::prelude::*;
    let d = load_dataset(&args.data)?;
    let features: Vec<TopoFeatures> = d
        .graphs
        .par_iter()
        .map(|g| {
            topo_features(g).map_err(|e| anyhow!("graph {}: {e}", g.id()))
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["graph_id"];
    header.extend(TopoFeatures::COLUMNS);
    let rows: Vec<Vec<f64>> = d
        .graphs
        .iter()
        .zip(&features)
        .map(|(g, f)| {
            let mut row = vec![g.id() as f64];
            row.extend(f.row());
            row
        })
        .collect();
    deliver_table(ctx, &header, &rows, &[], args.out.as_deref())
}

fn cmd_fiedler(args: FiedlerArgs, ctx: &Ctx) -> Result<()> {
    use rayon::prelude::*;
    let d = load_dataset(&args.data)?;
    let kind: LaplacianKind = args.laplacian.into();
    let rows: Vec<Vec<f64>> = d
        .graphs
        .par_iter()
        .map(|g| {
            fiedler(g, kind)
                .map(|f| vec![g.id() as f64, f.lambda2])
                .map_err(|e| anyhow!("graph {}: {e}", g.id()))
        })
        .collect::<Result<_>>()?;
    deliver_table(ctx, &["graph_id", "lambda2"], &rows, &[], args.out.as_deref())
}

fn cmd_consensus(args: ConsensusArgs, ctx: &Ctx) -> Result<()> {
    let d = load_dataset(&args.data)?;
    let g = match args.graph_id {
        Some(id) => d
            .graph_by_id(id)
            .ok_or_else(|| anyhow!("no graph with id {id} in {}", d.name))?,
        None => d.graphs.first().ok_or_else(|| anyhow!("{} is empty", d.name))?,
    };
    let text = fs::read_to_string(&args.x0)
        .with_context(|| format!("reading initial state {}", args.x0.display()))?;
    let mut x0 = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        x0.push(
            t.parse::<f64>()
                .map_err(|_| anyhow!("{}:{}: expected a real value", args.x0.display(), i + 1))?,
        );
    }
    let method = if args.euler { ConsensusMethod::Euler } else { ConsensusMethod::Spectral };
    let kind: LaplacianKind = args.laplacian.into();
    let trajectory = consensus_simulate(g, &x0, args.t_end, args.dt, method, kind)?;
    let lambda2 = fiedler(g, kind)?.lambda2;

    let n = g.n();
    let node_headers: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut header = vec!["t"];
    header.extend(node_headers.iter().map(String::as_str));
    let rows: Vec<Vec<f64>> = trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, state)| {
            let mut row = vec![t];
            row.extend_from_slice(state);
            row
        })
        .collect();
    let decay = trajectory.decay_rate.map_or("none".to_string(), sig6);
    let extra = vec![
        format!("decay_rate {decay}"),
        format!("lambda2 {}", sig6(lambda2)),
    ];
    if ctx.json {
        say!(
            "{}",
            serde_json::json!({
                "graph_id": g.id(),
                "decay_rate": trajectory.decay_rate,
                "lambda2": lambda2,
                "steps": rows.len(),
            })
        );
        if let Some(path) = args.out.as_deref() {
            let mut preamble = vec![ctx.provenance.clone()];
            preamble.extend(extra);
            write_table_with_preamble(&rows, &header, &preamble, path)?;
        }
        return Ok(());
    }
    deliver_table(ctx, &header, &rows, &extra, args.out.as_deref())
}

fn cmd_encode(args: EncodeArgs, ctx: &Ctx) -> Result<()> {
    let d = load_dataset(&args.data)?;
    let kind: LaplacianKind = args.laplacian.into();
    let mut rows = Vec::new();
    let mut width = None;
    for g in &d.graphs {
        let enc = match args.kind {
            EncodeKind::Lape => lape_encoding(g, args.k, kind),
            EncodeKind::Rwpe => rwpe_encoding(g, args.k),
            EncodeKind::Ldp => Ok(ldp_encoding(g)),
            EncodeKind::Lcp => lcp_encoding(g),
        }
        .map_err(|e| anyhow!("graph {}: {e}", g.id()))?;
        let w = enc.first().map_or(0, Vec::len);
        if *width.get_or_insert(w) != w {
            bail!("graph {} produced {} encoding columns, expected {:?}", g.id(), w, width);
        }
        for (node, enc_row) in enc.iter().enumerate() {
            let mut row = vec![g.id() as f64, node as f64];
            row.extend_from_slice(enc_row);
            rows.push(row);
        }
    }
    let labels: Vec<String> = (0..width.unwrap_or(0)).map(|i| format!("e{}", i + 1)).collect();
    let mut header = vec!["graph_id", "node"];
    header.extend(labels.iter().map(String::as_str));
    deliver_table(ctx, &header, &rows, &[], args.out.as_deref())
}

fn cmd_rewire(args: RewireArgs, ctx: &Ctx) -> Result<()> {
    use rayon::prelude::*;
    match args.method {
        RewireMethod::Borf(a) => {
            let d = load_dataset(&a.data)?;
            let results: Vec<(Graph, RewiringReport)> = d
                .graphs
                .par_iter()
                .map(|g| {
                    borf_rewire(g, a.batches, a.h_add, a.h_del, a.alpha)
                        .map_err(|e| anyhow!("graph {}: {e}", g.id()))
                })
                .collect::<Result<_>>()?;
            let (graphs, reports) = results.into_iter().unzip();
            deliver_rewiring(ctx, &d, graphs, reports, &a.out_dir)
        }
        RewireMethod::Fosr(a) => {
            let d = load_dataset(&a.data)?;
            let kind: LaplacianKind = a.laplacian.into();
            let results: Vec<(Graph, RewiringReport)> = d
                .graphs
                .par_iter()
                .map(|g| {
                    fosr_rewire(g, a.k, kind).map_err(|e| anyhow!("graph {}: {e}", g.id()))
                })
                .collect::<Result<_>>()?;
            let (graphs, reports) = results.into_iter().unzip();
            deliver_rewiring(ctx, &d, graphs, reports, &a.out_dir)
        }
        RewireMethod::Selective(a) => {
            let d = load_dataset(&a.data)?;
            let budget = match a.budget.or_else(|| default_edge_budget(&d.name)) {
                Some(b) => b,
                None => bail!("no default edge budget for {}; pass --budget", d.name),
            };
            let policy = ThresholdPolicy {
                quantile: a.quantile,
                kind: a.laplacian.into(),
                budget,
                stop_at_threshold: a.stop_at_threshold,
            };
            let (rewired, reports) = selective_fosr(&d, &policy)?;
            deliver_rewiring(ctx, &d, rewired.graphs, reports, &a.out_dir)
        }
    }
}

fn cmd_depth(args: DepthArgs, ctx: &Ctx) -> Result<()> {
    let d = load_dataset(&DatasetArgs { dataset: args.from_dataset, name: args.name })?;
    let policy = ThresholdPolicy {
        quantile: args.quantile,
        kind: args.laplacian.into(),
        budget: 0,
        stop_at_threshold: false,
    };
    let star = select_threshold(&d, &policy)?;
    let depth = depth_heuristic(star)?;
    if ctx.json {
        say!(
            "{}",
            serde_json::json!({
                "lambda2_star": star,
                "inverse": 1.0 / star,
                "depth": depth,
            })
        );
    } else {
        say!("lambda2_star {}", sig6(star));
        say!("inverse {}", sig6(1.0 / star));
        say!("depth {depth}");
    }
    Ok(())
}

fn tmd_schedule(depth: usize, epsilon: Option<f64>, w_const: Option<f64>) -> Result<WeightSchedule> {
    match (epsilon, w_const) {
        (Some(e), None) => Ok(pascal_weights(depth, e)?),
        (None, c) => Ok(WeightSchedule::constant(c.unwrap_or(1.0))?),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    }
}

fn cmd_tmd(args: TmdArgs, ctx: &Ctx) -> Result<()> {
    let d = load_dataset(&args.data)?;
    let w = tmd_schedule(args.depth, args.epsilon, args.w_const)?;
    let matrix = match &args.checkpoint {
        Some(path) => tmd_matrix_checkpointed(&d, args.depth, &w, path)?,
        None => tmd_matrix(&d, args.depth, &w)?,
    };
    let id_headers: Vec<String> = d.graphs.iter().map(|g| format!("g{}", g.id())).collect();
    let mut header = vec!["graph_id"];
    header.extend(id_headers.iter().map(String::as_str));
    let rows: Vec<Vec<f64>> = d
        .graphs
        .iter()
        .zip(&matrix)
        .map(|(g, row)| {
            let mut r = vec![g.id() as f64];
            r.extend_from_slice(row);
            r
        })
        .collect();
    let extra = vec![format!("levels {} weights {}", args.depth, w.describe())];
    deliver_table(ctx, &header, &rows, &extra, args.out.as_deref())
}

fn cmd_cdr(args: CdrArgs, ctx: &Ctx) -> Result<()> {
    let d = load_dataset(&args.data)?;
    let (_, raw) = read_table(&args.dist)?;
    if raw.len() != d.len() {
        bail!(
            "{}: {} distance rows for {} graphs",
            args.dist.display(),
            raw.len(),
            d.len()
        );
    }
    let mut dist = Vec::with_capacity(raw.len());
    for (g, row) in d.graphs.iter().zip(&raw) {
        if row.len() != d.len() + 1 {
            bail!("{}: distance matrix is not square", args.dist.display());
        }
        if row[0] as u64 != g.id() {
            bail!(
                "{}: row for graph {} does not match dataset order (id {})",
                args.dist.display(),
                row[0],
                g.id()
            );
        }
        dist.push(row[1..].to_vec());
    }
    let mut rows = Vec::with_capacity(d.len());
    for (i, g) in d.graphs.iter().enumerate() {
        let (ratio, degenerate) = class_distance_ratio(&d, i, &dist)
            .map_err(|e| anyhow!("graph {}: {e}", g.id()))?;
        rows.push(vec![g.id() as f64, ratio, if degenerate { 1.0 } else { 0.0 }]);
    }
    deliver_table(ctx, &["graph_id", "cdr", "degenerate"], &rows, &[], args.out.as_deref())
}

fn cmd_verify_bound(args: VerifyBoundArgs, ctx: &Ctx) -> Result<()> {
    let checks = random_bound_suite(args.n_pairs, args.max_nodes, args.layers, args.epsilon, ctx.seed)?;
    let holding = checks.iter().filter(|c| c.holds).count();
    let rows: Vec<Vec<f64>> = checks
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i as f64, c.lhs, c.rhs, if c.holds { 1.0 } else { 0.0 }])
        .collect();
    let extra = vec![format!("holds {holding}/{}", checks.len())];
    if ctx.json {
        say!(
            "{}",
            serde_json::json!({
                "checks": checks,
                "holds": holding,
                "total": checks.len(),
                "all_hold": holding == checks.len(),
            })
        );
        if let Some(path) = args.out.as_deref() {
            let mut preamble = vec![ctx.provenance.clone()];
            preamble.extend(extra);
            write_table_with_preamble(&rows, &["pair", "lhs", "rhs", "holds"], &preamble, path)?;
        }
        return Ok(());
    }
    deliver_table(ctx, &["pair", "lhs", "rhs", "holds"], &rows, &extra, args.out.as_deref())
}

fn cmd_profile(args: ProfileArgs, ctx: &Ctx) -> Result<()> {
    let records = parse_prediction_log(&args.log)?;
    let profile = build_profile(&records, args.metric.into())?;
    if !profile.low_count.is_empty() {
        eprintln!(
            "warning: {} graphs were evaluated fewer than 100 times",
            profile.low_count.len()
        );
    }
    let rows: Vec<Vec<f64>> = profile
        .rows
        .iter()
        .map(|r| vec![r.graph_id as f64, r.count as f64, r.mean, r.variance])
        .collect();
    deliver_table(
        ctx,
        &["graph_id", "count", "mean", "variance"],
        &rows,
        &[],
        args.out.as_deref(),
    )
}

fn cmd_lasso(args: LassoArgs, ctx: &Ctx) -> Result<()> {
    let (feat_header, feat_rows) = read_table(&args.features)?;
    if feat_header.len() < 2 {
        bail!("{}: need an id column plus covariates", args.features.display());
    }
    let targets: BTreeMap<u64, f64> = keyed_column(&args.target, Some("mean"))
        .or_else(|_| keyed_column(&args.target, None))?
        .into_iter()
        .collect();
    let mut joined: Vec<(u64, &Vec<f64>)> = Vec::new();
    for row in &feat_rows {
        let id = row[0] as u64;
        if !targets.contains_key(&id) {
            bail!("graph {id} has features but no target in {}", args.target.display());
        }
        joined.push((id, row));
    }
    if joined.len() != targets.len() {
        bail!(
            "{} feature rows against {} targets; the graph sets must match",
            joined.len(),
            targets.len()
        );
    }
    joined.sort_by_key(|(id, _)| *id);
    let x: Vec<Vec<f64>> = joined.iter().map(|(_, row)| row[1..].to_vec()).collect();
    let y: Vec<f64> = joined.iter().map(|(id, _)| targets[id]).collect();

    let fit: LassoFit = match args.lambda {
        Some(lambda) => lasso_fit(&x, &y, lambda)?,
        None => lasso_cv(&x, &y, args.folds)?.fit,
    };
    if !fit.dropped.is_empty() {
        let names: Vec<&str> = fit.dropped.iter().map(|&j| feat_header[j + 1].as_str()).collect();
        eprintln!("note: dropped constant columns {}", names.join(", "));
    }

    let mut header: Vec<&str> = feat_header[1..].iter().map(String::as_str).collect();
    header.extend(["intercept", "lambda", "r_squared"]);
    let mut row = fit.coefficients.clone();
    row.extend([fit.intercept, fit.lambda, fit.r_squared]);
    if ctx.json {
        say!(
            "{}",
            serde_json::json!({
                "features": feat_header[1..],
                "fit": fit,
                "rows": x.len(),
            })
        );
        if let Some(path) = args.out.as_deref() {
            write_table_with_preamble(&[row], &header, &[ctx.provenance.clone()], path)?;
        }
        return Ok(());
    }
    deliver_table(ctx, &header, &[row], &[], args.out.as_deref())
}

fn cmd_correlate(args: CorrelateArgs, ctx: &Ctx) -> Result<()> {
    let xs = keyed_column(&args.x, args.x_col.as_deref())?;
    let ys: BTreeMap<u64, f64> = keyed_column(&args.y, args.y_col.as_deref())?
        .into_iter()
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut skipped = 0;
    for (id, xv) in xs {
        let Some(&yv) = ys.get(&id) else {
            bail!("graph {id} is missing from {}", args.y.display());
        };
        if xv.is_finite() && yv.is_finite() {
            x.push(xv);
            y.push(yv);
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        eprintln!("note: skipped {skipped} graphs with non-finite values");
    }
    let (r, p) = pearson(&x, &y)?;
    if ctx.json {
        say!("{}", serde_json::json!({ "r": r, "p": p, "n": x.len() }));
        if let Some(path) = args.out.as_deref() {
            write_table_with_preamble(
                &[vec![r, p, x.len() as f64]],
                &["r", "p", "n"],
                &[ctx.provenance.clone()],
                path,
            )?;
        }
        return Ok(());
    }
    deliver_table(ctx, &["r", "p", "n"], &[vec![r, p, x.len() as f64]], &[], args.out.as_deref())
}

fn depth_of_log(path: &Path) -> Result<usize> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("{}: unreadable file name", path.display()))?;
    let digits: String = stem
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits
        .parse()
        .map_err(|_| anyhow!("{}: no depth in the file name; pass --depths", path.display()))
}

fn cmd_depth_dist(args: DepthDistArgs, ctx: &Ctx) -> Result<()> {
    let depths: Vec<usize> = if args.depths.is_empty() {
        args.logs.iter().map(|p| depth_of_log(p)).collect::<Result<_>>()?
    } else if args.depths.len() == args.logs.len() {
        args.depths.clone()
    } else {
        bail!("{} depths for {} logs", args.depths.len(), args.logs.len());
    };
    let metric: Metric = args.metric.into();
    let mut profiles = BTreeMap::new();
    for (&depth, path) in depths.iter().zip(&args.logs) {
        let records = parse_prediction_log(path)?;
        let profile = build_profile(&records, metric)
            .with_context(|| format!("profiling {}", path.display()))?;
        if profiles.insert(depth, profile).is_some() {
            bail!("depth {depth} appears twice");
        }
    }
    let histogram = optimal_depth_distribution(&profiles)?;
    let rows: Vec<Vec<f64>> = histogram
        .iter()
        .map(|(&depth, &count)| vec![depth as f64, count as f64])
        .collect();
    deliver_table(ctx, &["depth", "graphs"], &rows, &[], args.out.as_deref())
}

fn cmd_dynamics(args: DynamicsArgs, ctx: &Ctx) -> Result<()> {
    let records = parse_prediction_log(&args.log)?;
    if Metric::from(args.metric) == Metric::Accuracy {
        if let Some(bad) = records.iter().find(|r| r.value != 0.0 && r.value != 1.0) {
            bail!(
                "graph {}: accuracy records are 0/1 correctness, found {}",
                bad.graph_id,
                bad.value
            );
        }
    }
    let stats = training_dynamics(&records)?;
    let rows: Vec<Vec<f64>> = stats
        .iter()
        .map(|s| vec![s.epoch as f64, s.mean, s.variance])
        .collect();
    deliver_table(ctx, &["epoch", "mean", "variance"], &rows, &[], args.out.as_deref())
}

fn cmd_encoding_effect(args: EncodingEffectArgs, ctx: &Ctx) -> Result<()> {
    let base = profile_from_csv(&args.base)?;
    let enc = profile_from_csv(&args.enc)?;
    let ratios = encoding_effect(&base, &enc)?;
    let rows: Vec<Vec<f64>> = ratios
        .iter()
        .map(|&(id, ratio)| vec![id as f64, ratio])
        .collect();
    deliver_table(ctx, &["graph_id", "ratio"], &rows, &[], args.out.as_deref())
}
