//! File formats: the TU dataset text layout, JSON-lines prediction
//! logs, and comma-separated result tables.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, Label, Task};

/// One model evaluation of one graph: correctness (0/1) for
/// classification runs, absolute error for regression runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub graph_id: u64,
    pub run_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
    pub value: f64,
}

/// What the TU parser had to normalize.
#[derive(Debug, Clone, Default)]
pub struct TuReport {
    pub self_loops_dropped: usize,
    /// Original label value -> dense class index; empty for regression.
    pub label_mapping: Vec<(i64, usize)>,
    pub regression: bool,
}

fn read_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Data lines with their 1-based position; blank and `#` comment lines
/// (such as provenance headers) do not count as data.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn parse_token<T: std::str::FromStr>(
    file: &str,
    line: usize,
    token: &str,
    what: &str,
) -> Result<T> {
    token
        .trim()
        .parse::<T>()
        .map_err(|_| Error::parse(file, line, format!("expected {what}, found {token:?}")))
}

/// Reads `{name}_A.txt`, `{name}_graph_indicator.txt`,
/// `{name}_graph_labels.txt` and the optional node label/attribute
/// files. Node indices are rebased per graph, both arc directions merge
/// into one undirected edge, self-loops are dropped (counted in the
/// report), and labels are remapped to a dense class range; label files
/// with fractional values switch the task to single-target regression.
/// Graphs without node information get the constant feature 1.
pub fn parse_tu_dataset(dir: &Path, name: &str) -> Result<(Dataset, TuReport)> {
    let ind_path = dir.join(format!("{name}_graph_indicator.txt"));
    let ind_file = ind_path.display().to_string();
    let ind_text = read_file(&ind_path)?;
    let mut graph_of_node = Vec::new();
    let mut graph_count = 0usize;
    for (i, line) in data_lines(&ind_text) {
        let gid: usize = parse_token(&ind_file, i, line, "a 1-based graph id")?;
        if gid == 0 {
            return Err(Error::parse(&ind_file, i, "graph ids are 1-based"));
        }
        graph_of_node.push(gid - 1);
        graph_count = graph_count.max(gid);
    }
    let n_total = graph_of_node.len();

    // Local (per-graph) index of every node, in file order.
    let mut local = vec![0usize; n_total];
    let mut sizes = vec![0usize; graph_count];
    for (node, &g) in graph_of_node.iter().enumerate() {
        local[node] = sizes[g];
        sizes[g] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidDataset(format!(
            "{name}: graph {} has zero nodes",
            g + 1
        )));
    }

    // Labels, with the integer/dense-remap vs regression decision.
    let lab_path = dir.join(format!("{name}_graph_labels.txt"));
    let lab_file = lab_path.display().to_string();
    let lab_text = read_file(&lab_path)?;
    let mut raw_labels = Vec::new();
    for (i, line) in data_lines(&lab_text) {
        let v: f64 = parse_token(&lab_file, i, line, "a numeric graph label")?;
        if !v.is_finite() {
            return Err(Error::parse(&lab_file, i, "label is not finite"));
        }
        raw_labels.push(v);
    }
    if raw_labels.len() != graph_count {
        return Err(Error::InvalidDataset(format!(
            "{name}: {} labels for {} graphs",
            raw_labels.len(),
            graph_count
        )));
    }
    let integral = raw_labels
        .iter()
        .all(|v| v.fract() == 0.0 && v.abs() <= i64::MAX as f64 / 2.0);
    let mut report = TuReport::default();
    let (task, labels): (Task, Vec<Label>) = if integral {
        let mut distinct: Vec<i64> = raw_labels.iter().map(|&v| v as i64).collect();
        distinct.sort_unstable();
        distinct.dedup();
        report.label_mapping = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let class_of = |v: f64| -> usize {
            distinct.binary_search(&(v as i64)).expect("distinct covers all labels")
        };
        (
            Task::Classification { classes: distinct.len() },
            raw_labels.iter().map(|&v| Label::Class(class_of(v))).collect(),
        )
    } else {
        report.regression = true;
        (
            Task::Regression { dims: 1 },
            raw_labels.iter().map(|&v| Label::Target(vec![v])).collect(),
        )
    };

    // Optional node information: one-hot labels first, then attributes.
    let mut features: Vec<Vec<f64>> = vec![Vec::new(); n_total];
    let nl_path = dir.join(format!("{name}_node_labels.txt"));
    if nl_path.exists() {
        let nl_file = nl_path.display().to_string();
        let text = fs::read_to_string(&nl_path)?;
        let mut values = Vec::new();
        for (i, line) in data_lines(&text) {
            values.push(parse_token::<i64>(&nl_file, i, line, "an integer node label")?);
        }
        if values.len() != n_total {
            return Err(Error::InvalidDataset(format!(
                "{name}: {} node labels for {} nodes",
                values.len(),
                n_total
            )));
        }
        let lo = *values.iter().min().unwrap();
        let hi = *values.iter().max().unwrap();
        let width = (hi - lo) as usize + 1;
        for (node, &v) in values.iter().enumerate() {
            let mut row = vec![0.0; width];
            row[(v - lo) as usize] = 1.0;
            features[node] = row;
        }
    }
    let na_path = dir.join(format!("{name}_node_attributes.txt"));
    if na_path.exists() {
        let na_file = na_path.display().to_string();
        let text = fs::read_to_string(&na_path)?;
        let mut arity = None;
        let mut count = 0;
        for (i, line) in data_lines(&text) {
            if count >= n_total {
                return Err(Error::parse(&na_file, i, "more attribute rows than nodes"));
            }
            let mut row = Vec::new();
            for token in line.split(',') {
                let v: f64 = parse_token(&na_file, i, token, "a real attribute")?;
                if !v.is_finite() {
                    return Err(Error::parse(&na_file, i, "attribute is not finite"));
                }
                row.push(v);
            }
            match arity {
                None => arity = Some(row.len()),
                Some(a) if a != row.len() => {
                    return Err(Error::parse(
                        &na_file,
                        i,
                        format!("expected {a} attributes, found {}", row.len()),
                    ));
                }
                _ => {}
            }
            features[count].extend(row);
            count += 1;
        }
        if count != n_total {
            return Err(Error::InvalidDataset(format!(
                "{name}: {count} attribute rows for {n_total} nodes"
            )));
        }
    }
    if !nl_path.exists() && !na_path.exists() {
        for row in &mut features {
            row.push(1.0);
        }
    }

    // Arcs: 1-based global endpoints, both directions collapse.
    let a_path = dir.join(format!("{name}_A.txt"));
    let a_file = a_path.display().to_string();
    let a_text = read_file(&a_path)?;
    let mut edge_sets: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); graph_count];
    for (i, line) in data_lines(&a_text) {
        let mut it = line.split(',');
        let (u, v) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (
                parse_token::<usize>(&a_file, i, a, "a 1-based node id")?,
                parse_token::<usize>(&a_file, i, b, "a 1-based node id")?,
            ),
            _ => return Err(Error::parse(&a_file, i, "expected two comma-separated ids")),
        };
        if u == 0 || v == 0 || u > n_total || v > n_total {
            return Err(Error::parse(
                &a_file,
                i,
                format!("node id out of range 1..={n_total}"),
            ));
        }
        let (u, v) = (u - 1, v - 1);
        if u == v {
            report.self_loops_dropped += 1;
            continue;
        }
        if graph_of_node[u] != graph_of_node[v] {
            return Err(Error::parse(&a_file, i, "arc joins nodes of different graphs"));
        }
        let (a, b) = (local[u].min(local[v]), local[u].max(local[v]));
        edge_sets[graph_of_node[u]].insert((a, b));
    }

    let mut feature_rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); graph_count];
    for (node, &g) in graph_of_node.iter().enumerate() {
        feature_rows[g].push(std::mem::take(&mut features[node]));
    }
    let mut graphs = Vec::with_capacity(graph_count);
    for g in 0..graph_count {
        graphs.push(Graph::new(
            (g + 1) as u64,
            sizes[g],
            edge_sets[g].iter().copied().collect(),
            std::mem::take(&mut feature_rows[g]),
            Some(labels[g].clone()),
        )?);
    }
    Ok((Dataset::new(name, graphs, task)?, report))
}

/// Writes the dataset back out in the TU layout (arc list in both
/// directions, indicator, labels, attributes). Feature values are
/// printed with shortest round-trip precision, so parsing the output
/// reproduces the dataset exactly.
pub fn write_tu_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = &d.name;
    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut attributes = String::new();
    let mut offset = 0usize;
    let with_features = d.graphs.iter().any(|g| g.feature_dim() > 0);
    for (gi, g) in d.graphs.iter().enumerate() {
        for &(u, v) in g.edges() {
            let (gu, gv) = (offset + u + 1, offset + v + 1);
            a.push_str(&format!("{gu}, {gv}\n{gv}, {gu}\n"));
        }
        for v in 0..g.n() {
            indicator.push_str(&format!("{}\n", gi + 1));
            if with_features {
                let row: Vec<String> =
                    g.features()[v].iter().map(|x| format!("{x}")).collect();
                attributes.push_str(&row.join(", "));
                attributes.push('\n');
            }
        }
        match g.label() {
            Some(Label::Class(c)) => labels.push_str(&format!("{c}\n")),
            Some(Label::Target(t)) if t.len() == 1 => {
                labels.push_str(&format!("{}\n", t[0]));
            }
            Some(Label::Target(_)) => {
                return Err(Error::InvalidArgument(
                    "the TU layout stores a single target per graph".into(),
                ));
            }
            None => {
                return Err(Error::InvalidArgument(format!(
                    "graph {} has no label to write",
                    g.id()
                )));
            }
        }
        offset += g.n();
    }
    fs::write(dir.join(format!("{name}_A.txt")), a)?;
    fs::write(dir.join(format!("{name}_graph_indicator.txt")), indicator)?;
    fs::write(dir.join(format!("{name}_graph_labels.txt")), labels)?;
    if with_features {
        fs::write(dir.join(format!("{name}_node_attributes.txt")), attributes)?;
    }
    Ok(())
}

/// JSON-lines records in file order. Blank lines and `#` comments are
/// skipped; unknown keys are ignored; negative values are rejected.
pub fn parse_prediction_log(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = path.display().to_string();
    let text = read_file(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(&file, i + 1, e.to_string()))?;
        if !record.value.is_finite() || record.value < 0.0 {
            return Err(Error::parse(
                &file,
                i + 1,
                format!("value must be a nonnegative real, found {}", record.value),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_prediction_log(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// 6 significant digits, trailing zeros kept, exponent notation outside
/// [1e-4, 1e6).
pub fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let (sign, a) = if v < 0.0 { ("-", -v) } else { ("", v) };
    let sci = format!("{a:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("{:e} places an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);
    if !(-4..6).contains(&exp) {
        return format!("{sign}{mantissa}e{exp}");
    }
    if exp >= 0 {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    }
}

/// Comma-separated table with a header row, LF endings, values at 6
/// significant digits. Preamble lines are emitted first as `#` comments.
pub fn write_table_with_preamble(
    rows: &[Vec<f64>],
    header: &[&str],
    preamble: &[String],
    path: &Path,
) -> Result<()> {
    if let Some(bad) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(Error::InvalidArgument(format!(
            "row of arity {} in a {}-column table",
            bad.len(),
            header.len()
        )));
    }
    let mut out = String::new();
    for line in preamble {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| sig6(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_table(rows: &[Vec<f64>], header: &[&str], path: &Path) -> Result<()> {
    write_table_with_preamble(rows, header, &[], path)
}

/// Header and rows of a comma-separated table, skipping `#` comments.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = path.display().to_string();
    let text = read_file(path)?;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match &header {
            None => header = Some(trimmed.split(',').map(|s| s.trim().to_string()).collect()),
            Some(h) => {
                let row: Vec<f64> = trimmed
                    .split(',')
                    .map(|t| parse_token::<f64>(&file, i + 1, t, "a real value"))
                    .collect::<Result<_>>()?;
                if row.len() != h.len() {
                    return Err(Error::parse(
                        &file,
                        i + 1,
                        format!("expected {} columns, found {}", h.len(), row.len()),
                    ));
                }
                rows.push(row);
            }
        }
    }
    match header {
        Some(h) => Ok((h, rows)),
        None => Err(Error::parse(&file, 1, "table has no header row")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn write_dir(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, content) in files {
            fs::write(dir.path().join(name), content).unwrap();
        }
        dir
    }

    #[test]
    fn smallest_wellformed_input() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 2\n2, 1\n"),
            ("t_graph_indicator.txt", "1\n1\n"),
            ("t_graph_labels.txt", "1\n"),
        ]);
        let (d, report) = parse_tu_dataset(dir.path(), "t").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.graphs[0].n(), 2);
        assert_eq!(d.graphs[0].edges(), &[(0, 1)]);
        assert_eq!(d.graphs[0].features(), &[vec![1.0], vec![1.0]]);
        assert_eq!(d.task, Task::Classification { classes: 1 });
        assert_eq!(report.label_mapping, vec![(1, 0)]);
        assert_eq!(report.self_loops_dropped, 0);
    }

    #[test]
    fn one_hot_node_labels() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 2\n2, 1\n"),
            ("t_graph_indicator.txt", "1\n1\n"),
            ("t_graph_labels.txt", "0\n"),
            ("t_node_labels.txt", "2\n0\n"),
        ]);
        let (d, _) = parse_tu_dataset(dir.path(), "t").unwrap();
        assert_eq!(
            d.graphs[0].features(),
            &[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]
        );
    }

    #[test]
    fn labels_one_hot_concatenates_before_attributes() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 2\n2, 1\n"),
            ("t_graph_indicator.txt", "1\n1\n"),
            ("t_graph_labels.txt", "0\n"),
            ("t_node_labels.txt", "1\n1\n"),
            ("t_node_attributes.txt", "0.5, -1.5\n2.25, 0\n"),
        ]);
        let (d, _) = parse_tu_dataset(dir.path(), "t").unwrap();
        assert_eq!(
            d.graphs[0].features(),
            &[vec![1.0, 0.5, -1.5], vec![1.0, 2.25, 0.0]]
        );
    }

    #[test]
    fn self_loops_and_duplicate_arcs_are_normalized() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 1\n1, 2\n1, 2\n2, 1\n3, 3\n"),
            ("t_graph_indicator.txt", "1\n1\n2\n"),
            ("t_graph_labels.txt", "5\n7\n"),
        ]);
        let (d, report) = parse_tu_dataset(dir.path(), "t").unwrap();
        assert_eq!(report.self_loops_dropped, 2);
        assert_eq!(d.graphs[0].edges(), &[(0, 1)]);
        assert_eq!(d.graphs[1].m(), 0);
        assert_eq!(report.label_mapping, vec![(5, 0), (7, 1)]);
    }

    #[test]
    fn fractional_labels_switch_to_regression() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 2\n"),
            ("t_graph_indicator.txt", "1\n1\n"),
            ("t_graph_labels.txt", "0.25\n"),
        ]);
        let (d, report) = parse_tu_dataset(dir.path(), "t").unwrap();
        assert!(report.regression);
        assert_eq!(d.task, Task::Regression { dims: 1 });
        assert_eq!(d.graphs[0].label(), Some(&Label::Target(vec![0.25])));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 2\napple, 3\n"),
            ("t_graph_indicator.txt", "1\n1\n1\n"),
            ("t_graph_labels.txt", "0\n"),
        ]);
        let err = parse_tu_dataset(dir.path(), "t").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other}"),
        }

        let dir = write_dir(&[
            ("t_A.txt", "1, 3\n"),
            ("t_graph_indicator.txt", "1\n1\n2\n"),
            ("t_graph_labels.txt", "0\n1\n"),
        ]);
        assert!(matches!(
            parse_tu_dataset(dir.path(), "t").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));

        let dir = write_dir(&[
            ("t_graph_indicator.txt", "1\n"),
            ("t_graph_labels.txt", "0\n"),
        ]);
        assert!(matches!(
            parse_tu_dataset(dir.path(), "t").unwrap_err(),
            Error::MissingFile(_)
        ));
    }

    #[test]
    fn provenance_comments_are_ignored() {
        let dir = write_dir(&[
            ("t_A.txt", "# made by a tool\n1, 2\n2, 1\n"),
            ("t_graph_indicator.txt", "# made by a tool\n1\n\n1\n"),
            ("t_graph_labels.txt", "# made by a tool\n1\n"),
        ]);
        let (d, _) = parse_tu_dataset(dir.path(), "t").unwrap();
        assert_eq!(d.graphs[0].n(), 2);
        assert_eq!(d.graphs[0].edges(), &[(0, 1)]);
    }

    #[test]
    fn label_count_must_match_graph_count() {
        let dir = write_dir(&[
            ("t_A.txt", "1, 2\n"),
            ("t_graph_indicator.txt", "1\n1\n"),
            ("t_graph_labels.txt", "0\n1\n"),
        ]);
        assert!(parse_tu_dataset(dir.path(), "t").is_err());
    }

    proptest! {
        #[test]
        fn tu_round_trip(
            graph_specs in prop::collection::vec(
                (1usize..=5, prop::collection::vec(-50.0f64..50.0, 1..=3)),
                1..=4
            ),
            seed in 0u64..1000,
        ) {
            use rand::rngs::StdRng;
            use rand::{Rng, SeedableRng};
            let mut rng = StdRng::seed_from_u64(seed);
            let dim = graph_specs[0].1.len();
            // Classes observed in the file are what the parser can see,
            // so keep the label range dense.
            let classes = graph_specs.len().min(2);
            let graphs: Vec<Graph> = graph_specs
                .iter()
                .enumerate()
                .map(|(i, (n, proto))| {
                    let n = *n;
                    let class = i % classes;
                    let mut edges = Vec::new();
                    for u in 0..n {
                        for v in (u + 1)..n {
                            if rng.gen_bool(0.5) {
                                edges.push((u, v));
                            }
                        }
                    }
                    let features = (0..n)
                        .map(|_| {
                            (0..dim)
                                .map(|k| proto[k % proto.len()] + rng.gen_range(-1.0..1.0))
                                .collect()
                        })
                        .collect();
                    Graph::new((i + 1) as u64, n, edges, features, Some(Label::Class(class)))
                        .unwrap()
                })
                .collect();
            let d = Dataset::new("rt", graphs, Task::Classification { classes }).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_tu_dataset(&d, dir.path()).unwrap();
            let (back, _) = parse_tu_dataset(dir.path(), "rt").unwrap();
            prop_assert_eq!(back, d);
        }
    }

    #[test]
    fn regression_round_trip() {
        let graphs = vec![
            Graph::new(1, 2, vec![(0, 1)], vec![vec![0.5], vec![1.5]], Some(Label::Target(vec![0.125]))).unwrap(),
            Graph::new(2, 1, vec![], vec![vec![-3.0]], Some(Label::Target(vec![-2.5]))).unwrap(),
        ];
        let d = Dataset::new("reg", graphs, Task::Regression { dims: 1 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_tu_dataset(&d, dir.path()).unwrap();
        let (back, report) = parse_tu_dataset(dir.path(), "reg").unwrap();
        assert!(report.regression);
        assert_eq!(back, d);
    }

    #[test]
    fn prediction_log_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");

        fs::write(&path, "").unwrap();
        assert!(parse_prediction_log(&path).unwrap().is_empty());

        let records = vec![
            PredictionRecord { graph_id: 3, run_id: 0, epoch: None, value: 1.0 },
            PredictionRecord { graph_id: 1, run_id: 2, epoch: Some(17), value: 0.0 },
        ];
        write_prediction_log(&records, &path).unwrap();
        assert_eq!(parse_prediction_log(&path).unwrap(), records);

        fs::write(&path, "{\"graph_id\":1,\"run_id\":0,\"value\":0.5,\"extra\":9}\n").unwrap();
        let parsed = parse_prediction_log(&path).unwrap();
        assert_eq!(parsed[0].value, 0.5);

        fs::write(&path, "{\"graph_id\":1,\"run_id\":0,\"value\":1.0}\nnot json\n").unwrap();
        assert!(matches!(
            parse_prediction_log(&path).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));

        fs::write(&path, "{\"graph_id\":1,\"run_id\":0,\"value\":-0.5}\n").unwrap();
        assert!(parse_prediction_log(&path).is_err());
    }

    #[test]
    fn table_rendering() {
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(0.0), "0.00000");
        assert_eq!(sig6(-2.5), "-2.50000");
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(0.000123456), "0.000123456");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0000123456), "1.23456e-5");
        assert_eq!(sig6(f64::INFINITY), "inf");

        let dir = tempfile::tempdir().unwrap();
        let path: PathBuf = dir.path().join("x.csv");
        write_table(&[vec![1.0]], &["x"], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x\n1.00000\n");

        write_table(&[], &["a", "b"], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");

        assert!(write_table(&[vec![1.0]], &["a", "b"], &path).is_err());

        write_table_with_preamble(
            &[vec![0.5, 2.0]],
            &["a", "b"],
            &["tool v1 args".to_string()],
            &path,
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# tool v1 args\na,b\n"));
        let (header, rows) = read_table(&path).unwrap();
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(rows, vec![vec![0.5, 2.0]]);
    }
}
