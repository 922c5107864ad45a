//! Graph files.
//!
//! Two layouts are supported:
//!
//! * [`GraphFormat::Json`]: one JSON document
//!   `{"num_nodes", "directed", "edges": [[u, v], ...], "features": [[...]], "labels": [...], "num_classes"}`.
//!   `labels` may be omitted (unlabeled test graph). Weighted graphs add `"edge_weights"`.
//! * [`GraphFormat::EdgeList`]: a directory holding `edges.txt` (one `u v` pair
//!   per line, optional third weight column, `#` comments), headerless
//!   `features.csv` (row i = node i) and optional `labels.csv`. Comment lines of
//!   the form `# nodes N`, `# classes C` and `# directed true|false` in
//!   `edges.txt` carry metadata; without them the node count comes from the
//!   feature rows, the class count from the largest label, and the graph is
//!   undirected.
//!
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, LabeledGraph, WeightedGraph};
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    Json,
    EdgeList,
}

impl GraphFormat {
    /// `.json` files are JSON containers; anything else is an edge-list directory.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => GraphFormat::Json,
            _ => GraphFormat::EdgeList,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    num_nodes: usize,
    directed: bool,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_weights: Option<Vec<f64>>,
}

pub fn save_graph(graph: &LabeledGraph, path: &Path, format: GraphFormat) -> Result<()> {
    write_any(graph, None, path, format)
}

pub fn save_weighted_graph(graph: &WeightedGraph, path: &Path, format: GraphFormat) -> Result<()> {
    write_any(graph.graph(), Some(graph.weights()), path, format)
}

pub fn load_graph(path: &Path, format: GraphFormat) -> Result<LabeledGraph> {
    Ok(read_any(path, format)?.0)
}

/// Loads a graph with edge weights; files without weights give unit weights.
pub fn load_weighted_graph(path: &Path, format: GraphFormat) -> Result<WeightedGraph> {
    let (graph, weights) = read_any(path, format)?;
    match weights {
        Some(w) => WeightedGraph::new(graph, w),
        None => Ok(WeightedGraph::unit(graph)),
    }
}

fn write_any(
    graph: &LabeledGraph,
    weights: Option<&[f64]>,
    path: &Path,
    format: GraphFormat,
) -> Result<()> {
    match format {
        GraphFormat::Json => {
            let file = GraphFile {
                num_nodes: graph.num_nodes(),
                directed: graph.is_directed(),
                edges: graph.edges().iter().map(|&(u, v)| [u, v]).collect(),
                features: graph.features().to_rows(),
                labels: graph.labels().map(<[usize]>::to_vec),
                num_classes: graph.num_classes(),
                edge_weights: weights.map(<[f64]>::to_vec),
            };
            let text = serde_json::to_string(&file)
                .map_err(|e| Error::json(path.display().to_string(), e))?;
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        GraphFormat::EdgeList => {
            fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
            let mut edges = String::new();
            writeln!(edges, "# nodes {}", graph.num_nodes()).unwrap();
            writeln!(edges, "# classes {}", graph.num_classes()).unwrap();
            writeln!(edges, "# directed {}", graph.is_directed()).unwrap();
            for (k, &(u, v)) in graph.edges().iter().enumerate() {
                match weights {
                    Some(w) => writeln!(edges, "{u} {v} {}", w[k]).unwrap(),
                    None => writeln!(edges, "{u} {v}").unwrap(),
                }
            }
            write_file(&path.join("edges.txt"), &edges)?;

            let mut features = String::new();
            for r in 0..graph.num_nodes() {
                let row: Vec<String> = graph.features().row(r).iter().map(f64::to_string).collect();
                writeln!(features, "{}", row.join(",")).unwrap();
            }
            write_file(&path.join("features.csv"), &features)?;

            let labels_path = path.join("labels.csv");
            match graph.labels() {
                Some(labels) => {
                    let mut text = String::new();
                    for y in labels {
                        writeln!(text, "{y}").unwrap();
                    }
                    write_file(&labels_path, &text)?;
                }
                None if labels_path.exists() => {
                    fs::remove_file(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
                }
                None => {}
            }
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_any(path: &Path, format: GraphFormat) -> Result<(LabeledGraph, Option<Vec<f64>>)> {
    match format {
        GraphFormat::Json => read_json(path),
        GraphFormat::EdgeList => read_edge_list(path),
    }
}

fn read_json(path: &Path) -> Result<(LabeledGraph, Option<Vec<f64>>)> {
    let text = read_file(path)?;
    let file: GraphFile =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    for (k, &[u, v]) in file.edges.iter().enumerate() {
        let bad = if u >= file.num_nodes { u } else { v };
        if u >= file.num_nodes || v >= file.num_nodes {
            return Err(Error::InvalidGraph(format!(
                "{}: edges[{k}] references node {bad} but num_nodes is {}",
                path.display(),
                file.num_nodes
            )));
        }
    }
    let features = if file.features.is_empty() {
        DenseMatrix::zeros(0, 0)
    } else {
        DenseMatrix::from_rows(&file.features)?
    };
    let edges: Vec<Edge> = file.edges.iter().map(|&[u, v]| (u, v)).collect();
    if let Some(w) = &file.edge_weights {
        if w.len() != edges.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}: {} edge weights for {} edges",
                path.display(),
                w.len(),
                edges.len()
            )));
        }
    }
    let weights = file.edge_weights.map(|w| reorder_weights(&edges, w, file.directed));
    let graph = LabeledGraph::new(
        file.num_nodes,
        &edges,
        file.directed,
        features,
        file.labels,
        file.num_classes,
    )?;
    Ok((graph, weights))
}

/// Weights follow the input edge order; the graph stores edges sorted.
fn reorder_weights(edges: &[Edge], weights: Vec<f64>, directed: bool) -> Vec<f64> {
    let mut pairs: Vec<(Edge, f64)> = edges
        .iter()
        .map(|&(u, v)| if directed || u <= v { (u, v) } else { (v, u) })
        .zip(weights)
        .collect();
    pairs.sort_by_key(|a| a.0);
    pairs.dedup_by(|a, b| a.0 == b.0);
    pairs.into_iter().map(|(_, w)| w).collect()
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_edge_list(dir: &Path) -> Result<(LabeledGraph, Option<Vec<f64>>)> {
    let edges_path = dir.join("edges.txt");
    let features_path = dir.join("features.csv");
    let labels_path = dir.join("labels.csv");

    let features_text = read_file(&features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in features_text.lines().enumerate() {
        let line = line.trim();
        let row = if line.is_empty() {
            Vec::new()
        } else {
            line.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(&features_path, i + 1, format!("bad value {t:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?
        };
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    &features_path,
                    i + 1,
                    format!("{} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }

    let edges_text = read_file(&edges_path)?;
    let mut declared_nodes = None;
    let mut declared_classes = None;
    let mut directed = false;
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (i, raw) in edges_text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("nodes"), Some(v)) => {
                    declared_nodes = Some(v.parse::<usize>().map_err(|e| {
                        parse_err(&edges_path, lineno, format!("bad node count: {e}"))
                    })?)
                }
                (Some("classes"), Some(v)) => {
                    declared_classes = Some(v.parse::<usize>().map_err(|e| {
                        parse_err(&edges_path, lineno, format!("bad class count: {e}"))
                    })?)
                }
                (Some("directed"), Some(v)) => {
                    directed = v.parse::<bool>().map_err(|e| {
                        parse_err(&edges_path, lineno, format!("bad directed flag: {e}"))
                    })?
                }
                _ => {}
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 && tokens.len() != 3 {
            return Err(parse_err(
                &edges_path,
                lineno,
                format!("expected \"u v\" or \"u v w\", got {line:?}"),
            ));
        }
        let u = parse_index(&edges_path, lineno, tokens[0])?;
        let v = parse_index(&edges_path, lineno, tokens[1])?;
        if u == v {
            return Err(parse_err(&edges_path, lineno, format!("self-loop at node {u}")));
        }
        if tokens.len() == 3 {
            let w = tokens[2]
                .parse::<f64>()
                .map_err(|e| parse_err(&edges_path, lineno, format!("bad weight: {e}")))?;
            weights.push(w);
        }
        edges.push((u, v, lineno));
    }
    if !weights.is_empty() && weights.len() != edges.len() {
        return Err(parse_err(&edges_path, 0, "weights given on some edge lines but not all"));
    }

    let num_nodes = declared_nodes.unwrap_or(rows.len());
    if rows.len() != num_nodes {
        return Err(parse_err(
            &features_path,
            rows.len(),
            format!("{} feature rows for {num_nodes} nodes", rows.len()),
        ));
    }
    for &(u, v, lineno) in &edges {
        for idx in [u, v] {
            if idx >= num_nodes {
                return Err(Error::IndexOutOfRange {
                    path: edges_path.clone(),
                    line: lineno,
                    index: idx,
                    num_nodes,
                });
            }
        }
    }

    let labels = if labels_path.exists() {
        let text = read_file(&labels_path)?;
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            labels.push(
                line.parse::<usize>()
                    .map_err(|e| parse_err(&labels_path, i + 1, format!("bad label: {e}")))?,
            );
        }
        if labels.len() != num_nodes {
            return Err(parse_err(
                &labels_path,
                labels.len(),
                format!("{} labels for {num_nodes} nodes", labels.len()),
            ));
        }
        Some(labels)
    } else {
        None
    };
    let num_classes = declared_classes.unwrap_or_else(|| {
        labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(1, |&m| m + 1)
    });
    let cols = rows.first().map_or(0, Vec::len);
    let features = DenseMatrix::from_vec(num_nodes, cols, rows.concat())?;
    let pairs: Vec<Edge> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
    let weights = (!weights.is_empty()).then(|| reorder_weights(&pairs, weights, directed));
    let graph = LabeledGraph::new(num_nodes, &pairs, directed, features, labels, num_classes)?;
    Ok((graph, weights))
}

fn parse_index(path: &Path, line: usize, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|e| parse_err(path, line, format!("bad node index {token:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> LabeledGraph {
        let features =
            DenseMatrix::from_rows(&[vec![0.1, -2.5], vec![1.0 / 3.0, 4e-17], vec![7.0, 1e300]])
                .unwrap();
        LabeledGraph::new(3, &[(0, 1), (1, 2), (0, 2)], false, features, Some(vec![0, 1, 1]), 2)
            .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        let g = triangle();
        save_graph(&g, &p, GraphFormat::Json).unwrap();
        assert_eq!(load_graph(&p, GraphFormat::Json).unwrap(), g);
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g");
        let g = triangle();
        save_graph(&g, &p, GraphFormat::EdgeList).unwrap();
        assert_eq!(load_graph(&p, GraphFormat::EdgeList).unwrap(), g);
        let unlabeled = g.without_labels();
        save_graph(&unlabeled, &p, GraphFormat::EdgeList).unwrap();
        assert_eq!(load_graph(&p, GraphFormat::EdgeList).unwrap(), unlabeled);
    }

    #[test]
    fn weighted_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let w = WeightedGraph::new(triangle(), vec![0.25, 0.7310585786300049, 1.0]).unwrap();
        for (name, fmt) in [("w.json", GraphFormat::Json), ("w", GraphFormat::EdgeList)] {
            let p = dir.path().join(name);
            save_weighted_graph(&w, &p, fmt).unwrap();
            assert_eq!(load_weighted_graph(&p, fmt).unwrap(), w);
        }
    }

    #[test]
    fn out_of_range_index_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("features.csv"), "0\n0\n0\n").unwrap();
        fs::write(p.join("edges.txt"), "# a comment\n0 1\n1 99\n").unwrap();
        let err = load_graph(p, GraphFormat::EdgeList).unwrap_err();
        match err {
            Error::IndexOutOfRange { line, index, num_nodes, .. } => {
                assert_eq!((line, index, num_nodes), (3, 99, 3));
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(err_text(p).contains(":3:"));
    }

    fn err_text(p: &Path) -> String {
        load_graph(p, GraphFormat::EdgeList).unwrap_err().to_string()
    }

    #[test]
    fn malformed_lines_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("features.csv"), "0,1\n0,1\n").unwrap();
        fs::write(p.join("edges.txt"), "0 x\n").unwrap();
        assert!(matches!(
            load_graph(p, GraphFormat::EdgeList),
            Err(Error::Parse { line: 1, .. })
        ));
        fs::write(p.join("edges.txt"), "0 1\n").unwrap();
        fs::write(p.join("features.csv"), "0,1\n0\n").unwrap();
        assert!(matches!(
            load_graph(p, GraphFormat::EdgeList),
            Err(Error::Parse { line: 2, .. })
        ));
        fs::write(p.join("features.csv"), "0,1\n0,1\n").unwrap();
        fs::write(p.join("labels.csv"), "0\n1\n1\n").unwrap();
        assert!(matches!(
            load_graph(p, GraphFormat::EdgeList),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn json_without_labels_loads_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        fs::write(
            &p,
            r#"{"num_nodes": 2, "directed": false, "edges": [[1, 0]],
                "features": [[1.0], [2.0]], "num_classes": 2}"#,
        )
        .unwrap();
        let g = load_graph(&p, GraphFormat::Json).unwrap();
        assert!(g.labels().is_none());
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn json_index_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        fs::write(
            &p,
            r#"{"num_nodes": 2, "directed": false, "edges": [[0, 1], [1, 5]],
                "features": [[1.0], [2.0]], "num_classes": 1}"#,
        )
        .unwrap();
        let msg = load_graph(&p, GraphFormat::Json).unwrap_err().to_string();
        assert!(msg.contains("edges[1]"), "{msg}");
    }
}
