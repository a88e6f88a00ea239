//! Plain-text dataset files.
//!
//! * edges: one whitespace-separated `src dst` pair per line, `#` starts a
//!   comment; pairs are undirected and symmetrised on load.
//! * features: CSV, row `i` holds node `i`.
//! * labels: CSV `node_id,class_id,split` with split `train` or `test`.
//! * motifs: same format as the edge file, listing ground-truth pairs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{LabeledGraph, Split};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, NodeId};

#[derive(Debug, Clone)]
pub struct GenericFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub motifs: PathBuf,
}

impl GenericFiles {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.csv"),
            motifs: dir.join("motifs.txt"),
        }
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(NodeId, NodeId)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(i + 1, format!("expected 'src dst', got '{line}'")));
        }
        let parse = |f: &str| {
            f.parse::<NodeId>()
                .map_err(|_| Error::parse(i + 1, format!("'{f}' is not a node id")))
        };
        pairs.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(pairs)
}

fn parse_features(text: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("'{f}' is not a number")))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(i + 1, format!("expected {w} columns, got {}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, width), values).expect("rectangular by construction"))
}

fn parse_labels(text: &str) -> Result<Vec<(NodeId, usize, Split)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("node_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                i + 1,
                format!("expected 'node_id,class_id,split', got '{line}'"),
            ));
        }
        let node = fields[0]
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("'{}' is not a node id", fields[0])))?;
        let class = fields[1]
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("'{}' is not a class id", fields[1])))?;
        let split = match fields[2] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::parse(i + 1, format!("unknown split '{other}'"))),
        };
        out.push((node, class, split));
    }
    Ok(out)
}

/// Load a dataset from the three generic text files. Motif annotations are
/// left empty; see [`load_motifs`].
pub fn load_generic(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<LabeledGraph> {
    let pairs = parse_pairs(&fs::read_to_string(edge_path)?)?;
    let features = parse_features(&fs::read_to_string(feature_path)?)?;
    let rows = parse_labels(&fs::read_to_string(label_path)?)?;

    let n = features.nrows();
    let max_label_node = rows.iter().map(|r| r.0).max();
    if max_label_node.map_or(0, |m| m + 1) != n {
        return Err(Error::input(format!(
            "feature file has {n} rows but label file covers node ids up to {max_label_node:?}"
        )));
    }
    let mut labels = vec![None; n];
    let mut split = vec![Split::Train; n];
    for (node, class, s) in rows {
        if labels[node].replace(class).is_some() {
            return Err(Error::input(format!("node {node} labelled twice")));
        }
        split[node] = s;
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(node, l)| l.ok_or_else(|| Error::input(format!("node id gap: node {node} has no label"))))
        .collect::<Result<_>>()?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let graph = Graph::from_undirected(n, &pairs, features, Some(labels), num_classes)?;
    LabeledGraph::new(graph, BTreeSet::new(), split)
}

/// Load `edges.txt`, `features.csv` and `labels.csv` from `dir`, plus
/// `motifs.txt` when present.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<LabeledGraph> {
    let files = GenericFiles::in_dir(dir);
    let mut data = load_generic(&files.edges, &files.features, &files.labels)?;
    if files.motifs.exists() {
        let motifs = load_motifs(&files.motifs, &data.graph)?;
        data = LabeledGraph::new(data.graph, motifs, data.split)?;
    }
    Ok(data)
}

/// Read a motif file and resolve its pairs (both directions) to edge ids.
pub fn load_motifs(path: impl AsRef<Path>, graph: &Graph) -> Result<BTreeSet<EdgeId>> {
    let pairs = parse_pairs(&fs::read_to_string(path)?)?;
    let mut out = BTreeSet::new();
    for (a, b) in pairs {
        for (s, d) in [(a, b), (b, a)] {
            let id = graph
                .edge_id(s, d)
                .ok_or_else(|| Error::input(format!("motif edge ({s}, {d}) is not in the graph")))?;
            out.insert(id);
        }
    }
    Ok(out)
}

fn undirected_text(graph: &Graph, edges: impl Iterator<Item = EdgeId>) -> String {
    let mut out = String::new();
    for e in edges {
        let (s, d) = graph.edge(e);
        if s < d || graph.edge_id(d, s).is_none() {
            writeln!(out, "{s} {d}").expect("write to string");
        }
    }
    out
}

/// Write a dataset (and its motif annotation) into `dir`.
pub fn save_generic(data: &LabeledGraph, dir: impl AsRef<Path>) -> Result<GenericFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let files = GenericFiles::in_dir(dir);
    let g = &data.graph;

    fs::write(&files.edges, undirected_text(g, 0..g.num_edges()))?;

    let mut features = String::new();
    for row in g.features().rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        features.push_str(&cells.join(","));
        features.push('\n');
    }
    fs::write(&files.features, features)?;

    let mut labels = String::from("node_id,class_id,split\n");
    for (node, (&class, split)) in data.labels().iter().zip(&data.split).enumerate() {
        writeln!(labels, "{node},{class},{}", split.as_str()).expect("write to string");
    }
    fs::write(&files.labels, labels)?;

    fs::write(&files.motifs, undirected_text(g, data.motif_edges.iter().copied()))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_ba_community;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn symmetrises_edges() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e", "# comment\n0 1\n1 2  # trailing\n");
        let f = write(dir.path(), "f", "1,0\n0,1\n1,1\n");
        let l = write(
            dir.path(),
            "l",
            "node_id,class_id,split\n0,0,train\n1,1,test\n2,0,train\n",
        );
        let lg = load_generic(&e, &f, &l).unwrap();
        assert_eq!(lg.graph.num_edges(), 4);
        assert_eq!(lg.graph.num_classes(), 2);
        assert_eq!(lg.test_nodes(), vec![1]);
        assert!(lg.motif_edges.is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "f", "1\n1\n");
        let l = write(dir.path(), "l", "0,0,train\n1,0,test\n");

        let e = write(dir.path(), "e1", "0 1\n0 x\n");
        match load_generic(&e, &f, &l) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }

        let e = write(dir.path(), "e2", "0 1\n");
        let f3 = write(dir.path(), "f3", "1\n1\n1\n");
        assert!(matches!(load_generic(&e, &f3, &l), Err(Error::Input(_))));

        let gap = write(dir.path(), "l2", "0,0,train\n0,1,test\n");
        assert!(matches!(load_generic(&e, &f, &gap), Err(Error::Input(_))));

        let far = write(dir.path(), "e3", "0 5\n");
        assert!(matches!(load_generic(&far, &f, &l), Err(Error::Input(_))));

        let bad_split = write(dir.path(), "l3", "0,0,train\n1,0,dev\n");
        assert!(matches!(
            load_generic(&e, &f, &bad_split),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn save_then_load_round_trips() {
        let lg = gen_ba_community(5);
        let dir = tempfile::tempdir().unwrap();
        let files = save_generic(&lg, dir.path()).unwrap();
        let back = load_generic(&files.edges, &files.features, &files.labels).unwrap();
        assert_eq!(back.graph, lg.graph);
        assert_eq!(back.split, lg.split);
        assert_eq!(load_motifs(&files.motifs, &back.graph).unwrap(), lg.motif_edges);
        let whole = load_dir(dir.path()).unwrap();
        assert_eq!((whole.graph, whole.motif_edges), (lg.graph, lg.motif_edges));
    }
}
