//! JSON records for explanations and reports.
//!
//! Edges are written both as `(src, dst)` pairs and as ids into the
//! canonical edge list; loading checks that the two agree with the graph,
//! so a record cannot be silently applied to a different dataset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::{Explanation, Method, TerminalReason, TraceStep};
use crate::graph::{Coalition, EdgeId, Graph, NodeId};

pub const EXPLANATION_FORMAT: &str = "graphgi-explanation/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub edge: (NodeId, NodeId),
    pub edge_id: EdgeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired: Option<(NodeId, NodeId)>,
    pub score: f64,
    pub strength_before: f64,
    pub strength_after: f64,
    pub candidates: usize,
    pub frontier_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub format: String,
    pub target: NodeId,
    pub predicted_class: usize,
    pub method: Method,
    pub hops: usize,
    /// Selected directed edges in insertion order.
    pub edges: Vec<(NodeId, NodeId)>,
    pub edge_ids: Vec<EdgeId>,
    pub trace: Vec<StepRecord>,
    pub terminal_reason: TerminalReason,
}

impl ExplanationRecord {
    pub fn new(graph: &Graph, x: &Explanation) -> Self {
        let edge_ids: Vec<EdgeId> = x.selected.iter().collect();
        Self {
            format: EXPLANATION_FORMAT.to_string(),
            target: x.target,
            predicted_class: x.predicted_class,
            method: x.method,
            hops: x.hops,
            edges: edge_ids.iter().map(|&e| graph.edge(e)).collect(),
            edge_ids,
            trace: x
                .trace
                .iter()
                .map(|s| StepRecord {
                    edge: graph.edge(s.edge),
                    edge_id: s.edge,
                    paired: s.paired.map(|p| graph.edge(p)),
                    score: s.score,
                    strength_before: s.strength_before,
                    strength_after: s.strength_after,
                    candidates: s.candidates,
                    frontier_size: s.frontier_size,
                })
                .collect(),
            terminal_reason: x.terminal_reason,
        }
    }

    /// Rebuild the explanation against `graph`, rejecting records whose
    /// pairs and ids disagree with it.
    pub fn to_explanation(&self, graph: &Graph) -> Result<Explanation> {
        if self.format != EXPLANATION_FORMAT {
            return Err(Error::input(format!(
                "unsupported explanation format '{}'",
                self.format
            )));
        }
        if self.target >= graph.num_nodes() {
            return Err(Error::input(format!(
                "explanation target {} is outside a graph of {} nodes",
                self.target,
                graph.num_nodes()
            )));
        }
        if self.edges.len() != self.edge_ids.len() {
            return Err(Error::input("edge pairs and edge ids differ in length"));
        }
        let resolve = |pair: (NodeId, NodeId), id: Option<EdgeId>| -> Result<EdgeId> {
            let found = graph
                .edge_id(pair.0, pair.1)
                .ok_or_else(|| Error::input(format!("edge ({}, {}) does not exist in the graph", pair.0, pair.1)))?;
            match id {
                Some(id) if id != found => Err(Error::input(format!(
                    "edge ({}, {}) has id {found} in the graph but {id} in the record",
                    pair.0, pair.1
                ))),
                _ => Ok(found),
            }
        };
        let selected: Coalition = self
            .edges
            .iter()
            .zip(&self.edge_ids)
            .map(|(&p, &id)| resolve(p, Some(id)))
            .collect::<Result<_>>()?;
        if selected.len() != self.edges.len() {
            return Err(Error::input("explanation lists an edge twice"));
        }
        let trace = self
            .trace
            .iter()
            .map(|s| {
                Ok(TraceStep {
                    edge: resolve(s.edge, Some(s.edge_id))?,
                    paired: s.paired.map(|p| resolve(p, None)).transpose()?,
                    score: s.score,
                    strength_before: s.strength_before,
                    strength_after: s.strength_after,
                    candidates: s.candidates,
                    frontier_size: s.frontier_size,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Explanation {
            target: self.target,
            predicted_class: self.predicted_class,
            method: self.method,
            hops: self.hops,
            selected,
            trace,
            terminal_reason: self.terminal_reason,
        })
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(e.line(), e.to_string())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    from_json(&fs::read_to_string(path)?)
}

/// File stem used for a target's record and rendering.
pub fn file_stem(x: &Explanation) -> String {
    format!("{}-node{:05}", x.method, x.target)
}

pub fn save_explanation(dir: impl AsRef<Path>, graph: &Graph, x: &Explanation) -> Result<PathBuf> {
    let path = dir.as_ref().join(format!("{}.json", file_stem(x)));
    write_json(&path, &ExplanationRecord::new(graph, x))?;
    Ok(path)
}

pub fn load_explanation(path: impl AsRef<Path>, graph: &Graph) -> Result<Explanation> {
    read_json::<ExplanationRecord>(path)?.to_explanation(graph)
}

/// Every explanation record in `dir`, in file-name order. Other JSON files
/// (manifests, reports) are skipped.
pub fn load_explanations_dir(dir: impl AsRef<Path>, graph: &Graph) -> Result<Vec<Explanation>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.sort();
    let mut out = Vec::new();
    for path in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
        let value: serde_json::Value = read_json(&path)?;
        if value.get("format").and_then(|f| f.as_str()) == Some(EXPLANATION_FORMAT) {
            let record: ExplanationRecord = serde_json::from_value(value).map_err(json_error)?;
            out.push(record.to_explanation(graph).map_err(|e| match e {
                Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
                other => other,
            })?);
        }
    }
    Ok(out)
}
