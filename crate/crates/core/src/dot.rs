//! Graphviz rendering of an explanation on its L-hop subgraph.
//!
//! The subgraph is drawn undirected. The target is the largest node, nodes
//! are filled by class, selected edges are bold and labelled with their
//! selection order, and planted motif edges are drawn in red.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::Result;
use crate::explainer::{explanation_subgraph, Explanation};
use crate::graph::{EdgeId, Graph, NodeId};

const PALETTE: [&str; 8] = [
    "#d9d9d9", "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69",
];

/// DOT text for `explanation`. `motif_edges` marks ground-truth edges when
/// the dataset has them.
pub fn explanation_dot(
    graph: &Graph,
    explanation: &Explanation,
    motif_edges: Option<&BTreeSet<EdgeId>>,
) -> Result<String> {
    let sub = explanation_subgraph(graph, explanation)?;
    let order: BTreeMap<EdgeId, usize> = explanation
        .selected
        .iter()
        .enumerate()
        .map(|(i, e)| (e, i + 1))
        .collect();

    // one drawn edge per unordered pair
    let mut pairs: BTreeMap<(NodeId, NodeId), Vec<EdgeId>> = BTreeMap::new();
    for &e in sub.edges() {
        let (s, d) = graph.edge(e);
        pairs.entry((s.min(d), s.max(d))).or_default().push(e);
    }

    let mut out = String::new();
    writeln!(out, "graph explanation {{").unwrap();
    writeln!(
        out,
        "  label=\"node {} ({}, class {})\";",
        explanation.target, explanation.method, explanation.predicted_class
    )
    .unwrap();
    writeln!(
        out,
        "  node [shape=circle, style=filled, fontsize=9, width=0.3, fixedsize=true];"
    )
    .unwrap();
    for &n in sub.nodes() {
        let fill = graph.labels().map_or(PALETTE[0], |l| PALETTE[l[n] % PALETTE.len()]);
        if n == explanation.target {
            writeln!(out, "  {n} [fillcolor=\"{fill}\", width=0.7, penwidth=3, fontsize=14];").unwrap();
        } else {
            writeln!(out, "  {n} [fillcolor=\"{fill}\"];").unwrap();
        }
    }
    for ((u, v), edges) in &pairs {
        let mut attrs = Vec::new();
        let steps: Vec<String> = edges
            .iter()
            .filter_map(|e| order.get(e))
            .map(|i| i.to_string())
            .collect();
        if !steps.is_empty() {
            attrs.push("style=bold".to_string());
            attrs.push("penwidth=3".to_string());
            attrs.push(format!("label=\"{}\"", steps.join(",")));
        }
        let motif = motif_edges.is_some_and(|m| edges.iter().any(|e| m.contains(e)));
        attrs.push(format!("color=\"{}\"", if motif { "#d62728" } else { "#555555" }));
        writeln!(out, "  {u} -- {v} [{}];", attrs.join(", ")).unwrap();
    }
    writeln!(out, "}}").unwrap();
    Ok(out)
}
