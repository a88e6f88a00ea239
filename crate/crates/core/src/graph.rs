//! Graph substrate: the directed edge list every player lives in, L-hop
//! receptive fields, edge masking and the greedy frontier.

use std::collections::{BTreeSet, HashMap, VecDeque};

use indexmap::IndexSet;
use ndarray::Array2;

use crate::error::{Error, Result};

pub type NodeId = usize;
/// Index into a graph's canonical edge list.
pub type EdgeId = usize;

/// A node-indexed graph with a canonical, `(src, dst)`-sorted directed edge
/// list. Undirected inputs are stored as two directed edges per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(NodeId, NodeId)>,
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
    incident: Vec<Vec<EdgeId>>,
}

impl Graph {
    /// Build a graph from directed edges. The edge list is sorted into
    /// canonical order; duplicates, self-loops and out-of-range endpoints
    /// are rejected.
    pub fn new(
        num_nodes: usize,
        mut edges: Vec<(NodeId, NodeId)>,
        features: Array2<f64>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(Error::input(format!(
                "feature matrix has {} rows but graph has {num_nodes} nodes",
                features.nrows()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != num_nodes {
                return Err(Error::input(format!("{} labels for {num_nodes} nodes", labels.len())));
            }
            if let Some(&bad) = labels.iter().find(|&&c| c >= num_classes) {
                return Err(Error::input(format!(
                    "label {bad} out of range for {num_classes} classes"
                )));
            }
        }
        for &(s, d) in &edges {
            if s >= num_nodes || d >= num_nodes {
                return Err(Error::input(format!(
                    "edge ({s}, {d}) references a node >= {num_nodes}"
                )));
            }
            if s == d {
                return Err(Error::input(format!("self-loop on node {s}")));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::input(format!("duplicate edge {:?}", w[0])));
        }
        let edge_index = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut incident = vec![Vec::new(); num_nodes];
        for (id, &(s, d)) in edges.iter().enumerate() {
            incident[s].push(id);
            incident[d].push(id);
        }
        for list in &mut incident {
            list.sort_unstable();
        }
        Ok(Self {
            num_nodes,
            edges,
            features,
            labels,
            num_classes,
            edge_index,
            incident,
        })
    }

    /// Build a graph from undirected pairs, storing both directions.
    /// Repeated pairs (in either orientation) collapse to one.
    pub fn from_undirected(
        num_nodes: usize,
        pairs: &[(NodeId, NodeId)],
        features: Array2<f64>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut directed: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for &(a, b) in pairs {
            directed.insert((a, b));
            directed.insert((b, a));
        }
        Self::new(num_nodes, directed.into_iter().collect(), features, labels, num_classes)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> (NodeId, NodeId) {
        self.edges[id]
    }

    pub fn edge_id(&self, src: NodeId, dst: NodeId) -> Option<EdgeId> {
        self.edge_index.get(&(src, dst)).copied()
    }

    /// The reverse of edge `id`, if the graph stores it.
    pub fn reverse_edge(&self, id: EdgeId) -> Option<EdgeId> {
        let (s, d) = self.edges[id];
        self.edge_id(d, s)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Edge ids touching `node` in either direction, ascending.
    pub fn incident_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.incident[node]
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node >= self.num_nodes {
            return Err(Error::input(format!(
                "node {node} out of range for graph with {} nodes",
                self.num_nodes
            )));
        }
        Ok(())
    }
}

/// The L-hop receptive field of a target node: every node within `hops`
/// undirected traversals and every parent edge between them.
#[derive(Debug, Clone)]
pub struct Subgraph<'g> {
    parent: &'g Graph,
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
    target: NodeId,
    hops: usize,
}

impl<'g> Subgraph<'g> {
    pub fn parent(&self) -> &'g Graph {
        self.parent
    }

    /// Member nodes, ascending.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Member edge ids, ascending (canonical order).
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        self.edges.binary_search(&id).is_ok()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// Position of `node` in [`Self::nodes`]; masked graphs use these ids.
    pub fn local_index(&self, node: NodeId) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// Edges of this subgraph incident to `node`, ascending.
    pub fn incident_edges(&self, node: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.parent
            .incident_edges(node)
            .iter()
            .copied()
            .filter(move |&e| self.contains_edge(e))
    }

    /// The induced subgraph itself as a standalone graph.
    pub fn induced_graph(&self) -> Graph {
        self.masked_graph(&self.edges)
    }

    fn masked_graph(&self, edge_ids: &[EdgeId]) -> Graph {
        let local = |n: NodeId| self.local_index(n).expect("edge endpoint inside subgraph");
        let edges = edge_ids
            .iter()
            .map(|&e| {
                let (s, d) = self.parent.edge(e);
                (local(s), local(d))
            })
            .collect();
        let features = self.parent.features.select(ndarray::Axis(0), &self.nodes);
        let labels = self
            .parent
            .labels
            .as_ref()
            .map(|l| self.nodes.iter().map(|&n| l[n]).collect());
        Graph::new(self.nodes.len(), edges, features, labels, self.parent.num_classes)
            .expect("subgraph of a valid graph is valid")
    }
}

/// Extract the `hops`-hop neighbourhood of `target`, following edges in
/// either direction.
pub fn l_hop_subgraph(graph: &Graph, target: NodeId, hops: usize) -> Result<Subgraph<'_>> {
    graph.check_node(target)?;
    if hops == 0 {
        return Err(Error::input("hops must be at least 1"));
    }
    let mut dist = vec![usize::MAX; graph.num_nodes];
    dist[target] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == hops {
            continue;
        }
        for &e in graph.incident_edges(u) {
            let (s, d) = graph.edge(e);
            let v = if s == u { d } else { s };
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let nodes: Vec<NodeId> = (0..graph.num_nodes).filter(|&n| dist[n] != usize::MAX).collect();
    let mut edges: Vec<EdgeId> = nodes
        .iter()
        .flat_map(|&n| graph.incident_edges(n).iter().copied())
        .filter(|&e| {
            let (s, d) = graph.edge(e);
            dist[s] != usize::MAX && dist[d] != usize::MAX
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(Subgraph {
        parent: graph,
        nodes,
        edges,
        target,
        hops,
    })
}

/// An insertion-ordered set of edge ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coalition {
    edges: IndexSet<EdgeId>,
}

impl Coalition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Returns false if the edge was already present.
    pub fn insert(&mut self, edge: EdgeId) -> bool {
        self.edges.insert(edge)
    }

    pub fn contains(&self, edge: EdgeId) -> bool {
        self.edges.contains(&edge)
    }

    /// Edges in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().copied()
    }

    pub fn last(&self) -> Option<EdgeId> {
        self.edges.last().copied()
    }

    /// Sorted edge ids; the memoisation key of a coalition.
    pub fn signature(&self) -> Vec<EdgeId> {
        let mut sig: Vec<EdgeId> = self.edges.iter().copied().collect();
        sig.sort_unstable();
        sig
    }

    pub fn truncated(&self, len: usize) -> Coalition {
        self.edges.iter().copied().take(len).collect()
    }
}

impl FromIterator<EdgeId> for Coalition {
    fn from_iter<I: IntoIterator<Item = EdgeId>>(iter: I) -> Self {
        Self {
            edges: iter.into_iter().collect(),
        }
    }
}

/// Realise a coalition: the subgraph's nodes (relabelled to
/// [`Subgraph::local_index`]) with their features, and exactly the
/// coalition's edges.
pub fn mask_to_coalition(subgraph: &Subgraph<'_>, coalition: &Coalition) -> Result<Graph> {
    if let Some(e) = coalition.iter().find(|&e| !subgraph.contains_edge(e)) {
        return Err(Error::input(format!(
            "edge {e} is not part of the subgraph around node {}",
            subgraph.target
        )));
    }
    Ok(subgraph.masked_graph(&coalition.signature()))
}

/// Candidate edges for the next greedy step.
///
/// With an empty selection this is every subgraph edge incident to the
/// target; otherwise every unselected subgraph edge sharing an endpoint with
/// some selected edge.
pub fn frontier(subgraph: &Subgraph<'_>, selected: &Coalition, target: NodeId) -> BTreeSet<EdgeId> {
    if selected.is_empty() {
        return subgraph.incident_edges(target).collect();
    }
    adjacent_edges(subgraph, selected, selected.iter())
}

/// Unselected subgraph edges sharing an endpoint with any of `anchors`.
pub fn adjacent_edges(
    subgraph: &Subgraph<'_>,
    selected: &Coalition,
    anchors: impl Iterator<Item = EdgeId>,
) -> BTreeSet<EdgeId> {
    let graph = subgraph.parent;
    let mut endpoints = BTreeSet::new();
    for e in anchors {
        let (s, d) = graph.edge(e);
        endpoints.insert(s);
        endpoints.insert(d);
    }
    endpoints
        .into_iter()
        .flat_map(|n| subgraph.incident_edges(n))
        .filter(|&e| !selected.contains(e))
        .collect()
}
