//! Benchmark graphs with planted, ground-truth motifs, and plain-text
//! ingestion for external node-classification data.

mod io;
mod synthetic;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

pub use io::{load_dir, load_generic, load_motifs, save_generic, GenericFiles};
pub use synthetic::{gen_ba_community, gen_ba_shapes, gen_tree_cycle, gen_tree_grid};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A graph with per-node train/test flags and (for synthetic data) the
/// planted motif edges that define the ground truth.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub motif_edges: BTreeSet<EdgeId>,
    pub motif_nodes: BTreeSet<NodeId>,
    pub split: Vec<Split>,
}

impl LabeledGraph {
    pub fn new(graph: Graph, motif_edges: BTreeSet<EdgeId>, split: Vec<Split>) -> Result<Self> {
        if split.len() != graph.num_nodes() {
            return Err(Error::input(format!(
                "{} split flags for {} nodes",
                split.len(),
                graph.num_nodes()
            )));
        }
        if graph.labels().is_none() {
            return Err(Error::input("labeled graph requires node labels"));
        }
        if let Some(&e) = motif_edges.iter().find(|&&e| e >= graph.num_edges()) {
            return Err(Error::input(format!("motif edge {e} out of range")));
        }
        let motif_nodes = motif_edges
            .iter()
            .flat_map(|&e| {
                let (s, d) = graph.edge(e);
                [s, d]
            })
            .collect();
        Ok(Self {
            graph,
            motif_edges,
            motif_nodes,
            split,
        })
    }

    pub fn labels(&self) -> &[usize] {
        self.graph.labels().expect("checked at construction")
    }

    pub fn train_nodes(&self) -> Vec<NodeId> {
        self.nodes_in(Split::Train)
    }

    /// Test nodes in ascending id order.
    pub fn test_nodes(&self) -> Vec<NodeId> {
        self.nodes_in(Split::Test)
    }

    fn nodes_in(&self, which: Split) -> Vec<NodeId> {
        (0..self.split.len()).filter(|&n| self.split[n] == which).collect()
    }
}

/// Seeded 80/20 train/test split, stratified by class.
pub fn stratified_split(labels: &[usize], num_classes: usize, seed: u64) -> Vec<Split> {
    let mut rng = rng_from_seed(seed);
    let mut split = vec![Split::Train; labels.len()];
    for class in 0..num_classes {
        let mut members: Vec<NodeId> = (0..labels.len()).filter(|&n| labels[n] == class).collect();
        members.shuffle(&mut rng);
        let n_train = (members.len() * 4 + 2) / 5;
        for &n in &members[n_train..] {
            split[n] = Split::Test;
        }
    }
    split
}

/// The synthetic generators by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    BaShapes,
    BaCommunity,
    TreeCycle,
    TreeGrid,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::BaShapes,
        DatasetKind::BaCommunity,
        DatasetKind::TreeCycle,
        DatasetKind::TreeGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::BaShapes => "ba-shapes",
            DatasetKind::BaCommunity => "ba-community",
            DatasetKind::TreeCycle => "tree-cycle",
            DatasetKind::TreeGrid => "tree-grid",
        }
    }

    pub fn generate(self, seed: u64) -> LabeledGraph {
        match self {
            DatasetKind::BaShapes => gen_ba_shapes(seed),
            DatasetKind::BaCommunity => gen_ba_community(seed),
            DatasetKind::TreeCycle => gen_tree_cycle(seed),
            DatasetKind::TreeGrid => gen_tree_grid(seed),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::input(format!(
                "unknown dataset '{s}' (expected one of ba-shapes, ba-community, tree-cycle, tree-grid)"
            ))
        })
    }
}
