//! Wall-clock comparison of sampled and exhaustive explanation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::{explain, ExplainerConfig, SearchMode};
use crate::gnn::ModelWeights;
use crate::graph::{l_hop_subgraph, Graph, NodeId};
use crate::shapley::EXACT_SHAPLEY_MAX_PLAYERS;

pub const REFUSAL: &str = "out of memory/feasibility";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTarget {
    pub target: NodeId,
    pub universe: usize,
    pub sampled_seconds: f64,
    /// `None` when the exhaustive run was refused.
    pub exhaustive_seconds: Option<f64>,
    pub exhaustive_status: String,
    /// Both modes picked the same edges in the same order.
    pub same_selection: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub targets: Vec<BenchTarget>,
    pub sampled_seconds: f64,
    /// Totals over the targets where both modes ran.
    pub paired_sampled_seconds: f64,
    pub paired_exhaustive_seconds: f64,
    /// Exhaustive over sampled time on the paired targets.
    pub speedup: Option<f64>,
    pub refused: usize,
}

/// Explain each target in both modes, one after the other. Exhaustive runs
/// over the enumeration guard are refused and recorded; the bench goes on.
pub fn run_bench(
    weights: &ModelWeights,
    graph: &Graph,
    targets: &[NodeId],
    config: &ExplainerConfig,
) -> Result<BenchReport> {
    config.validate()?;
    let sampled_cfg = ExplainerConfig {
        mode: SearchMode::Sampled,
        ..config.clone()
    };
    let exhaustive_cfg = ExplainerConfig {
        mode: SearchMode::Exhaustive,
        ..config.clone()
    };
    let mut rows = Vec::with_capacity(targets.len());
    for &target in targets {
        let universe = l_hop_subgraph(graph, target, config.hops)?.edges().len();
        let start = Instant::now();
        let sampled = explain(weights, graph, target, &sampled_cfg)?;
        let sampled_seconds = start.elapsed().as_secs_f64();

        let (exhaustive_seconds, exhaustive_status, same_selection) = if universe > EXACT_SHAPLEY_MAX_PLAYERS {
            (None, REFUSAL.to_string(), None)
        } else {
            let start = Instant::now();
            match explain(weights, graph, target, &exhaustive_cfg) {
                Ok(x) => (
                    Some(start.elapsed().as_secs_f64()),
                    "ok".to_string(),
                    Some(x.selected == sampled.selected),
                ),
                Err(Error::Capacity(_)) => (None, REFUSAL.to_string(), None),
                Err(e) => return Err(e),
            }
        };
        rows.push(BenchTarget {
            target,
            universe,
            sampled_seconds,
            exhaustive_seconds,
            exhaustive_status,
            same_selection,
        });
    }
    let paired = rows.iter().filter(|r| r.exhaustive_seconds.is_some());
    let paired_sampled_seconds: f64 = paired.clone().map(|r| r.sampled_seconds).sum();
    let paired_exhaustive_seconds: f64 = paired.clone().filter_map(|r| r.exhaustive_seconds).sum();
    let any_paired = paired.count() > 0;
    Ok(BenchReport {
        sampled_seconds: rows.iter().map(|r| r.sampled_seconds).sum(),
        paired_sampled_seconds,
        paired_exhaustive_seconds,
        speedup: (any_paired && paired_sampled_seconds > 0.0)
            .then(|| paired_exhaustive_seconds / paired_sampled_seconds),
        refused: rows.iter().filter(|r| r.exhaustive_seconds.is_none()).count(),
        targets: rows,
    })
}
