//! Fidelity, sparsity and motif recovery of explanations.
//!
//! Every quantity is measured on the explanation's L-hop subgraph: fidelity
//! is the drop in the explained class probability when the explanation's
//! edges are deleted, sparsity the fraction of L-hop edges left out.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::LabeledGraph;
use crate::error::{Error, Result};
use crate::explainer::{explanation_subgraph, Explanation, Method};
use crate::gnn::ModelWeights;
use crate::graph::{EdgeId, Graph};
use crate::seed::rng_from_seed;
use crate::shapley::{Game, GameOracle};

fn check_target(graph: &Graph, explanation: &Explanation) -> Result<()> {
    if explanation.target >= graph.num_nodes() {
        return Err(Error::input(format!(
            "explanation target {} is outside a graph of {} nodes",
            explanation.target,
            graph.num_nodes()
        )));
    }
    Ok(())
}

/// `f(G)_y − f(G \ removed)_y` for one explanation.
pub fn fidelity_of(weights: &ModelWeights, graph: &Graph, explanation: &Explanation) -> Result<f64> {
    check_target(graph, explanation)?;
    if explanation.predicted_class >= weights.dims.classes {
        return Err(Error::input(format!(
            "explanation of node {} refers to class {} but the model has {} classes",
            explanation.target, explanation.predicted_class, weights.dims.classes
        )));
    }
    let sub = explanation_subgraph(graph, explanation)?;
    if let Some(e) = explanation.selected.iter().find(|&e| !sub.contains_edge(e)) {
        return Err(Error::input(format!(
            "edge {e} of the explanation for node {} lies outside its {}-hop subgraph",
            explanation.target, explanation.hops
        )));
    }
    let full = sub.edges().to_vec();
    let kept: Vec<EdgeId> = full
        .iter()
        .copied()
        .filter(|&e| !explanation.selected.contains(e))
        .collect();
    let oracle = GameOracle::new(weights, sub, explanation.predicted_class)?;
    Ok(oracle.value(&full) - oracle.value(&kept))
}

/// Mean fidelity; 0 for an empty list.
pub fn fidelity(weights: &ModelWeights, graph: &Graph, explanations: &[Explanation]) -> Result<f64> {
    let per: Vec<f64> = explanations
        .iter()
        .map(|x| fidelity_of(weights, graph, x))
        .collect::<Result<_>>()?;
    Ok(mean_or_zero(&per))
}

/// `1 − |selected| / |L-hop edges|` for one explanation (1 when the
/// subgraph has no edges).
pub fn sparsity_of(graph: &Graph, explanation: &Explanation) -> Result<f64> {
    check_target(graph, explanation)?;
    let total = explanation_subgraph(graph, explanation)?.edges().len();
    Ok(if total == 0 {
        1.0
    } else {
        1.0 - explanation.selected.len() as f64 / total as f64
    })
}

/// Mean sparsity; 1 for an empty list.
pub fn sparsity(graph: &Graph, explanations: &[Explanation]) -> Result<f64> {
    if explanations.is_empty() {
        return Ok(1.0);
    }
    let per: Vec<f64> = explanations
        .iter()
        .map(|x| sparsity_of(graph, x))
        .collect::<Result<_>>()?;
    Ok(mean_or_zero(&per))
}

fn mean_or_zero(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotifRecovery {
    pub precision: f64,
    pub recall: f64,
    /// Empty selection (precision reported as 0) or no motif edge in the
    /// subgraph (recall reported as 0).
    pub degenerate: bool,
}

pub fn motif_recovery(explanation: &Explanation, data: &LabeledGraph) -> Result<MotifRecovery> {
    check_target(&data.graph, explanation)?;
    let sub = explanation_subgraph(&data.graph, explanation)?;
    let hits = explanation
        .selected
        .iter()
        .filter(|e| data.motif_edges.contains(e))
        .count();
    let reachable = sub.edges().iter().filter(|e| data.motif_edges.contains(e)).count();
    let n = explanation.selected.len();
    Ok(MotifRecovery {
        precision: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        recall: if reachable == 0 {
            0.0
        } else {
            hits as f64 / reachable as f64
        },
        degenerate: n == 0 || reachable == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub level: f64,
    pub fidelity: f64,
    pub achieved_sparsity: f64,
    /// Targets whose explanation was shorter than the level's budget and
    /// was used whole.
    pub unreachable: usize,
}

/// Edge budget that keeps `1 − budget/total ≥ level` as tightly as
/// possible.
pub fn budget_for_level(level: f64, total: usize) -> usize {
    let b = ((1.0 - level) * total as f64 + 1e-9).floor();
    (b.max(0.0) as usize).min(total)
}

/// Fidelity when each ordered explanation is cut to the budget of every
/// sparsity level. Explanations should carry their full ordering (the
/// greedy trace, or a complete baseline ranking).
pub fn fidelity_at_sparsity(
    weights: &ModelWeights,
    graph: &Graph,
    explanations: &[Explanation],
    levels: &[f64],
) -> Result<Vec<CurvePoint>> {
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::input(format!("sparsity level {l} is outside [0, 1]")));
    }
    let totals: Vec<usize> = explanations
        .iter()
        .map(|x| Ok(explanation_subgraph(graph, x)?.edges().len()))
        .collect::<Result<_>>()?;
    levels
        .iter()
        .map(|&level| {
            let mut cut = Vec::with_capacity(explanations.len());
            let mut unreachable = 0;
            for (x, &total) in explanations.iter().zip(&totals) {
                let budget = budget_for_level(level, total);
                // trace steps can hold an edge pair; count directed edges
                let mut players = 0;
                let mut edges = 0;
                for step in &x.trace {
                    let size = 1 + usize::from(step.paired.is_some());
                    if edges + size > budget {
                        break;
                    }
                    edges += size;
                    players += 1;
                }
                if players == x.trace.len() && edges < budget {
                    unreachable += 1;
                }
                cut.push(x.truncated(players));
            }
            Ok(CurvePoint {
                level,
                fidelity: fidelity(weights, graph, &cut)?,
                achieved_sparsity: sparsity(graph, &cut)?,
                unreachable,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: usize,
    pub predicted_class: usize,
    pub fidelity: f64,
    pub sparsity: f64,
    pub size: usize,
    pub motif: Option<MotifRecovery>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Bootstrap standard deviation of the mean.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub targets: Vec<TargetRecord>,
    pub fidelity: Summary,
    pub sparsity: Summary,
    pub size: Summary,
    pub motif_precision: Option<Summary>,
    pub motif_recall: Option<Summary>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<MethodReport>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub bootstrap_rounds: usize,
}

pub const BOOTSTRAP_ROUNDS: usize = 1000;

/// Mean and bootstrap standard deviation of the mean.
pub fn bootstrap(values: &[f64], rounds: usize, seed: u64) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = rng_from_seed(seed);
    let means: Vec<f64> = (0..rounds)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mm = means.iter().sum::<f64>() / rounds.max(1) as f64;
    let var = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / rounds.saturating_sub(1).max(1) as f64;
    Summary { mean, std: var.sqrt() }
}

/// Evaluate one method's explanations. `data` adds motif recovery when the
/// dataset carries motif annotations.
pub fn evaluate_method(
    weights: &ModelWeights,
    data: &LabeledGraph,
    explanations: &[Explanation],
    levels: &[f64],
    seed: u64,
) -> Result<MethodReport> {
    let method = explanations.first().map_or(Method::Graphgi, |x| x.method);
    if explanations.iter().any(|x| x.method != method) {
        return Err(Error::input(
            "explanations of different methods cannot share a report row",
        ));
    }
    let graph = &data.graph;
    let with_motifs = !data.motif_edges.is_empty();
    let targets: Vec<TargetRecord> = explanations
        .iter()
        .map(|x| {
            Ok(TargetRecord {
                target: x.target,
                predicted_class: x.predicted_class,
                fidelity: fidelity_of(weights, graph, x)?,
                sparsity: sparsity_of(graph, x)?,
                size: x.selected.len(),
                motif: if with_motifs {
                    Some(motif_recovery(x, data)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<_>>()?;
    let col = |f: &dyn Fn(&TargetRecord) -> f64, label: &str| {
        let v: Vec<f64> = targets.iter().map(f).collect();
        bootstrap(&v, BOOTSTRAP_ROUNDS, crate::seed::derive_seed(seed, label, 0))
    };
    let motif_targets: Vec<&TargetRecord> = targets
        .iter()
        .filter(|t| data.motif_nodes.contains(&t.target))
        .collect();
    let motif_col = |f: &dyn Fn(&MotifRecovery) -> f64, label: &str| {
        (with_motifs && !motif_targets.is_empty()).then(|| {
            let v: Vec<f64> = motif_targets
                .iter()
                .map(|t| f(t.motif.as_ref().expect("motif")))
                .collect();
            bootstrap(&v, BOOTSTRAP_ROUNDS, crate::seed::derive_seed(seed, label, 0))
        })
    };
    Ok(MethodReport {
        method,
        fidelity: col(&|t| t.fidelity, "fidelity"),
        sparsity: col(&|t| t.sparsity, "sparsity"),
        size: col(&|t| t.size as f64, "size"),
        motif_precision: motif_col(&|m| m.precision, "precision"),
        motif_recall: motif_col(&|m| m.recall, "recall"),
        curve: fidelity_at_sparsity(weights, graph, explanations, levels)?,
        targets,
    })
}

/// Group explanations by method, preserving first-seen method order.
pub fn group_by_method(explanations: Vec<Explanation>) -> Vec<Vec<Explanation>> {
    let mut order: Vec<Method> = Vec::new();
    let mut groups: Vec<Vec<Explanation>> = Vec::new();
    for x in explanations {
        match order.iter().position(|&m| m == x.method) {
            Some(i) => groups[i].push(x),
            None => {
                order.push(x.method);
                groups.push(vec![x]);
            }
        }
    }
    groups
}

/// Motif edges inside the explanation's subgraph.
pub fn reachable_motif_edges(data: &LabeledGraph, explanation: &Explanation) -> Result<BTreeSet<EdgeId>> {
    let sub = explanation_subgraph(&data.graph, explanation)?;
    Ok(sub
        .edges()
        .iter()
        .copied()
        .filter(|e| data.motif_edges.contains(e))
        .collect())
}
