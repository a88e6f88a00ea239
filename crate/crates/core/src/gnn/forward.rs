use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::{Architecture, ModelWeights};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Sparse row operator: `out[i] = Σ w · x[j]` over `rows[i] = [(j, w), ..]`.
#[derive(Debug, Clone)]
pub(crate) struct Propagation {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Propagation {
    /// Symmetric-normalised adjacency with self-loops. Messages flow along
    /// edge direction; degrees count incoming edges plus the self-loop.
    pub fn gcn(graph: &Graph) -> Self {
        let n = graph.num_nodes();
        let mut deg = vec![1.0f64; n];
        for &(_, d) in graph.edges() {
            deg[d] += 1.0;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0 / deg[i])]).collect();
        for &(s, d) in graph.edges() {
            rows[d].push((s, 1.0 / (deg[s] * deg[d]).sqrt()));
        }
        Self { rows }
    }

    /// Plain sum over incoming neighbours (no self term).
    pub fn neighbor_sum(graph: &Graph) -> Self {
        let mut rows = vec![Vec::new(); graph.num_nodes()];
        for &(s, d) in graph.edges() {
            rows[d].push((s, 1.0));
        }
        Self { rows }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = out.row_mut(i);
            for &(j, w) in row {
                acc.scaled_add(w, &x.row(j));
            }
        }
        out
    }

    /// Apply the transpose: `out[j] += w · y[i]`.
    pub fn apply_transpose(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), y.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out.row_mut(j).scaled_add(w, &y.row(i));
            }
        }
        out
    }
}

pub(crate) fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

pub(crate) fn add_bias(mut x: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x += &b.view().insert_axis(Axis(0));
    x
}

pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

fn softmax(logits: Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e /= sum;
    e
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Activations {
    /// Pre-activation of the first (outer) hidden representation.
    pub hidden_pre: Array2<f64>,
    /// Hidden representation after ReLU and dropout.
    pub hidden: Array2<f64>,
    /// GIN only: first-layer aggregate and inner MLP pre-activations.
    pub agg0: Option<Array2<f64>>,
    pub inner0_pre: Option<Array2<f64>>,
    pub agg1: Option<Array2<f64>>,
    pub inner1_pre: Option<Array2<f64>>,
    pub logits: Array2<f64>,
}

pub(crate) struct Operators {
    pub gcn: Option<Propagation>,
    pub neighbors: Option<Propagation>,
}

impl Operators {
    pub fn for_model(weights: &ModelWeights, graph: &Graph) -> Self {
        match weights.architecture {
            Architecture::Gcn => Self {
                gcn: Some(Propagation::gcn(graph)),
                neighbors: None,
            },
            Architecture::Gin => Self {
                gcn: None,
                neighbors: Some(Propagation::neighbor_sum(graph)),
            },
        }
    }
}

/// Forward pass returning logits and cached intermediates. `dropout` is a
/// pre-scaled mask applied to the hidden representation.
pub(crate) fn forward_with_cache(
    weights: &ModelWeights,
    x: &Array2<f64>,
    ops: &Operators,
    dropout: Option<&Array2<f64>>,
) -> Activations {
    let l = &weights.layers;
    match weights.architecture {
        Architecture::Gcn => {
            let a = ops.gcn.as_ref().expect("gcn operator");
            let hidden_pre = add_bias(a.apply(&x.dot(&l[0].weight)), &l[0].bias);
            let mut hidden = relu(&hidden_pre);
            if let Some(mask) = dropout {
                hidden *= mask;
            }
            let logits = add_bias(a.apply(&hidden.dot(&l[1].weight)), &l[1].bias);
            Activations {
                hidden_pre,
                hidden,
                agg0: None,
                inner0_pre: None,
                agg1: None,
                inner1_pre: None,
                logits,
            }
        }
        Architecture::Gin => {
            let s = ops.neighbors.as_ref().expect("neighbour operator");
            let eps = &weights.gin_epsilon;
            let agg0 = x * (1.0 + eps[0]) + s.apply(x);
            let inner0_pre = add_bias(agg0.dot(&l[0].weight), &l[0].bias);
            let hidden_pre = add_bias(relu(&inner0_pre).dot(&l[1].weight), &l[1].bias);
            let mut hidden = relu(&hidden_pre);
            if let Some(mask) = dropout {
                hidden *= mask;
            }
            let agg1 = &hidden * (1.0 + eps[1]) + s.apply(&hidden);
            let inner1_pre = add_bias(agg1.dot(&l[2].weight), &l[2].bias);
            let logits = add_bias(relu(&inner1_pre).dot(&l[3].weight), &l[3].bias);
            Activations {
                hidden_pre,
                hidden,
                agg0: Some(agg0),
                inner0_pre: Some(inner0_pre),
                agg1: Some(agg1),
                inner1_pre: Some(inner1_pre),
                logits,
            }
        }
    }
}

/// Per-node class probabilities (no dropout).
pub fn forward(weights: &ModelWeights, graph: &Graph) -> Result<Array2<f64>> {
    weights.check_graph(graph)?;
    let ops = Operators::for_model(weights, graph);
    let act = forward_with_cache(weights, graph.features(), &ops, None);
    Ok(softmax_rows(&act.logits))
}

fn require(weights: &ModelWeights, arch: Architecture) -> Result<()> {
    if weights.architecture != arch {
        return Err(Error::input(format!(
            "expected {arch} weights, got {}",
            weights.architecture
        )));
    }
    Ok(())
}

/// `softmax(Â · ReLU(Â · X · W0 + b0) · W1 + b1)` row-wise.
pub fn gcn_forward(weights: &ModelWeights, graph: &Graph) -> Result<Array2<f64>> {
    require(weights, Architecture::Gcn)?;
    forward(weights, graph)
}

/// Two GIN layers, `h' = MLP((1 + ε) h + Σ_in h_u)`, ReLU in between.
pub fn gin_forward(weights: &ModelWeights, graph: &Graph) -> Result<Array2<f64>> {
    require(weights, Architecture::Gin)?;
    forward(weights, graph)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Array1<f64>,
}

fn argmax(p: ArrayView1<'_, f64>) -> usize {
    // strict comparison keeps the lowest index on ties
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn predict(weights: &ModelWeights, graph: &Graph, node: NodeId) -> Result<Prediction> {
    if node >= graph.num_nodes() {
        return Err(Error::input(format!("node {node} out of range")));
    }
    let probs = forward(weights, graph)?;
    let row = probs.row(node).to_owned();
    Ok(Prediction {
        class: argmax(row.view()),
        probabilities: row,
    })
}

/// Evaluates the model at one node of a fixed node set for arbitrary edge
/// subsets, touching only the target's two-hop in-neighbourhood.
///
/// `external_in` counts, per node, incoming edges that lie outside the
/// toggled edge set and are always present. GCN normalisation reads them
/// through the degrees of boundary nodes.
pub(crate) struct TargetEvaluator<'m> {
    weights: &'m ModelWeights,
    /// Node features projected by the first linear map.
    projected: Array2<f64>,
    external_in: Vec<usize>,
    target: usize,
}

impl<'m> TargetEvaluator<'m> {
    pub fn new(
        weights: &'m ModelWeights,
        features: ArrayView2<'_, f64>,
        external_in: Vec<usize>,
        target: usize,
    ) -> Self {
        debug_assert_eq!(external_in.len(), features.nrows());
        Self {
            weights,
            projected: features.dot(&weights.layers[0].weight),
            external_in,
            target,
        }
    }

    /// Class probabilities at the target for local directed `edges`.
    pub fn probabilities(&self, edges: &[(usize, usize)]) -> Array1<f64> {
        let n = self.projected.nrows();
        let mut offsets = vec![0usize; n + 1];
        for &(_, d) in edges {
            offsets[d + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut sources = vec![0usize; edges.len()];
        for &(s, d) in edges {
            sources[fill[d]] = s;
            fill[d] += 1;
        }
        let incoming = |i: usize| &sources[offsets[i]..offsets[i + 1]];
        let l = &self.weights.layers;
        let t = self.target;
        let logits = match self.weights.architecture {
            Architecture::Gcn => {
                let deg = |i: usize| (offsets[i + 1] - offsets[i] + self.external_in[i] + 1) as f64;
                let hidden = |j: usize| {
                    let dj = deg(j);
                    let mut acc = &self.projected.row(j) / dj;
                    for &k in incoming(j) {
                        acc.scaled_add(1.0 / (dj * deg(k)).sqrt(), &self.projected.row(k));
                    }
                    acc += &l[0].bias;
                    acc.mapv_inplace(|v| v.max(0.0));
                    acc
                };
                let dt = deg(t);
                let mut agg = hidden(t) / dt;
                for &j in incoming(t) {
                    agg.scaled_add(1.0 / (dt * deg(j)).sqrt(), &hidden(j));
                }
                agg.dot(&l[1].weight) + &l[1].bias
            }
            Architecture::Gin => {
                let eps = &self.weights.gin_epsilon;
                let hidden = |j: usize| {
                    let mut acc = &self.projected.row(j) * (1.0 + eps[0]);
                    for &k in incoming(j) {
                        acc += &self.projected.row(k);
                    }
                    acc += &l[0].bias;
                    acc.mapv_inplace(|v| v.max(0.0));
                    let mut h = acc.dot(&l[1].weight) + &l[1].bias;
                    h.mapv_inplace(|v| v.max(0.0));
                    h
                };
                let mut agg = hidden(t) * (1.0 + eps[1]);
                for &j in incoming(t) {
                    agg += &hidden(j);
                }
                let mut inner = agg.dot(&l[2].weight) + &l[2].bias;
                inner.mapv_inplace(|v| v.max(0.0));
                inner.dot(&l[3].weight) + &l[3].bias
            }
        };
        softmax(logits)
    }
}

/// Elementwise `dy ⊙ [x > 0]`.
pub(crate) fn relu_backward(dy: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut out = dy.clone();
    Zip::from(&mut out).and(pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}
