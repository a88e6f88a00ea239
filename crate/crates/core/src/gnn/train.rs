use ndarray::{Array2, Axis};
use rand::Rng;

use super::forward::{forward_with_cache, relu, relu_backward, softmax_rows, Activations, Operators};
use super::{Architecture, Dims, Linear, ModelWeights, DEFAULT_HIDDEN};
use crate::datasets::LabeledGraph;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 800,
            learning_rate: 0.01,
            dropout: 0.5,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::input("epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("dropout must lie in [0, 1)"));
        }
        if self.hidden == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::input("hidden width and learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: ModelWeights,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Training loss at every epoch, measured with that epoch's dropout mask.
    pub losses: Vec<f64>,
}

/// Computed from logits via log-sum-exp so confident wrong predictions stay finite.
fn cross_entropy(logits: &Array2<f64>, labels: &[usize], nodes: &[NodeId]) -> f64 {
    let total: f64 = nodes
        .iter()
        .map(|&n| {
            let row = logits.row(n);
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            lse - row[labels[n]]
        })
        .sum();
    total / nodes.len() as f64
}

/// Mean cross-entropy over `nodes` (no dropout).
pub fn loss(weights: &ModelWeights, graph: &Graph, labels: &[usize], nodes: &[NodeId]) -> Result<f64> {
    weights.check_graph(graph)?;
    let ops = Operators::for_model(weights, graph);
    let act = forward_with_cache(weights, graph.features(), &ops, None);
    Ok(cross_entropy(&act.logits, labels, nodes))
}

fn backward(
    weights: &ModelWeights,
    x: &Array2<f64>,
    ops: &Operators,
    act: &Activations,
    dropout: Option<&Array2<f64>>,
    dlogits: &Array2<f64>,
) -> ModelWeights {
    let l = &weights.layers;
    let sum_rows = |m: &Array2<f64>| m.sum_axis(Axis(0));
    let mask = |mut g: Array2<f64>| {
        if let Some(m) = dropout {
            g *= m;
        }
        g
    };
    let mut grads = ModelWeights::zeros(weights.architecture, weights.dims);
    match weights.architecture {
        Architecture::Gcn => {
            let a = ops.gcn.as_ref().expect("gcn operator");
            let dz1 = a.apply_transpose(dlogits);
            grads.layers[1] = Linear {
                weight: act.hidden.t().dot(&dz1),
                bias: sum_rows(dlogits),
            };
            let dhidden = mask(dz1.dot(&l[1].weight.t()));
            let dpre = relu_backward(&dhidden, &act.hidden_pre);
            let dz0 = a.apply_transpose(&dpre);
            grads.layers[0] = Linear {
                weight: x.t().dot(&dz0),
                bias: sum_rows(&dpre),
            };
        }
        Architecture::Gin => {
            let s = ops.neighbors.as_ref().expect("neighbour operator");
            let eps = &weights.gin_epsilon;
            let inner1_pre = act.inner1_pre.as_ref().expect("gin cache");
            let agg1 = act.agg1.as_ref().expect("gin cache");
            let inner0_pre = act.inner0_pre.as_ref().expect("gin cache");
            let agg0 = act.agg0.as_ref().expect("gin cache");

            grads.layers[3] = Linear {
                weight: relu(inner1_pre).t().dot(dlogits),
                bias: sum_rows(dlogits),
            };
            let dinner1 = relu_backward(&dlogits.dot(&l[3].weight.t()), inner1_pre);
            grads.layers[2] = Linear {
                weight: agg1.t().dot(&dinner1),
                bias: sum_rows(&dinner1),
            };
            let dagg1 = dinner1.dot(&l[2].weight.t());
            grads.gin_epsilon[1] = (&dagg1 * &act.hidden).sum();
            let dhidden = &dagg1 * (1.0 + eps[1]) + s.apply_transpose(&dagg1);
            let dhidden_pre = relu_backward(&mask(dhidden), &act.hidden_pre);
            grads.layers[1] = Linear {
                weight: relu(inner0_pre).t().dot(&dhidden_pre),
                bias: sum_rows(&dhidden_pre),
            };
            let dinner0 = relu_backward(&dhidden_pre.dot(&l[1].weight.t()), inner0_pre);
            grads.layers[0] = Linear {
                weight: agg0.t().dot(&dinner0),
                bias: sum_rows(&dinner0),
            };
            let dagg0 = dinner0.dot(&l[0].weight.t());
            grads.gin_epsilon[0] = (&dagg0 * x).sum();
        }
    }
    grads
}

/// Mean cross-entropy over `nodes` and its gradient with respect to every
/// parameter. `dropout` is a pre-scaled mask on the hidden representation.
pub fn gradients(
    weights: &ModelWeights,
    graph: &Graph,
    labels: &[usize],
    nodes: &[NodeId],
    dropout: Option<&Array2<f64>>,
) -> Result<(f64, ModelWeights)> {
    weights.check_graph(graph)?;
    let ops = Operators::for_model(weights, graph);
    Ok(loss_and_grads(weights, graph, &ops, labels, nodes, dropout))
}

fn loss_and_grads(
    weights: &ModelWeights,
    graph: &Graph,
    ops: &Operators,
    labels: &[usize],
    nodes: &[NodeId],
    dropout: Option<&Array2<f64>>,
) -> (f64, ModelWeights) {
    let act = forward_with_cache(weights, graph.features(), ops, dropout);
    let probs = softmax_rows(&act.logits);
    let loss = cross_entropy(&act.logits, labels, nodes);
    let mut dlogits = Array2::zeros(probs.dim());
    let scale = 1.0 / nodes.len() as f64;
    for &n in nodes {
        let mut row = dlogits.row_mut(n);
        row.assign(&probs.row(n));
        row[labels[n]] -= 1.0;
        row *= scale;
    }
    let grads = backward(weights, graph.features(), ops, &act, dropout, &dlogits);
    (loss, grads)
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

fn accuracy(probs: &Array2<f64>, labels: &[usize], nodes: &[NodeId]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = nodes
        .iter()
        .filter(|&&n| {
            let row = probs.row(n);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best == labels[n]
        })
        .count();
    correct as f64 / nodes.len() as f64
}

/// Train and test accuracy of `weights` on `data`.
pub fn accuracy_on(weights: &ModelWeights, data: &LabeledGraph) -> Result<(f64, f64)> {
    let probs = super::forward(weights, &data.graph)?;
    let labels = data.labels();
    Ok((
        accuracy(&probs, labels, &data.train_nodes()),
        accuracy(&probs, labels, &data.test_nodes()),
    ))
}

/// Full-batch Adam on the training nodes' cross-entropy, with dropout on
/// the hidden representation.
pub fn train(arch: Architecture, data: &LabeledGraph, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    let dims = Dims {
        input: data.graph.feature_dim(),
        hidden: config.hidden,
        classes: data.graph.num_classes(),
    };
    train_from(
        ModelWeights::glorot(arch, dims, derive_seed(config.seed, "init", 0)),
        data,
        config,
    )
}

/// Continue training from `weights`; `config.hidden` is ignored in favour
/// of the weights' own width.
pub fn train_from(mut weights: ModelWeights, data: &LabeledGraph, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    weights.validate()?;
    let graph = &data.graph;
    weights.check_graph(graph)?;
    if weights.dims.classes != graph.num_classes() {
        return Err(Error::input(format!(
            "weights predict {} classes but the dataset has {}",
            weights.dims.classes,
            graph.num_classes()
        )));
    }
    let labels = data.labels();
    let train_nodes = data.train_nodes();
    let test_nodes = data.test_nodes();
    if train_nodes.is_empty() {
        return Err(Error::input("dataset has no training nodes"));
    }
    let dims = weights.dims;
    let ops = Operators::for_model(&weights, graph);
    let mut rng = rng_from_seed(derive_seed(config.seed, "dropout", 0));
    let mut adam = Adam::new(weights.num_params(), config.learning_rate);
    let keep = 1.0 - config.dropout;
    let mut params = weights.flat_params();
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mask = (config.dropout > 0.0).then(|| {
            Array2::from_shape_simple_fn((graph.num_nodes(), dims.hidden), || {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
        });
        let (loss, grads) = loss_and_grads(&weights, graph, &ops, labels, &train_nodes, mask.as_ref());
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch: epoch + 1 });
        }
        losses.push(loss);
        adam.update(&mut params, &grads.flat_params());
        weights.set_flat_params(&params);
    }

    let act = forward_with_cache(&weights, graph.features(), &ops, None);
    let probs = softmax_rows(&act.logits);
    Ok(TrainReport {
        train_accuracy: accuracy(&probs, labels, &train_nodes),
        test_accuracy: accuracy(&probs, labels, &test_nodes),
        weights,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_tree_cycle;

    #[test]
    fn config_is_validated() {
        let data = gen_tree_cycle(0);
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(Architecture::Gcn, &data, &bad).is_err());
        let bad = TrainConfig {
            dropout: 1.0,
            ..TrainConfig::default()
        };
        assert!(train(Architecture::Gcn, &data, &bad).is_err());
    }

    #[test]
    fn loss_descends_and_training_is_deterministic() {
        let data = gen_tree_cycle(1);
        for arch in [Architecture::Gcn, Architecture::Gin] {
            let cfg = TrainConfig {
                epochs: 60,
                seed: 5,
                ..TrainConfig::default()
            };
            let a = train(arch, &data, &cfg).unwrap();
            let b = train(arch, &data, &cfg).unwrap();
            assert_eq!(a.weights, b.weights);
            assert!(a.losses.last().unwrap() < a.losses.first().unwrap(), "{arch}");
        }
    }

    #[test]
    fn resuming_checks_dimensions() {
        let data = gen_tree_cycle(3);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let first = train(Architecture::Gcn, &data, &cfg).unwrap();
        let more = train_from(first.weights.clone(), &data, &cfg).unwrap();
        assert_ne!(more.weights, first.weights);
        let wrong = ModelWeights::glorot(
            Architecture::Gcn,
            Dims {
                input: 3,
                hidden: 4,
                classes: 2,
            },
            0,
        );
        assert!(matches!(train_from(wrong, &data, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn one_epoch_runs() {
        let data = gen_tree_cycle(2);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let r = train(Architecture::Gin, &data, &cfg).unwrap();
        assert_eq!(r.losses.len(), 1);
        assert!((0.0..=1.0).contains(&r.test_accuracy));
    }
}
