//! The black-box model: two-layer GCN and GIN node classifiers with a
//! hand-written full-batch trainer.

mod forward;
mod io;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;

pub(crate) use forward::TargetEvaluator;
pub use forward::{forward, gcn_forward, gin_forward, predict, Prediction};
pub use io::{load_weights, read_weights, save_weights, write_weights};
pub use train::{accuracy_on, gradients, loss, train, train_from, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Gcn,
    Gin,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Gin => "gin",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Architecture::Gcn),
            "gin" => Ok(Architecture::Gin),
            _ => Err(Error::input(format!(
                "unknown architecture '{s}' (expected gcn or gin)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

/// Hidden width used when none is given.
pub const DEFAULT_HIDDEN: usize = 20;

/// A dense layer computing `x · weight + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit));
        Self {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weight.dim()
    }
}

/// Trained parameters.
///
/// GCN: `layers = [conv0, conv1]`. GIN: `layers = [mlp0.0, mlp0.1, mlp1.0,
/// mlp1.1]` (each GIN layer's MLP is Linear, ReLU, Linear) with one
/// trainable epsilon per GIN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub architecture: Architecture,
    pub dims: Dims,
    pub layers: Vec<Linear>,
    pub gin_epsilon: Vec<f64>,
}

impl ModelWeights {
    /// Layer shapes implied by the architecture and dimensions.
    pub fn layer_shapes(architecture: Architecture, dims: Dims) -> Vec<(usize, usize)> {
        let Dims { input, hidden, classes } = dims;
        match architecture {
            Architecture::Gcn => vec![(input, hidden), (hidden, classes)],
            Architecture::Gin => vec![(input, hidden), (hidden, hidden), (hidden, hidden), (hidden, classes)],
        }
    }

    fn epsilon_count(architecture: Architecture) -> usize {
        match architecture {
            Architecture::Gcn => 0,
            Architecture::Gin => 2,
        }
    }

    pub fn zeros(architecture: Architecture, dims: Dims) -> Self {
        Self {
            architecture,
            dims,
            layers: Self::layer_shapes(architecture, dims)
                .into_iter()
                .map(|(i, o)| Linear::zeros(i, o))
                .collect(),
            gin_epsilon: vec![0.0; Self::epsilon_count(architecture)],
        }
    }

    /// Glorot-uniform weights, zero biases, epsilon 0.
    pub fn glorot(architecture: Architecture, dims: Dims, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self {
            architecture,
            dims,
            layers: Self::layer_shapes(architecture, dims)
                .into_iter()
                .map(|(i, o)| Linear::glorot(i, o, &mut rng))
                .collect(),
            gin_epsilon: vec![0.0; Self::epsilon_count(architecture)],
        }
    }

    /// Check shape chaining and finiteness.
    pub fn validate(&self) -> Result<()> {
        let shapes = Self::layer_shapes(self.architecture, self.dims);
        if shapes.len() != self.layers.len() {
            return Err(Error::input(format!(
                "{} expects {} layers, found {}",
                self.architecture,
                shapes.len(),
                self.layers.len()
            )));
        }
        for (i, (layer, &want)) in self.layers.iter().zip(&shapes).enumerate() {
            if layer.shape() != want || layer.bias.len() != want.1 {
                return Err(Error::input(format!(
                    "layer {i} has shape {:?} (bias {}), expected {want:?}",
                    layer.shape(),
                    layer.bias.len()
                )));
            }
        }
        if self.gin_epsilon.len() != Self::epsilon_count(self.architecture) {
            return Err(Error::input("wrong number of epsilon values"));
        }
        if self.flat_params().iter().any(|x| !x.is_finite()) {
            return Err(Error::input("weights contain non-finite values"));
        }
        Ok(())
    }

    /// Input error unless the graph's feature width matches the model.
    pub fn check_graph(&self, graph: &Graph) -> Result<()> {
        if graph.feature_dim() != self.dims.input {
            return Err(Error::input(format!(
                "graph has {}-dimensional features but the model expects {}",
                graph.feature_dim(),
                self.dims.input
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>() + self.gin_epsilon.len()
    }

    /// All parameters in a fixed order: per layer weight (row-major) then
    /// bias, then the epsilons.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out.extend(&self.gin_epsilon);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        self.gin_epsilon.iter_mut().for_each(|e| *e = it.next().unwrap());
    }
}
