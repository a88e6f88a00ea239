//! Python bindings: datasets, models, explanations, evaluation and the
//! game-theoretic primitives over Python callables.

use std::sync::Mutex;

use graphgi_core::datasets::{load_dir, save_generic, DatasetKind, LabeledGraph};
use graphgi_core::dot::explanation_dot;
use graphgi_core::explainer::{
    baseline_random, baseline_topk_shapley, explain_batch, ExplainerConfig, Explanation, FrontierMode, Method,
    SearchMode,
};
use graphgi_core::gnn::{
    accuracy_on, load_weights, predict, save_weights, train, Architecture, ModelWeights, TrainConfig,
};
use graphgi_core::graph::EdgeId;
use graphgi_core::interaction::{self, InteractionEstimate};
use graphgi_core::metrics::{evaluate_method, group_by_method, EvalReport, BOOTSTRAP_ROUNDS};
use graphgi_core::record::{self, ExplanationRecord};
use graphgi_core::shapley::{self, Game, SamplingConfig};
use graphgi_core::Error;
use pyo3::exceptions::{PyIOError, PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Capacity(m) => PyMemoryError::new_err(m),
        e @ (Error::Input(_) | Error::Parse { .. }) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for graphgi_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// A graph with labels, a train/test split and planted motif edges.
#[pyclass(name = "Dataset", module = "graphgi")]
struct PyDataset {
    inner: LabeledGraph,
}

#[pymethods]
impl PyDataset {
    /// Generate one of the synthetic benchmarks by name.
    #[staticmethod]
    #[pyo3(signature = (name, seed = 0))]
    fn generate(name: &str, seed: u64) -> PyResult<Self> {
        let kind: DatasetKind = parse(name)?;
        Ok(Self {
            inner: kind.generate(seed),
        })
    }

    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_dir(dir).py()?,
        })
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        save_generic(&self.inner, dir).py().map(|_| ())
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.graph.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.graph.num_edges()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.graph.num_classes()
    }

    /// Directed edges as `(src, dst)`, indexed by edge id.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph.edges().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner
            .graph
            .features()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    #[getter]
    fn motif_edges(&self) -> Vec<EdgeId> {
        self.inner.motif_edges.iter().copied().collect()
    }

    fn train_nodes(&self) -> Vec<usize> {
        self.inner.train_nodes()
    }

    fn test_nodes(&self) -> Vec<usize> {
        self.inner.test_nodes()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(nodes={}, edges={}, classes={})",
            self.num_nodes(),
            self.num_edges(),
            self.num_classes()
        )
    }
}

/// Trained GCN or GIN weights.
#[pyclass(name = "Model", module = "graphgi")]
struct PyModel {
    inner: ModelWeights,
}

#[pymethods]
impl PyModel {
    /// Train on the dataset's train split.
    #[staticmethod]
    #[pyo3(signature = (data, arch = "gcn", epochs = 800, lr = 0.01, dropout = 0.5, hidden = 20, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        data: PyRef<'_, PyDataset>,
        arch: &str,
        epochs: usize,
        lr: f64,
        dropout: f64,
        hidden: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let arch: Architecture = parse(arch)?;
        let config = TrainConfig {
            epochs,
            learning_rate: lr,
            dropout,
            hidden,
            seed,
        };
        let data = &data.inner;
        let report = py.detach(|| train(arch, data, &config)).py()?;
        Ok(Self { inner: report.weights })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_weights(path).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_weights(&self.inner, path).py()
    }

    #[getter]
    fn architecture(&self) -> &'static str {
        self.inner.architecture.name()
    }

    /// `(train_accuracy, test_accuracy)` on the dataset's split.
    fn accuracy(&self, data: PyRef<'_, PyDataset>) -> PyResult<(f64, f64)> {
        accuracy_on(&self.inner, &data.inner).py()
    }

    /// `(class, probabilities)` for one node on the full graph.
    fn predict(&self, data: PyRef<'_, PyDataset>, node: usize) -> PyResult<(usize, Vec<f64>)> {
        let p = predict(&self.inner, &data.inner.graph, node).py()?;
        Ok((p.class, p.probabilities.to_vec()))
    }
}

/// An ordered edge selection explaining one prediction.
#[pyclass(name = "Explanation", module = "graphgi")]
struct PyExplanation {
    inner: Explanation,
    record: ExplanationRecord,
}

impl PyExplanation {
    fn new(data: &LabeledGraph, inner: Explanation) -> Self {
        let record = ExplanationRecord::new(&data.graph, &inner);
        Self { inner, record }
    }
}

#[pymethods]
impl PyExplanation {
    #[getter]
    fn target(&self) -> usize {
        self.inner.target
    }

    #[getter]
    fn predicted_class(&self) -> usize {
        self.inner.predicted_class
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.as_str()
    }

    /// Selected `(src, dst)` pairs in insertion order.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.record.edges.clone()
    }

    #[getter]
    fn edge_ids(&self) -> Vec<EdgeId> {
        self.inner.selected.iter().collect()
    }

    #[getter]
    fn terminal_reason(&self) -> &'static str {
        self.inner.terminal_reason.as_str()
    }

    /// Per-step scores and strengths.
    #[getter]
    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.record
            .trace
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("edge", s.edge)?;
                d.set_item("edge_id", s.edge_id)?;
                d.set_item("paired", s.paired)?;
                d.set_item("score", s.score)?;
                d.set_item("strength_before", s.strength_before)?;
                d.set_item("strength_after", s.strength_after)?;
                d.set_item("candidates", s.candidates)?;
                d.set_item("frontier_size", s.frontier_size)?;
                Ok(d)
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        record::to_json(&self.record).py()
    }

    #[staticmethod]
    fn from_json(text: &str, data: PyRef<'_, PyDataset>) -> PyResult<Self> {
        let rec: ExplanationRecord = record::from_json(text).py()?;
        let inner = rec.to_explanation(&data.inner.graph).py()?;
        Ok(Self { inner, record: rec })
    }

    /// Graphviz rendering with motif edges highlighted.
    fn to_dot(&self, data: PyRef<'_, PyDataset>) -> PyResult<String> {
        let motifs = &data.inner.motif_edges;
        explanation_dot(&data.inner.graph, &self.inner, (!motifs.is_empty()).then_some(motifs)).py()
    }

    fn __len__(&self) -> usize {
        self.inner.selected.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Explanation(target={}, method={}, edges={}, reason={})",
            self.inner.target,
            self.inner.method.as_str(),
            self.inner.selected.len(),
            self.inner.terminal_reason.as_str()
        )
    }
}

/// Explain each target; the first failing target raises.
#[pyfunction]
#[pyo3(signature = (
    model, data, targets, method = "graphgi", seed = 0, hops = 2, max_edges = 10,
    shapley_samples = 100, interaction_samples = 100, min_gain = 0.0,
    tie_reverse_edges = false, exhaustive = false, budget = None,
))]
#[allow(clippy::too_many_arguments)]
fn explain(
    py: Python<'_>,
    model: PyRef<'_, PyModel>,
    data: PyRef<'_, PyDataset>,
    targets: Vec<usize>,
    method: &str,
    seed: u64,
    hops: usize,
    max_edges: usize,
    shapley_samples: usize,
    interaction_samples: usize,
    min_gain: f64,
    tie_reverse_edges: bool,
    exhaustive: bool,
    budget: Option<usize>,
) -> PyResult<Vec<PyExplanation>> {
    let method: Method = parse(method)?;
    let config = ExplainerConfig {
        hops,
        max_edges,
        sampling: SamplingConfig {
            shapley_samples,
            interaction_samples,
            seed,
        },
        min_gain,
        tie_reverse_edges,
        frontier: FrontierMode::Selection,
        mode: if exhaustive {
            SearchMode::Exhaustive
        } else {
            SearchMode::Sampled
        },
    };
    let (weights, labeled) = (&model.inner, &data.inner);
    let graph = &labeled.graph;
    let budget = budget.unwrap_or(max_edges);
    let results = py.detach(|| match method {
        Method::Graphgi => explain_batch(weights, graph, &targets, &config),
        Method::Random => targets
            .iter()
            .map(|&t| baseline_random(weights, graph, t, &config, budget))
            .collect(),
        Method::TopkShapley => targets
            .iter()
            .map(|&t| baseline_topk_shapley(weights, graph, t, &config, budget))
            .collect(),
    });
    results
        .into_iter()
        .map(|r| r.py().map(|x| PyExplanation::new(labeled, x)))
        .collect()
}

/// Fidelity, sparsity and motif recovery per method, as a dict.
#[pyfunction]
#[pyo3(signature = (model, data, explanations, sparsity_levels = Vec::new(), seed = 0))]
fn evaluate<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    data: PyRef<'_, PyDataset>,
    explanations: Vec<PyRef<'_, PyExplanation>>,
    sparsity_levels: Vec<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let xs: Vec<Explanation> = explanations.iter().map(|x| x.inner.clone()).collect();
    let (weights, labeled) = (&model.inner, &data.inner);
    let json = py
        .detach(|| {
            let (train_acc, test_acc) = accuracy_on(weights, labeled)?;
            let methods = group_by_method(xs)
                .iter()
                .map(|g| evaluate_method(weights, labeled, g, &sparsity_levels, seed))
                .collect::<graphgi_core::Result<Vec<_>>>()?;
            record::to_json(&EvalReport {
                methods,
                train_accuracy: Some(train_acc),
                test_accuracy: Some(test_acc),
                bootstrap_rounds: BOOTSTRAP_ROUNDS,
            })
        })
        .py()?;
    py.import("json")?.call_method1("loads", (json,))
}

/// A Python callable `f(list[int]) -> float` as a cooperative game. The
/// first exception it raises is kept and re-raised after the computation.
struct PyGame {
    f: Py<PyAny>,
    error: Mutex<Option<PyErr>>,
}

impl PyGame {
    fn new(f: Py<PyAny>) -> Self {
        Self {
            f,
            error: Mutex::new(None),
        }
    }

    /// Run `body` without the interpreter lock, then surface any callback error.
    fn run<T: Send>(self, py: Python<'_>, body: impl FnOnce(&PyGame) -> graphgi_core::Result<T> + Send) -> PyResult<T> {
        let out = py.detach(|| body(&self));
        if let Some(e) = self.error.into_inner().unwrap() {
            return Err(e);
        }
        out.py()
    }
}

impl Game for PyGame {
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        Python::attach(|py| {
            match self
                .f
                .call1(py, (coalition.to_vec(),))
                .and_then(|v| v.extract::<f64>(py))
            {
                Ok(v) => v,
                Err(e) => {
                    self.error.lock().unwrap().get_or_insert(e);
                    f64::NAN
                }
            }
        })
    }
}

fn estimate_dict<'py>(py: Python<'py>, e: &InteractionEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("strength", e.strength)?;
    d.set_item("net", e.net)?;
    d.set_item("positive_sum", e.positive_sum)?;
    d.set_item("negative_sum", e.negative_sum)?;
    d.set_item("samples", e.samples)?;
    Ok(d)
}

/// Exact Shapley values of `players` under `game`, as `(player, value)` pairs.
#[pyfunction]
fn exact_shapley(py: Python<'_>, game: Py<PyAny>, players: Vec<EdgeId>) -> PyResult<Vec<(EdgeId, f64)>> {
    PyGame::new(game).run(py, |g| shapley::exact_shapley(g, &players))
}

/// Sampled Shapley value of `player` (one or more edges acting together).
#[pyfunction]
#[pyo3(signature = (game, player, universe, samples = 100, seed = 0))]
fn mc_shapley(
    py: Python<'_>,
    game: Py<PyAny>,
    player: Vec<EdgeId>,
    universe: Vec<EdgeId>,
    samples: usize,
    seed: u64,
) -> PyResult<f64> {
    let config = SamplingConfig {
        shapley_samples: samples,
        seed,
        ..Default::default()
    };
    PyGame::new(game).run(py, |g| shapley::mc_shapley(g, &player, &universe, &config))
}

/// Exact interaction of `coalition` against the rest of `universe`.
#[pyfunction]
fn interaction_exact(py: Python<'_>, game: Py<PyAny>, coalition: Vec<EdgeId>, universe: Vec<EdgeId>) -> PyResult<f64> {
    PyGame::new(game).run(py, |g| interaction::interaction_exact(g, &coalition, &universe))
}

/// Sampled interaction strength of `coalition`.
#[pyfunction]
#[pyo3(signature = (game, coalition, universe, samples = 100, seed = 0))]
fn strength_mc<'py>(
    py: Python<'py>,
    game: Py<PyAny>,
    coalition: Vec<EdgeId>,
    universe: Vec<EdgeId>,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SamplingConfig {
        interaction_samples: samples,
        seed,
        ..Default::default()
    };
    let e = PyGame::new(game).run(py, |g| interaction::strength_mc(g, &coalition, &universe, &config))?;
    estimate_dict(py, &e)
}

/// Interaction bounds over every partition of `coalition` (at most 4 edges).
#[pyfunction]
fn strength_partition_exact<'py>(
    py: Python<'py>,
    game: Py<PyAny>,
    coalition: Vec<EdgeId>,
    universe: Vec<EdgeId>,
) -> PyResult<Bound<'py, PyDict>> {
    let e = PyGame::new(game).run(py, |g| interaction::strength_partition_exact(g, &coalition, &universe))?;
    estimate_dict(py, &e)
}

#[pymodule]
fn graphgi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyExplanation>()?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(mc_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(interaction_exact, m)?)?;
    m.add_function(wrap_pyfunction!(strength_mc, m)?)?;
    m.add_function(wrap_pyfunction!(strength_partition_exact, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
