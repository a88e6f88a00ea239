use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use graphgi_core::bench::{run_bench, REFUSAL};
use graphgi_core::datasets::{load_dir, save_generic, LabeledGraph};
use graphgi_core::dot::explanation_dot;
use graphgi_core::explainer::{
    baseline_random, baseline_topk_shapley, explain_batch, ExplainerConfig, Explanation, Method, SearchMode,
};
use graphgi_core::gnn::{
    accuracy_on, load_weights, predict, save_weights, train, train_from, ModelWeights, TrainConfig,
};
use graphgi_core::graph::NodeId;
use graphgi_core::metrics::{evaluate_method, group_by_method, EvalReport, BOOTSTRAP_ROUNDS};
use graphgi_core::record::{file_stem, load_explanation, load_explanations_dir, save_explanation, write_json};
use graphgi_core::seed::derive_seed;
use graphgi_core::Error;
use rayon::prelude::*;

use crate::args::{BenchArgs, Cli, Command, EvalArgs, ExplainArgs, ExportDotArgs, GenArgs, SearchArgs, TrainArgs};
use crate::manifest::RunManifest;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Explain(a) => explain_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::ExportDot(a) => export_dot(a),
    }
}

/// `foo/model.txt` -> `foo/model.manifest.json`
fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

fn must_exist(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Input(format!("{} does not exist", path.display())).into())
    }
}

fn load_data(dir: &Path) -> Result<LabeledGraph> {
    must_exist(dir)?;
    Ok(load_dir(dir)?)
}

fn load_model(path: &Path, data: &LabeledGraph) -> Result<ModelWeights> {
    must_exist(path)?;
    let weights = load_weights(path)?;
    weights.check_graph(&data.graph)?;
    if weights.dims.classes != data.graph.num_classes() {
        return Err(Error::Input(format!(
            "model predicts {} classes but the dataset has {}",
            weights.dims.classes,
            data.graph.num_classes()
        ))
        .into());
    }
    Ok(weights)
}

fn set_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    Ok(())
}

fn record_search(m: &mut RunManifest, s: &SearchArgs, sampling_seed: u64) {
    m.seed("root", s.seed);
    m.seed("explain", sampling_seed);
    m.set("hops", s.hops);
    m.set("max_edges", s.max_edges);
    m.set("shapley_samples", s.shapley_samples);
    m.set("interaction_samples", s.interaction_samples);
    m.set("min_gain", s.min_gain);
    m.set("tie_reverse_edges", s.tie_reverse_edges);
    m.set("frontier", format!("{:?}", s.frontier).to_lowercase());
    m.set("jobs", s.jobs);
}

fn gen(a: GenArgs) -> Result<()> {
    let mut m = RunManifest::new("gen");
    let seed = derive_seed(a.seed, "dataset", 0);
    m.seed("root", a.seed);
    m.seed("dataset", seed);
    m.set("dataset", a.dataset.name());
    m.phase("generate");
    let data = a.dataset.generate(seed);
    m.phase("write");
    save_generic(&data, &a.out)?;
    println!(
        "{}: {} nodes, {} directed edges, {} motif edges -> {}",
        a.dataset,
        data.graph.num_nodes(),
        data.graph.num_edges(),
        data.motif_edges.len(),
        a.out.display()
    );
    m.write(a.out.join("manifest.json"))?;
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut m = RunManifest::new("train");
    m.dataset(&a.data);
    let data = load_data(&a.data)?;
    let config = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        dropout: a.dropout,
        hidden: a.hidden,
        seed: derive_seed(a.seed, "train", 0),
    };
    m.seed("root", a.seed);
    m.seed("train", config.seed);
    m.set("architecture", format!("{:?}", a.arch).to_lowercase());
    m.set("epochs", a.epochs);
    m.set("learning_rate", a.lr);
    m.set("dropout", a.dropout);
    m.set("hidden", a.hidden);
    m.phase("train");
    let report = match &a.resume {
        Some(path) => {
            m.model(path);
            let start = load_model(path, &data)?;
            if start.architecture != a.arch.into() {
                return Err(Error::Input(format!("--resume holds {} weights", start.architecture)).into());
            }
            train_from(start, &data, &config)?
        }
        None => train(a.arch.into(), &data, &config)?,
    };
    m.phase("write");
    save_weights(&report.weights, &a.out)?;
    println!(
        "Train accuracy: {:.2}%  Test accuracy: {:.2}%",
        100.0 * report.train_accuracy,
        100.0 * report.test_accuracy
    );
    m.set("train_accuracy", report.train_accuracy);
    m.set("test_accuracy", report.test_accuracy);
    m.write(sidecar(&a.out))?;
    Ok(())
}

fn select_targets(a: &ExplainArgs, data: &LabeledGraph) -> Result<Vec<NodeId>> {
    let t = &a.targets;
    match t.test_top {
        Some(n) => Ok(data
            .test_nodes()
            .into_iter()
            .filter(|v| !t.motif_targets || data.motif_nodes.contains(v))
            .take(n)
            .collect()),
        None if t.targets.is_empty() => Err(CliError::Usage("give --target or --test-top".into())),
        None => Ok(t.targets.clone()),
    }
}

fn explain_cmd(a: ExplainArgs) -> Result<()> {
    set_jobs(a.search.jobs)?;
    let mut m = RunManifest::new("explain");
    m.dataset(&a.data);
    m.model(&a.model);
    m.phase("load");
    let data = load_data(&a.data)?;
    let weights = load_model(&a.model, &data)?;
    let targets = select_targets(&a, &data)?;
    let sampling_seed = derive_seed(a.search.seed, "explain", 0);
    let mode = if a.exhaustive {
        SearchMode::Exhaustive
    } else {
        SearchMode::Sampled
    };
    let config = a.search.explainer_config(sampling_seed, mode);
    record_search(&mut m, &a.search, sampling_seed);
    m.set("method", a.method.as_str());
    m.set("mode", if a.exhaustive { "exhaustive" } else { "sampled" });
    m.set("targets", targets.clone());

    m.phase("explain");
    let graph = &data.graph;
    let results: Vec<graphgi_core::Result<Explanation>> = match a.method {
        Method::Graphgi => explain_batch(&weights, graph, &targets, &config),
        baseline => {
            let budgets: HashMap<NodeId, usize> = match &a.match_budgets {
                Some(dir) => load_explanations_dir(dir, graph)?
                    .into_iter()
                    .map(|x| (x.target, x.selected.len()))
                    .collect(),
                None => HashMap::new(),
            };
            if let Some(dir) = &a.match_budgets {
                m.set("match_budgets", dir.display().to_string());
                if let Some(t) = targets.iter().find(|t| !budgets.contains_key(t)) {
                    return Err(Error::Input(format!("no explanation of node {t} in {}", dir.display())).into());
                }
            }
            let fixed = a.budget.unwrap_or(a.search.max_edges);
            m.set("budget", fixed);
            targets
                .par_iter()
                .map(|&t| {
                    let budget = budgets.get(&t).copied().unwrap_or(fixed);
                    match baseline {
                        Method::Random => baseline_random(&weights, graph, t, &config, budget),
                        _ => baseline_topk_shapley(&weights, graph, t, &config, budget),
                    }
                })
                .collect()
        }
    };

    m.phase("write");
    fs::create_dir_all(&a.out)?;
    let motifs = (!data.motif_edges.is_empty()).then_some(&data.motif_edges);
    let mut first_error = None;
    for (t, r) in targets.iter().zip(results) {
        match r {
            Ok(x) => {
                save_explanation(&a.out, graph, &x)?;
                fs::write(
                    a.out.join(format!("{}.dot", file_stem(&x))),
                    explanation_dot(graph, &x, motifs)?,
                )?;
                println!("node {t}: {} edges ({})", x.selected.len(), x.terminal_reason.as_str());
            }
            Err(e) => {
                eprintln!("node {t}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    m.write(a.out.join("manifest.json"))?;
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn check_classes(weights: &ModelWeights, data: &LabeledGraph, xs: &[Explanation]) -> Result<()> {
    for x in xs {
        let class = predict(weights, &data.graph, x.target)?.class;
        if class != x.predicted_class {
            return Err(Error::Input(format!(
                "explanation of node {} was made for class {} but this model predicts {class}",
                x.target, x.predicted_class
            ))
            .into());
        }
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let mut m = RunManifest::new("eval");
    m.dataset(&a.data);
    m.model(&a.model);
    m.phase("load");
    let data = load_data(&a.data)?;
    let weights = load_model(&a.model, &data)?;
    let mut all = Vec::new();
    for dir in &a.explanations {
        must_exist(dir)?;
        all.extend(load_explanations_dir(dir, &data.graph)?);
    }
    if all.is_empty() {
        return Err(CliError::Usage("no explanation records found".into()));
    }
    check_classes(&weights, &data, &all)?;
    let seed = derive_seed(a.seed, "eval", 0);
    m.seed("root", a.seed);
    m.seed("eval", seed);
    m.set("sparsity_levels", a.sparsity_levels.clone());
    m.set(
        "explanations",
        a.explanations
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    );

    m.phase("evaluate");
    let (train_acc, test_acc) = accuracy_on(&weights, &data)?;
    let methods = group_by_method(all)
        .iter()
        .map(|xs| evaluate_method(&weights, &data, xs, &a.sparsity_levels, seed))
        .collect::<graphgi_core::Result<Vec<_>>>()?;
    let report = EvalReport {
        methods,
        train_accuracy: Some(train_acc),
        test_accuracy: Some(test_acc),
        bootstrap_rounds: BOOTSTRAP_ROUNDS,
    };
    m.phase("write");
    write_json(&a.out, &report)?;
    for r in &report.methods {
        print!(
            "{:<13} n={:<3} fidelity {:.4} ± {:.4} ({:.2}%)  sparsity {:.4} ± {:.4} ({:.2}%)",
            r.method.as_str(),
            r.targets.len(),
            r.fidelity.mean,
            r.fidelity.std,
            100.0 * r.fidelity.mean,
            r.sparsity.mean,
            r.sparsity.std,
            100.0 * r.sparsity.mean
        );
        if let Some(p) = &r.motif_precision {
            print!("  motif precision {:.4}", p.mean);
        }
        println!();
        for c in &r.curve {
            println!(
                "    level {:.2}: fidelity {:.4} (sparsity {:.4}, {} short)",
                c.level, c.fidelity, c.achieved_sparsity, c.unreachable
            );
        }
    }
    m.write(sidecar(&a.out))?;
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    set_jobs(a.search.jobs)?;
    let mut m = RunManifest::new("bench");
    m.dataset(&a.data);
    m.model(&a.model);
    let data = load_data(&a.data)?;
    let weights = load_model(&a.model, &data)?;
    let targets: Vec<NodeId> = data.test_nodes().into_iter().take(a.n).collect();
    let sampling_seed = derive_seed(a.search.seed, "explain", 0);
    let config: ExplainerConfig = a.search.explainer_config(sampling_seed, SearchMode::Sampled);
    record_search(&mut m, &a.search, sampling_seed);
    m.set("targets", targets.clone());
    m.phase("bench");
    let report = run_bench(&weights, &data.graph, &targets, &config)?;
    m.phase("write");
    write_json(&a.out, &report)?;
    for t in &report.targets {
        match t.exhaustive_seconds {
            Some(s) => println!(
                "node {:<5} |U|={:<4} sampled {:>9.3} s  exhaustive {:>9.3} s",
                t.target, t.universe, t.sampled_seconds, s
            ),
            None => println!(
                "node {:<5} |U|={:<4} sampled {:>9.3} s  exhaustive {REFUSAL}",
                t.target, t.universe, t.sampled_seconds
            ),
        }
    }
    match report.speedup {
        Some(s) => println!(
            "speedup {s:.1}x over {} paired targets ({} refused)",
            report.targets.len() - report.refused,
            report.refused
        ),
        None => println!("no target ran in both modes ({} refused)", report.refused),
    }
    m.write(sidecar(&a.out))?;
    Ok(())
}

fn export_dot(a: ExportDotArgs) -> Result<()> {
    let mut m = RunManifest::new("export-dot");
    m.dataset(&a.data);
    let data = load_data(&a.data)?;
    must_exist(&a.explanation)?;
    let x = load_explanation(&a.explanation, &data.graph)?;
    let motifs = (!data.motif_edges.is_empty()).then_some(&data.motif_edges);
    fs::write(&a.out, explanation_dot(&data.graph, &x, motifs)?)?;
    m.set("explanation", a.explanation.display().to_string());
    m.write(sidecar(&a.out))?;
    Ok(())
}
