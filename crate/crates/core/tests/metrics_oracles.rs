use graphgi_core::datasets::DatasetKind;
use graphgi_core::explainer::{Explanation, Method, TerminalReason};
use graphgi_core::gnn::{forward, train, Architecture, TrainConfig};
use graphgi_core::graph::{l_hop_subgraph, Coalition, EdgeId, Graph};
use graphgi_core::metrics::{budget_for_level, fidelity, fidelity_at_sparsity, sparsity};

fn without(graph: &Graph, removed: &[EdgeId]) -> Graph {
    let edges = (0..graph.num_edges())
        .filter(|e| !removed.contains(e))
        .map(|e| graph.edge(e))
        .collect();
    Graph::new(
        graph.num_nodes(),
        edges,
        graph.features().clone(),
        None,
        graph.num_classes(),
    )
    .unwrap()
}

fn explanation(target: usize, class: usize, edges: &[EdgeId]) -> Explanation {
    Explanation {
        target,
        predicted_class: class,
        method: Method::TopkShapley,
        hops: 2,
        selected: edges.iter().copied().collect::<Coalition>(),
        trace: vec![],
        terminal_reason: TerminalReason::MaxEdges,
    }
}

#[test]
fn fidelity_and_sparsity_match_direct_deletion() {
    for arch in [Architecture::Gcn, Architecture::Gin] {
        let data = DatasetKind::TreeCycle.generate(2);
        let config = TrainConfig {
            epochs: 60,
            ..TrainConfig::default()
        };
        let weights = train(arch, &data, &config).unwrap().weights;
        let g = &data.graph;
        let probs = forward(&weights, g).unwrap();
        let mut xs = Vec::new();
        let (mut want_fid, mut want_sp) = (0.0, 0.0);
        for (i, target) in data.test_nodes().into_iter().take(6).enumerate() {
            let class = (0..probs.ncols()).fold(0, |b, c| if probs[[target, c]] > probs[[target, b]] { c } else { b });
            let universe = l_hop_subgraph(g, target, 2).unwrap().edges().to_vec();
            // a different slice of the universe per target, including all of it
            let take = if i == 0 {
                universe.len()
            } else {
                (i * 2).min(universe.len())
            };
            let removed = &universe[..take];
            let after = forward(&weights, &without(g, removed)).unwrap()[[target, class]];
            want_fid += probs[[target, class]] - after;
            want_sp += 1.0 - take as f64 / universe.len() as f64;
            xs.push(explanation(target, class, removed));
        }
        let n = xs.len() as f64;
        assert!((fidelity(&weights, g, &xs).unwrap() - want_fid / n).abs() < 1e-12);
        assert!((sparsity(g, &xs).unwrap() - want_sp / n).abs() < 1e-12);
        let curve = fidelity_at_sparsity(&weights, g, &xs, &[1.0]).unwrap();
        assert_eq!(curve[0].fidelity, 0.0);
    }
}

#[test]
fn budgets_round_down() {
    assert_eq!(budget_for_level(0.7, 10), 3);
    assert_eq!(budget_for_level(0.75, 14), 3);
    assert_eq!(budget_for_level(0.0, 14), 14);
    assert_eq!(budget_for_level(1.0, 14), 0);
}
