use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{stratified_split, LabeledGraph};
use crate::graph::{Graph, NodeId};
use crate::seed::{derive_seed, rng_from_seed};

const FEATURE_DIM: usize = 10;
const BA_BASE_NODES: usize = 300;
const BA_ATTACH: usize = 5;
const HOUSES: usize = 80;
/// Random edges added to BA-shapes, as a fraction of its edge count.
const BA_NOISE_FRACTION: f64 = 0.01;
const COMMUNITY_BRIDGES: usize = 350;
const COMMUNITY_SIGMA: f64 = 0.5;
/// A balanced binary tree of depth 8 (root at depth 0): 511 nodes.
const TREE_DEPTH: u32 = 8;
const CYCLES: usize = 60;
const GRIDS: usize = 80;
/// Random edges added to the tree datasets, as a fraction of the node count.
const TREE_NOISE_FRACTION: f64 = 0.1;

/// Undirected edge accumulator. Pairs are stored as `(min, max)`.
#[derive(Default)]
struct Builder {
    labels: Vec<usize>,
    pairs: BTreeSet<(NodeId, NodeId)>,
    motif_pairs: BTreeSet<(NodeId, NodeId)>,
}

impl Builder {
    fn add_nodes(&mut self, count: usize, label: usize) -> NodeId {
        let start = self.labels.len();
        self.labels.extend(std::iter::repeat_n(label, count));
        start
    }

    fn connect(&mut self, a: NodeId, b: NodeId) -> bool {
        debug_assert_ne!(a, b);
        self.pairs.insert((a.min(b), a.max(b)))
    }

    fn connect_motif(&mut self, a: NodeId, b: NodeId) {
        self.connect(a, b);
        self.motif_pairs.insert((a.min(b), a.max(b)));
    }

    fn add_noise(&mut self, count: usize, rng: &mut ChaCha8Rng) {
        let n = self.labels.len();
        let mut added = 0;
        while added < count {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && self.connect(a, b) {
                added += 1;
            }
        }
    }

    /// One-hot degree encoding over `FEATURE_DIM` buckets; the last bucket
    /// collects every degree of `FEATURE_DIM` or more.
    fn degree_features(&self) -> Array2<f64> {
        let mut deg = vec![0usize; self.labels.len()];
        for &(u, v) in &self.pairs {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut features = Array2::zeros((deg.len(), FEATURE_DIM));
        for (node, &d) in deg.iter().enumerate() {
            features[[node, d.clamp(1, FEATURE_DIM) - 1]] = 1.0;
        }
        features
    }

    fn finish(self, features: Array2<f64>, num_classes: usize, split_seed: u64) -> LabeledGraph {
        let n = self.labels.len();
        let pairs: Vec<_> = self.pairs.into_iter().collect();
        let graph = Graph::from_undirected(n, &pairs, features, Some(self.labels.clone()), num_classes)
            .expect("generated graph is valid");
        let motif_edges = self
            .motif_pairs
            .iter()
            .flat_map(|&(a, b)| [graph.edge_id(a, b), graph.edge_id(b, a)])
            .map(|e| e.expect("motif edge present"))
            .collect();
        let split = stratified_split(&self.labels, num_classes, split_seed);
        LabeledGraph::new(graph, motif_edges, split).expect("generated dataset is valid")
    }
}

/// Preferential attachment: each new node links to `m` distinct existing
/// nodes drawn proportionally to degree (the first new node links to the
/// `m` seed nodes).
fn barabasi_albert(b: &mut Builder, n: usize, m: usize, label: usize, rng: &mut ChaCha8Rng) -> NodeId {
    let start = b.add_nodes(n, label);
    let mut targets: Vec<NodeId> = (start..start + m).collect();
    let mut repeated: Vec<NodeId> = Vec::with_capacity(2 * n * m);
    for source in start + m..start + n {
        for &t in &targets {
            b.connect(source, t);
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(repeated[rng.random_range(0..repeated.len())]);
        }
        targets = chosen.into_iter().collect();
    }
    start
}

/// Five-node house: a square `0-1-2-3` with roof node 4 above `0` and `1`.
/// Node 0 is the attachment point.
fn house(b: &mut Builder, label_offset: usize) -> NodeId {
    let roles = [1, 1, 2, 2, 3];
    let start = b.labels.len();
    for role in roles {
        b.add_nodes(1, label_offset + role);
    }
    for (u, v) in [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)] {
        b.connect_motif(start + u, start + v);
    }
    start
}

fn cycle(b: &mut Builder, len: usize, label: usize) -> NodeId {
    let start = b.add_nodes(len, label);
    for i in 0..len {
        b.connect_motif(start + i, start + (i + 1) % len);
    }
    start
}

fn grid(b: &mut Builder, side: usize, label: usize) -> NodeId {
    let start = b.add_nodes(side * side, label);
    for r in 0..side {
        for c in 0..side {
            let u = start + r * side + c;
            if c + 1 < side {
                b.connect_motif(u, u + 1);
            }
            if r + 1 < side {
                b.connect_motif(u, u + side);
            }
        }
    }
    start
}

fn balanced_binary_tree(b: &mut Builder, depth: u32, label: usize) -> (NodeId, usize) {
    let n = (1usize << (depth + 1)) - 1;
    let start = b.add_nodes(n, label);
    for i in 1..n {
        b.connect(start + i, start + (i - 1) / 2);
    }
    (start, n)
}

fn ba_shapes_into(b: &mut Builder, label_offset: usize, rng: &mut ChaCha8Rng) -> (NodeId, usize) {
    let base = barabasi_albert(b, BA_BASE_NODES, BA_ATTACH, label_offset, rng);
    for _ in 0..HOUSES {
        let anchor = house(b, label_offset);
        let host = base + rng.random_range(0..BA_BASE_NODES);
        b.connect(anchor, host);
    }
    let n = b.labels.len() - base;
    let component_edges = b.pairs.iter().filter(|&&(u, _)| u >= base).count();
    let noise = (component_edges as f64 * BA_NOISE_FRACTION).round() as usize;
    // noise stays inside this component
    let mut added = 0;
    while added < noise {
        let u = base + rng.random_range(0..n);
        let v = base + rng.random_range(0..n);
        if u != v && b.connect(u, v) {
            added += 1;
        }
    }
    (base, n)
}

/// Barabási–Albert base of 300 nodes with 80 planted houses: 700 nodes,
/// 4 classes (base, house middle, house bottom, house roof), one-hot
/// degree features.
pub fn gen_ba_shapes(seed: u64) -> LabeledGraph {
    let mut rng = rng_from_seed(derive_seed(seed, "ba-shapes", 0));
    let mut b = Builder::default();
    ba_shapes_into(&mut b, 0, &mut rng);
    let features = b.degree_features();
    b.finish(features, 4, derive_seed(seed, "split", 0))
}

/// Two BA-shapes graphs joined by random bridges: 1400 nodes, 8 classes,
/// Gaussian features centred at +1 (first community) and -1 (second).
pub fn gen_ba_community(seed: u64) -> LabeledGraph {
    let mut rng = rng_from_seed(derive_seed(seed, "ba-community", 0));
    let mut b = Builder::default();
    let (first, n0) = ba_shapes_into(&mut b, 0, &mut rng);
    let (second, n1) = ba_shapes_into(&mut b, 4, &mut rng);
    let mut bridges = 0;
    while bridges < COMMUNITY_BRIDGES {
        let u = first + rng.random_range(0..n0);
        let v = second + rng.random_range(0..n1);
        if b.connect(u, v) {
            bridges += 1;
        }
    }
    let n = b.labels.len();
    let mut features = Array2::zeros((n, FEATURE_DIM));
    let up = Normal::new(1.0, COMMUNITY_SIGMA).expect("valid normal");
    let down = Normal::new(-1.0, COMMUNITY_SIGMA).expect("valid normal");
    for (node, mut row) in features.rows_mut().into_iter().enumerate() {
        let dist = if node < second { &up } else { &down };
        for x in row.iter_mut() {
            *x = dist.sample(&mut rng);
        }
    }
    b.finish(features, 8, derive_seed(seed, "split", 0))
}

fn tree_with_motifs(
    seed: u64,
    name: &str,
    motifs: usize,
    mut plant: impl FnMut(&mut Builder) -> NodeId,
) -> LabeledGraph {
    let mut rng = rng_from_seed(derive_seed(seed, name, 0));
    let mut b = Builder::default();
    let (base, tree_n) = balanced_binary_tree(&mut b, TREE_DEPTH, 0);
    for _ in 0..motifs {
        let anchor = plant(&mut b);
        let host = base + rng.random_range(0..tree_n);
        b.connect(anchor, host);
    }
    let noise = (b.labels.len() as f64 * TREE_NOISE_FRACTION).round() as usize;
    b.add_noise(noise, &mut rng);
    let features = b.degree_features();
    b.finish(features, 2, derive_seed(seed, "split", 0))
}

/// Balanced binary tree (511 nodes) with 60 planted six-node cycles:
/// 871 nodes, 2 classes.
pub fn gen_tree_cycle(seed: u64) -> LabeledGraph {
    tree_with_motifs(seed, "tree-cycle", CYCLES, |b| cycle(b, 6, 1))
}

/// Balanced binary tree (511 nodes) with 80 planted 3x3 grids: 1231 nodes,
/// 2 classes.
pub fn gen_tree_grid(seed: u64) -> LabeledGraph {
    tree_with_motifs(seed, "tree-grid", GRIDS, |b| grid(b, 3, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn undirected_edges(lg: &LabeledGraph) -> usize {
        lg.graph.num_edges() / 2
    }

    fn within(actual: usize, expected: usize, tol: f64) -> bool {
        (actual as f64 - expected as f64).abs() <= tol * expected as f64
    }

    /// Connected components of the motif edge set.
    fn motif_components(lg: &LabeledGraph) -> Vec<(usize, usize)> {
        let g = &lg.graph;
        let mut seen = vec![false; g.num_nodes()];
        let mut out = Vec::new();
        for &start in &lg.motif_nodes {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let (mut nodes, mut edges) = (0, 0);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                nodes += 1;
                for &e in g.incident_edges(u) {
                    if !lg.motif_edges.contains(&e) {
                        continue;
                    }
                    let (s, d) = g.edge(e);
                    if s == u {
                        edges += 1;
                        if !seen[d] {
                            seen[d] = true;
                            queue.push_back(d);
                        }
                    }
                }
            }
            out.push((nodes, edges / 2));
        }
        out
    }

    #[test]
    fn ba_shapes_shape() {
        let lg = gen_ba_shapes(1);
        assert_eq!(lg.graph.num_nodes(), 700);
        assert_eq!(lg.graph.num_classes(), 4);
        assert!(within(lg.graph.num_edges(), 4110, 0.15), "{}", lg.graph.num_edges());
        let comps = motif_components(&lg);
        assert_eq!(comps.len(), 80);
        assert!(comps.iter().all(|&c| c == (5, 6)));
        // labels depend on motif role only
        for h in 0..80 {
            let start = 300 + 5 * h;
            let roles: Vec<_> = (0..5).map(|i| lg.labels()[start + i]).collect();
            assert_eq!(roles, vec![1, 1, 2, 2, 3]);
        }
        assert!(lg.labels()[..300].iter().all(|&c| c == 0));
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in super::super::DatasetKind::ALL {
            let a = kind.generate(9);
            let b = kind.generate(9);
            assert_eq!(a.graph, b.graph, "{kind}");
            assert_eq!(a.split, b.split);
            assert_eq!(a.motif_edges, b.motif_edges);
            assert_ne!(a.graph.edges(), kind.generate(10).graph.edges());
        }
    }

    #[test]
    fn ba_community_shape_and_features() {
        let lg = gen_ba_community(2);
        assert_eq!(lg.graph.num_nodes(), 1400);
        assert_eq!(lg.graph.num_classes(), 8);
        assert!(within(lg.graph.num_edges(), 8920, 0.15));
        let f = lg.graph.features();
        let mean0 = f.slice(ndarray::s![..700, ..]).mean().unwrap();
        let mean1 = f.slice(ndarray::s![700.., ..]).mean().unwrap();
        let tol = 3.0 * COMMUNITY_SIGMA / (FEATURE_DIM as f64).sqrt();
        assert!((mean0 - 1.0).abs() <= tol, "{mean0}");
        assert!((mean1 + 1.0).abs() <= tol, "{mean1}");
        assert!(lg.labels()[700..].iter().all(|&c| c >= 4));
    }

    #[test]
    fn tree_cycle_shape() {
        let lg = gen_tree_cycle(3);
        assert_eq!(lg.graph.num_nodes(), 871);
        assert_eq!(lg.graph.num_classes(), 2);
        assert!(within(lg.graph.num_edges(), 1950, 0.15));
        let comps = motif_components(&lg);
        assert_eq!(comps.len(), CYCLES);
        assert!(comps.iter().all(|&c| c == (6, 6)));
        assert_eq!(lg.labels().iter().filter(|&&c| c == 0).count(), 511);
    }

    #[test]
    fn tree_grid_shape() {
        let lg = gen_tree_grid(4);
        assert_eq!(lg.graph.num_nodes(), 1231);
        assert_eq!(lg.graph.num_classes(), 2);
        assert!(within(lg.graph.num_edges(), 3410, 0.15));
        let comps = motif_components(&lg);
        assert_eq!(comps.len(), GRIDS);
        assert!(comps.iter().all(|&c| c == (9, 12)));
        assert!(undirected_edges(&lg) > 510 + 80 * 13);
    }

    #[test]
    fn structural_features_are_one_hot_degrees() {
        for lg in [gen_ba_shapes(5), gen_tree_cycle(5)] {
            let g = &lg.graph;
            for node in 0..g.num_nodes() {
                let row = g.features().row(node);
                let degree = g.incident_edges(node).iter().filter(|&&e| g.edge(e).0 == node).count();
                assert_eq!(row.sum(), 1.0);
                assert_eq!(
                    row[degree.clamp(1, FEATURE_DIM) - 1],
                    1.0,
                    "node {node} degree {degree}"
                );
            }
        }
    }
}
