//! Coalition games over edges and Shapley values.
//!
//! A [`Game`] maps a set of edge ids (the coalition) to a payoff. The
//! production game is [`GameOracle`]: the trained model's probability of the
//! explained class at the target node when only the coalition's edges are
//! present in the target's L-hop subgraph.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};

use dashmap::DashMap;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gnn::{predict, ModelWeights, TargetEvaluator};
use crate::graph::{l_hop_subgraph, Coalition, EdgeId, Graph, NodeId, Subgraph};
use crate::seed::{derive_seed, rng_from_seed};

/// Largest player count [`exact_shapley`] will enumerate.
pub const EXACT_SHAPLEY_MAX_PLAYERS: usize = 20;

/// A cooperative game whose players are edge ids.
///
/// `value` receives the coalition's edge ids in no particular order and
/// without duplicates.
pub trait Game: Sync {
    fn value(&self, coalition: &[EdgeId]) -> f64;
}

impl<F> Game for F
where
    F: Fn(&[EdgeId]) -> f64 + Sync,
{
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        self(coalition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingConfig {
    /// Sampled contexts per Shapley estimate.
    pub shapley_samples: usize,
    /// Sampled contexts per interaction-strength estimate.
    pub interaction_samples: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            shapley_samples: 100,
            interaction_samples: 100,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shapley_samples == 0 || self.interaction_samples == 0 {
            return Err(Error::input("sample counts must be at least 1"));
        }
        Ok(())
    }
}

fn signature_key(sorted: &[EdgeId]) -> u128 {
    let mut lo = DefaultHasher::new();
    (0u8, sorted).hash(&mut lo);
    let mut hi = DefaultHasher::new();
    (1u8, sorted).hash(&mut hi);
    (u128::from(hi.finish()) << 64) | u128::from(lo.finish())
}

/// The model as a game on one target's L-hop subgraph.
///
/// A coalition keeps its own edges and drops the rest of the subgraph.
/// Edges outside the subgraph are not players and stay in place, so the
/// full coalition reproduces the full-graph output at the target even
/// where GCN normalisation reads boundary degrees. Values are memoised by coalition signature, so repeated coalitions cost
/// one model evaluation. Safe to share across threads.
pub struct GameOracle<'a> {
    subgraph: Subgraph<'a>,
    target_class: usize,
    evaluator: TargetEvaluator<'a>,
    local_edges: HashMap<EdgeId, (usize, usize)>,
    cache: DashMap<u128, f64>,
    calls: AtomicUsize,
}

impl<'a> GameOracle<'a> {
    pub fn new(weights: &'a ModelWeights, subgraph: Subgraph<'a>, target_class: usize) -> Result<Self> {
        let graph = subgraph.parent();
        weights.check_graph(graph)?;
        if target_class >= weights.dims.classes {
            return Err(Error::input(format!(
                "class {target_class} out of range for a {}-class model",
                weights.dims.classes
            )));
        }
        let local = |n: NodeId| subgraph.local_index(n).expect("subgraph edge endpoint");
        let local_edges = subgraph
            .edges()
            .iter()
            .map(|&e| {
                let (s, d) = graph.edge(e);
                (e, (local(s), local(d)))
            })
            .collect();
        let features: Array2<f64> = graph.features().select(ndarray::Axis(0), subgraph.nodes());
        // Edges outside the universe are not players and stay in place.
        let external_in = subgraph
            .nodes()
            .iter()
            .map(|&n| {
                graph
                    .incident_edges(n)
                    .iter()
                    .filter(|&&e| graph.edge(e).1 == n && !subgraph.contains_edge(e))
                    .count()
            })
            .collect();
        let target = local(subgraph.target());
        Ok(Self {
            evaluator: TargetEvaluator::new(weights, features.view(), external_in, target),
            subgraph,
            target_class,
            local_edges,
            cache: DashMap::new(),
            calls: AtomicUsize::new(0),
        })
    }

    /// Oracle for `target` explaining the class the model predicts on the
    /// full graph.
    pub fn for_target(weights: &'a ModelWeights, graph: &'a Graph, target: NodeId, hops: usize) -> Result<Self> {
        let subgraph = l_hop_subgraph(graph, target, hops)?;
        weights.check_graph(graph)?;
        let class = predict(weights, graph, target)?.class;
        Self::new(weights, subgraph, class)
    }

    pub fn subgraph(&self) -> &Subgraph<'a> {
        &self.subgraph
    }

    pub fn target(&self) -> NodeId {
        self.subgraph.target()
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    /// The game's players: every subgraph edge, ascending.
    pub fn universe(&self) -> &[EdgeId] {
        self.subgraph.edges()
    }

    /// Model evaluations performed so far (cache misses).
    pub fn model_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Distinct coalitions currently memoised.
    pub fn cached_values(&self) -> usize {
        self.cache.len()
    }

    /// Payoff of a coalition, rejecting edges outside the subgraph.
    pub fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        if let Some(e) = coalition.iter().find(|&e| !self.subgraph.contains_edge(e)) {
            return Err(Error::input(format!(
                "edge {e} is not part of the subgraph around node {}",
                self.target()
            )));
        }
        Ok(self.value(&coalition.signature()))
    }

    fn compute(&self, sorted: &[EdgeId]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let edges: Vec<(usize, usize)> = sorted
            .iter()
            .map(|e| *self.local_edges.get(e).expect("coalition edge inside the subgraph"))
            .collect();
        self.evaluator.probabilities(&edges)[self.target_class]
    }
}

impl Game for GameOracle<'_> {
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        let mut sorted = coalition.to_vec();
        sorted.sort_unstable();
        let key = signature_key(&sorted);
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let v = self.compute(&sorted);
        self.cache.insert(key, v);
        v
    }
}

/// A game over at most [`EXACT_SHAPLEY_MAX_PLAYERS`] players with every
/// coalition's value precomputed.
pub struct TableGame {
    bit: HashMap<EdgeId, usize>,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new<G: Game + ?Sized>(game: &G, players: &[EdgeId]) -> Result<Self> {
        let players = sorted_unique(players);
        if players.len() > EXACT_SHAPLEY_MAX_PLAYERS {
            return Err(Error::Capacity(format!(
                "{} players exceed the enumeration limit of {EXACT_SHAPLEY_MAX_PLAYERS}",
                players.len()
            )));
        }
        let values = subset_values(game, &players);
        let bit = players.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Ok(Self { bit, values })
    }

    pub fn num_players(&self) -> usize {
        self.bit.len()
    }
}

impl Game for TableGame {
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        let mask = coalition.iter().fold(0usize, |m, e| {
            m | 1 << self.bit.get(e).expect("coalition edge is a table player")
        });
        self.values[mask]
    }
}

pub(crate) fn sorted_unique(edges: &[EdgeId]) -> Vec<EdgeId> {
    let mut v = edges.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

pub(crate) fn members(players: &[EdgeId], mask: usize) -> Vec<EdgeId> {
    players
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask >> i & 1 == 1)
        .map(|(_, &e)| e)
        .collect()
}

/// `v` for every subset of `players`, indexed by bitmask.
pub(crate) fn subset_values<G: Game + ?Sized>(game: &G, players: &[EdgeId]) -> Vec<f64> {
    (0..1usize << players.len())
        .into_par_iter()
        .map(|mask| game.value(&members(players, mask)))
        .collect()
}

/// `|S|!(n-|S|-1)!/n!` for `|S| = 0..n`.
pub(crate) fn shapley_weights(n: usize) -> Vec<f64> {
    let mut binom = 1.0f64;
    (0..n)
        .map(|k| {
            let w = 1.0 / (n as f64 * binom);
            binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
            w
        })
        .collect()
}

/// Exact Shapley values of `players` (the whole game universe) by subset
/// enumeration. Returned in ascending edge-id order of `players`.
pub fn exact_shapley<G: Game + ?Sized>(game: &G, players: &[EdgeId]) -> Result<Vec<(EdgeId, f64)>> {
    let players = sorted_unique(players);
    let n = players.len();
    if n > EXACT_SHAPLEY_MAX_PLAYERS {
        return Err(Error::Capacity(format!(
            "{n} players exceed the enumeration limit of {EXACT_SHAPLEY_MAX_PLAYERS}"
        )));
    }
    let values = subset_values(game, &players);
    let weights = shapley_weights(n);
    Ok(players
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let bit = 1usize << i;
            let phi = (0..values.len())
                .filter(|m| m & bit == 0)
                .map(|m| weights[m.count_ones() as usize] * (values[m | bit] - values[m]))
                .sum();
            (e, phi)
        })
        .collect())
}

/// Random orderings of a universe shared by every estimate drawn from it.
///
/// Sample `t` is a uniformly random permutation of the universe plus a
/// uniform draw `u`. For a player (one edge or a group treated as one) the
/// context is the first `floor(u·(m+1))` non-player edges of the
/// permutation, with `m` the number of non-player edges. This is exactly
/// the predecessor set of the player in a uniformly random ordering, and
/// estimates built from the same stream use common random numbers.
#[derive(Debug, Clone)]
pub struct ContextStream {
    samples: Vec<(Vec<EdgeId>, f64)>,
}

impl ContextStream {
    pub fn new(universe: &[EdgeId], samples: usize, seed: u64) -> Self {
        let universe = sorted_unique(universe);
        let samples = (0..samples)
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(seed, "context", t as u64));
                let mut perm = universe.clone();
                perm.shuffle(&mut rng);
                (perm, rng.random::<f64>())
            })
            .collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Context of sample `t` for `player` (sorted edge ids).
    pub fn context(&self, t: usize, player: &[EdgeId]) -> Vec<EdgeId> {
        let (perm, u) = &self.samples[t];
        let others: Vec<EdgeId> = perm
            .iter()
            .copied()
            .filter(|e| player.binary_search(e).is_err())
            .collect();
        let m = others.len();
        let r = ((u * (m + 1) as f64) as usize).min(m);
        others[..r].to_vec()
    }
}

/// Per-sample marginal contributions `v(S_t ∪ player) − v(S_t)`.
pub fn marginal_samples<G: Game + ?Sized>(game: &G, player: &[EdgeId], stream: &ContextStream) -> Vec<f64> {
    let player = sorted_unique(player);
    (0..stream.len())
        .into_par_iter()
        .map(|t| {
            let ctx = stream.context(t, &player);
            let mut with = ctx.clone();
            with.extend_from_slice(&player);
            game.value(&with) - game.value(&ctx)
        })
        .collect()
}

/// Monte-Carlo Shapley value of `player` (a single edge, or several edges
/// acting as one player) with contexts drawn from `universe` minus the
/// player.
pub fn mc_shapley<G: Game + ?Sized>(
    game: &G,
    player: &[EdgeId],
    universe: &[EdgeId],
    config: &SamplingConfig,
) -> Result<f64> {
    config.validate()?;
    if player.is_empty() && universe.is_empty() {
        return Err(Error::input(
            "cannot estimate a Shapley value with no player and no universe",
        ));
    }
    let stream = ContextStream::new(universe, config.shapley_samples, config.seed);
    Ok(mean(&marginal_samples(game, player, &stream)))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{forward, Architecture, Dims};
    use crate::graph::mask_to_coalition;
    use ndarray::Array2;

    fn additive(c: &[EdgeId]) -> f64 {
        c.len() as f64
    }

    #[test]
    fn additive_game_has_unit_values() {
        let phi = exact_shapley(&additive, &[3, 1, 2, 0]).unwrap();
        assert_eq!(phi.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(phi.iter().all(|&(_, v)| (v - 1.0).abs() < 1e-12));
        let cfg = SamplingConfig {
            shapley_samples: 7,
            ..Default::default()
        };
        assert_eq!(mc_shapley(&additive, &[2], &[0, 1, 2, 3], &cfg).unwrap(), 1.0);
    }

    #[test]
    fn and_game_splits_evenly() {
        let and = |c: &[EdgeId]| if c.contains(&1) && c.contains(&2) { 1.0 } else { 0.0 };
        let phi = exact_shapley(&and, &[1, 2]).unwrap();
        assert_eq!(phi, vec![(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn guard_and_empty_inputs() {
        let players: Vec<EdgeId> = (0..21).collect();
        assert!(matches!(exact_shapley(&additive, &players), Err(Error::Capacity(_))));
        assert!(mc_shapley(&additive, &[], &[], &SamplingConfig::default()).is_err());
        let bad = SamplingConfig {
            shapley_samples: 0,
            ..Default::default()
        };
        assert!(mc_shapley(&additive, &[1], &[1, 2], &bad).is_err());
    }

    #[test]
    fn shapley_weights_sum_per_size_class() {
        for n in 1..12usize {
            let w = shapley_weights(n);
            let mut binom = 1.0;
            let mut total = 0.0;
            for (k, wk) in w.iter().enumerate() {
                total += binom * wk;
                binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contexts_exclude_the_player_and_are_prefixes() {
        let universe: Vec<EdgeId> = (0..9).collect();
        let stream = ContextStream::new(&universe, 50, 4);
        let mut sizes = std::collections::BTreeSet::new();
        for t in 0..stream.len() {
            let ctx = stream.context(t, &[2, 5]);
            assert!(!ctx.contains(&2) && !ctx.contains(&5));
            sizes.insert(ctx.len());
            let full = stream.context(t, &[]);
            assert!(full.len() <= 9);
        }
        assert!(sizes.len() > 3);
    }

    fn toy_oracle_graph() -> Graph {
        let pairs = [(0, 1), (1, 2), (2, 3), (1, 3), (3, 4)];
        let features = Array2::from_shape_fn((5, 2), |(i, j)| (i + 2 * j) as f64 * 0.25);
        Graph::from_undirected(5, &pairs, features, None, 3).unwrap()
    }

    #[test]
    fn oracle_matches_masked_forward_and_memoises() {
        let g = toy_oracle_graph();
        let w = ModelWeights::glorot(
            Architecture::Gcn,
            Dims {
                input: 2,
                hidden: 4,
                classes: 3,
            },
            2,
        );
        let oracle = GameOracle::for_target(&w, &g, 1, 2).unwrap();
        let sub = oracle.subgraph().clone();
        let lt = sub.local_index(1).unwrap();
        for coalition in [
            Coalition::new(),
            sub.edges().iter().copied().collect(),
            [0, 3].into_iter().collect(),
        ] {
            let expect =
                forward(&w, &mask_to_coalition(&sub, &coalition).unwrap()).unwrap()[[lt, oracle.target_class()]];
            let got = oracle.evaluate(&coalition).unwrap();
            assert!((got - expect).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&got));
        }
        let calls = oracle.model_calls();
        oracle.evaluate(&[3, 0].into_iter().collect()).unwrap();
        assert_eq!(oracle.model_calls(), calls);
        assert!(oracle.evaluate(&[999].into_iter().collect()).is_err());
    }

    #[test]
    fn boundary_degrees_come_from_the_parent_graph() {
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (2, 4)];
        let features = Array2::from_shape_fn((5, 2), |(i, j)| (1 + i * j) as f64 * 0.3);
        let g = Graph::from_undirected(5, &pairs, features.clone(), None, 3).unwrap();
        let w = ModelWeights::glorot(
            Architecture::Gcn,
            Dims {
                input: 2,
                hidden: 4,
                classes: 3,
            },
            7,
        );
        let oracle = GameOracle::for_target(&w, &g, 0, 2).unwrap();
        let universe = oracle.universe().to_vec();
        assert!(universe.len() < g.num_edges());
        for keep in [universe.clone(), vec![], vec![universe[0], universe[2]]] {
            // masking only removes universe edges outside the coalition
            let edges: Vec<_> = (0..g.num_edges())
                .filter(|e| keep.contains(e) || !universe.contains(e))
                .map(|e| g.edge(e))
                .collect();
            let masked = Graph::new(5, edges, features.clone(), None, 3).unwrap();
            let expect = forward(&w, &masked).unwrap()[[0, oracle.target_class()]];
            assert!((oracle.value(&keep) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn table_game_reproduces_values() {
        let game = |c: &[EdgeId]| c.iter().map(|&e| (e * e) as f64).sum::<f64>().sqrt();
        let table = TableGame::new(&game, &[4, 9, 2]).unwrap();
        assert_eq!(table.num_players(), 3);
        assert_eq!(table.value(&[9, 2]), game(&[2, 9]));
        assert_eq!(table.value(&[]), 0.0);
    }
}
