//! Greedy interaction-driven explanation search and two baselines.
//!
//! The search seeds the coalition with the target's incident edge of
//! largest Shapley value, then repeatedly adds the frontier edge whose
//! addition gives the coalition the largest interaction strength, stopping
//! when the strength stops growing, the frontier empties, or the edge
//! budget is spent.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::ModelWeights;
use crate::graph::{adjacent_edges, frontier, l_hop_subgraph, Coalition, EdgeId, Graph, NodeId, Subgraph};
use crate::interaction::{strength_exhaustive, strength_with_stream, InteractionEstimate};
use crate::seed::{derive_seed, rng_from_seed};
use crate::shapley::{
    exact_shapley, marginal_samples, mean, ContextStream, Game, GameOracle, SamplingConfig, TableGame,
    EXACT_SHAPLEY_MAX_PLAYERS,
};

/// Which edges are candidates after the first step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrontierMode {
    /// Edges adjacent to any selected edge.
    Selection,
    /// Edges adjacent to the most recently selected edge.
    LastEdge,
}

/// How Shapley values and strengths are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Monte-Carlo estimates over shared context streams.
    Sampled,
    /// Every coalition of the L-hop universe enumerated; limited to
    /// universes of at most [`EXACT_SHAPLEY_MAX_PLAYERS`] edges.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainerConfig {
    pub hops: usize,
    /// Largest number of players (directed edges, or edge pairs with
    /// `tie_reverse_edges`) the explanation may contain.
    pub max_edges: usize,
    pub sampling: SamplingConfig,
    /// A step is accepted only if it raises the strength by more than this.
    pub min_gain: f64,
    /// Treat each edge and its reverse as one player.
    pub tie_reverse_edges: bool,
    pub frontier: FrontierMode,
    pub mode: SearchMode,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            hops: 2,
            max_edges: 10,
            sampling: SamplingConfig::default(),
            min_gain: 0.0,
            tie_reverse_edges: false,
            frontier: FrontierMode::Selection,
            mode: SearchMode::Sampled,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hops == 0 {
            return Err(Error::input("hops must be at least 1"));
        }
        if self.max_edges == 0 {
            return Err(Error::input("max_edges must be at least 1"));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::input("min_gain must be a non-negative number"));
        }
        self.sampling.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    FrontierExhausted,
    NoGain,
    MaxEdges,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::FrontierExhausted => "frontier-exhausted",
            TerminalReason::NoGain => "no-gain",
            TerminalReason::MaxEdges => "max-edges",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Graphgi,
    Random,
    TopkShapley,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Graphgi => "graphgi",
            Method::Random => "random",
            Method::TopkShapley => "topk-shapley",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphgi" => Ok(Method::Graphgi),
            "random" => Ok(Method::Random),
            "topk-shapley" => Ok(Method::TopkShapley),
            _ => Err(Error::input(format!(
                "unknown method '{s}' (expected graphgi, random or topk-shapley)"
            ))),
        }
    }
}

/// One accepted selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub edge: EdgeId,
    /// The reverse edge added together with `edge` under
    /// `tie_reverse_edges`.
    pub paired: Option<EdgeId>,
    /// The value that won the step: a Shapley value for the seed step (and
    /// for the top-k baseline), an interaction strength afterwards.
    pub score: f64,
    pub strength_before: f64,
    pub strength_after: f64,
    pub candidates: usize,
    pub frontier_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub target: NodeId,
    pub predicted_class: usize,
    pub method: Method,
    pub hops: usize,
    /// Directed edges in insertion order.
    pub selected: Coalition,
    pub trace: Vec<TraceStep>,
    pub terminal_reason: TerminalReason,
}

impl Explanation {
    /// Keep the first `players` trace steps.
    pub fn truncated(&self, players: usize) -> Explanation {
        let trace: Vec<TraceStep> = self.trace.iter().take(players).cloned().collect();
        let selected = trace
            .iter()
            .flat_map(|s| std::iter::once(s.edge).chain(s.paired))
            .collect();
        Explanation {
            selected,
            trace,
            ..self.clone()
        }
    }
}

/// Players of the search: every edge, or one representative per
/// edge/reverse pair.
struct Players {
    reverse: Option<HashMap<EdgeId, EdgeId>>,
    universe: Vec<EdgeId>,
}

impl Players {
    fn new(subgraph: &Subgraph<'_>, tie_reverse: bool) -> Self {
        if !tie_reverse {
            return Self {
                reverse: None,
                universe: subgraph.edges().to_vec(),
            };
        }
        let graph = subgraph.parent();
        let mut reverse = HashMap::new();
        let mut universe = Vec::new();
        for &e in subgraph.edges() {
            match graph.reverse_edge(e).filter(|&r| subgraph.contains_edge(r)) {
                Some(r) if r < e => {}
                Some(r) => {
                    reverse.insert(e, r);
                    universe.push(e);
                }
                None => universe.push(e),
            }
        }
        Self {
            reverse: Some(reverse),
            universe,
        }
    }

    fn partner(&self, e: EdgeId) -> Option<EdgeId> {
        self.reverse.as_ref().and_then(|r| r.get(&e).copied())
    }

    /// Representative of a directed edge.
    fn representative(&self, e: EdgeId, graph: &Graph) -> EdgeId {
        match (&self.reverse, graph.reverse_edge(e)) {
            (Some(r), Some(rev)) if r.get(&rev) == Some(&e) => rev,
            _ => e,
        }
    }
}

/// A game over representatives that switches each pair on together.
struct PairedGame<'g, G: ?Sized> {
    inner: &'g G,
    players: &'g Players,
}

impl<G: Game + ?Sized> Game for PairedGame<'_, G> {
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        let expanded: Vec<EdgeId> = coalition
            .iter()
            .flat_map(|&e| std::iter::once(e).chain(self.players.partner(e)))
            .collect();
        self.inner.value(&expanded)
    }
}

/// Lowest-id argmax; `None` on an empty slice.
fn argmax(scored: &[(EdgeId, f64)]) -> Option<(EdgeId, f64)> {
    scored.iter().copied().fold(None, |best, (e, s)| match best {
        Some((be, bs)) if bs > s || (bs == s && be < e) => Some((be, bs)),
        _ => Some((e, s)),
    })
}

/// Explain the model's full-graph prediction at `target`.
pub fn explain(weights: &ModelWeights, graph: &Graph, target: NodeId, config: &ExplainerConfig) -> Result<Explanation> {
    config.validate()?;
    let oracle = GameOracle::for_target(weights, graph, target, config.hops)?;
    let class = oracle.target_class();
    match config.mode {
        SearchMode::Sampled => explain_with_game(&oracle, oracle.subgraph(), class, config),
        SearchMode::Exhaustive => {
            let universe = oracle.universe();
            if universe.len() > EXACT_SHAPLEY_MAX_PLAYERS {
                return Err(Error::Capacity(format!(
                    "node {target}: {} edges in the {}-hop subgraph exceed the exhaustive limit of {EXACT_SHAPLEY_MAX_PLAYERS}",
                    universe.len(),
                    config.hops
                )));
            }
            let table = TableGame::new(&oracle, universe)?;
            explain_with_game(&table, oracle.subgraph(), class, config)
        }
    }
}

/// The greedy search against an arbitrary game on `subgraph`'s edges.
pub fn explain_with_game<G: Game + ?Sized>(
    game: &G,
    subgraph: &Subgraph<'_>,
    predicted_class: usize,
    config: &ExplainerConfig,
) -> Result<Explanation> {
    config.validate()?;
    let target = subgraph.target();
    let graph = subgraph.parent();
    let players = Players::new(subgraph, config.tie_reverse_edges);
    let paired = PairedGame {
        inner: game,
        players: &players,
    };
    let plain = GameRef(game);
    let game: &dyn Game = if config.tie_reverse_edges { &paired } else { &plain };
    let universe = &players.universe;
    let target_seed = derive_seed(config.sampling.seed, "target", target as u64);
    let step_seed = |k: usize| derive_seed(target_seed, "step", k as u64);

    let mut selected = Coalition::new();
    let mut chosen: Vec<EdgeId> = Vec::new();
    let mut trace = Vec::new();
    let candidates_of = |selected: &Coalition, chosen: &[EdgeId]| -> Vec<EdgeId> {
        let directed: BTreeSet<EdgeId> = match (config.frontier, chosen.last()) {
            (FrontierMode::LastEdge, Some(_)) => {
                let last = trace_last_edges(chosen.last().copied(), &players);
                adjacent_edges(subgraph, selected, last.into_iter())
            }
            _ => frontier(subgraph, selected, target),
        };
        let reps: BTreeSet<EdgeId> = directed.into_iter().map(|e| players.representative(e, graph)).collect();
        reps.into_iter().filter(|e| !chosen.contains(e)).collect()
    };
    let mut accept = |e: EdgeId, step: TraceStep, selected: &mut Coalition, chosen: &mut Vec<EdgeId>| {
        selected.insert(e);
        if let Some(p) = step.paired {
            selected.insert(p);
        }
        chosen.push(e);
        trace.push(step);
    };

    // seed step: largest Shapley value among the target's incident edges
    let first = candidates_of(&selected, &chosen);
    if first.is_empty() {
        return Ok(Explanation {
            target,
            predicted_class,
            method: Method::Graphgi,
            hops: subgraph.hops(),
            selected,
            trace,
            terminal_reason: TerminalReason::FrontierExhausted,
        });
    }
    let scored: Vec<(EdgeId, f64)> = match config.mode {
        SearchMode::Sampled => {
            let stream = ContextStream::new(universe, config.sampling.shapley_samples, step_seed(0));
            first
                .par_iter()
                .map(|&e| (e, mean(&marginal_samples(game, &[e], &stream))))
                .collect()
        }
        SearchMode::Exhaustive => {
            let phi: HashMap<EdgeId, f64> = exact_shapley(game, universe)?.into_iter().collect();
            first.iter().map(|&e| (e, phi[&e])).collect()
        }
    };
    let (seed_edge, seed_score) = argmax(&scored).expect("nonempty candidates");
    let step = TraceStep {
        edge: seed_edge,
        paired: players.partner(seed_edge),
        score: seed_score,
        strength_before: 0.0,
        strength_after: 0.0,
        candidates: first.len(),
        frontier_size: first.len(),
    };
    accept(seed_edge, step, &mut selected, &mut chosen);

    let mut strength = 0.0;
    let terminal_reason = loop {
        if chosen.len() >= config.max_edges {
            break TerminalReason::MaxEdges;
        }
        let cands = candidates_of(&selected, &chosen);
        if cands.is_empty() {
            break TerminalReason::FrontierExhausted;
        }
        let k = chosen.len();
        let estimate = |e: EdgeId, stream: Option<&ContextStream>| -> Result<InteractionEstimate> {
            let mut a = chosen.clone();
            a.push(e);
            match stream {
                Some(s) => Ok(strength_with_stream(game, &a, s)),
                None => strength_exhaustive(game, &a, universe),
            }
        };
        // the incumbent is re-scored on the step's own contexts so the gain
        // compares like with like
        let (scored, incumbent): (Vec<(EdgeId, f64)>, f64) = match config.mode {
            SearchMode::Sampled => {
                let stream = ContextStream::new(universe, config.sampling.interaction_samples, step_seed(k));
                let scored = cands
                    .par_iter()
                    .map(|&e| estimate(e, Some(&stream)).map(|est| (e, est.strength)))
                    .collect::<Result<_>>()?;
                (scored, strength_with_stream(game, &chosen, &stream).strength)
            }
            SearchMode::Exhaustive => {
                let scored = cands
                    .par_iter()
                    .map(|&e| estimate(e, None).map(|est| (e, est.strength)))
                    .collect::<Result<_>>()?;
                (scored, strength)
            }
        };
        let (best, best_strength) = argmax(&scored).expect("nonempty candidates");
        if !(best_strength - incumbent > config.min_gain) {
            break TerminalReason::NoGain;
        }
        let step = TraceStep {
            edge: best,
            paired: players.partner(best),
            score: best_strength,
            strength_before: incumbent,
            strength_after: best_strength,
            candidates: cands.len(),
            frontier_size: cands.len(),
        };
        accept(best, step, &mut selected, &mut chosen);
        strength = best_strength;
    };

    Ok(Explanation {
        target,
        predicted_class,
        method: Method::Graphgi,
        hops: subgraph.hops(),
        selected,
        trace,
        terminal_reason,
    })
}

fn trace_last_edges(last: Option<EdgeId>, players: &Players) -> Vec<EdgeId> {
    last.into_iter()
        .flat_map(|e| std::iter::once(e).chain(players.partner(e)))
        .collect()
}

struct GameRef<'g, G: ?Sized>(&'g G);

impl<G: Game + ?Sized> Game for GameRef<'_, G> {
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        self.0.value(coalition)
    }
}

/// Explain every target independently. Results keep the input order; a
/// failing target does not stop the batch.
pub fn explain_batch(
    weights: &ModelWeights,
    graph: &Graph,
    targets: &[NodeId],
    config: &ExplainerConfig,
) -> Vec<Result<Explanation>> {
    targets
        .par_iter()
        .map(|&t| explain(weights, graph, t, config))
        .collect()
}

fn baseline(
    target: NodeId,
    class: usize,
    hops: usize,
    method: Method,
    ranked: &[(EdgeId, f64)],
    budget: usize,
) -> Explanation {
    let total = ranked.len();
    let trace: Vec<TraceStep> = ranked
        .iter()
        .take(budget)
        .map(|&(edge, score)| TraceStep {
            edge,
            paired: None,
            score,
            strength_before: 0.0,
            strength_after: 0.0,
            candidates: total,
            frontier_size: total,
        })
        .collect();
    let terminal_reason = if budget >= total && budget > 0 {
        TerminalReason::FrontierExhausted
    } else {
        TerminalReason::MaxEdges
    };
    Explanation {
        target,
        predicted_class: class,
        method,
        hops,
        selected: trace.iter().map(|s| s.edge).collect(),
        trace,
        terminal_reason,
    }
}

/// Every L-hop edge in a seeded uniformly random order.
pub fn rank_random(subgraph: &Subgraph<'_>, seed: u64) -> Vec<EdgeId> {
    let mut rng = rng_from_seed(derive_seed(seed, "random-baseline", subgraph.target() as u64));
    let mut edges = subgraph.edges().to_vec();
    edges.shuffle(&mut rng);
    edges
}

/// Every L-hop edge by descending Monte-Carlo Shapley value (ties to the
/// lowest id), all estimated from one shared context stream.
pub fn rank_shapley<G: Game + ?Sized>(
    game: &G,
    subgraph: &Subgraph<'_>,
    config: &SamplingConfig,
) -> Vec<(EdgeId, f64)> {
    let seed = derive_seed(config.seed, "topk-baseline", subgraph.target() as u64);
    let universe = subgraph.edges();
    let stream = ContextStream::new(universe, config.shapley_samples, seed);
    let mut scored: Vec<(EdgeId, f64)> = universe
        .par_iter()
        .map(|&e| (e, mean(&marginal_samples(game, &[e], &stream))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// `budget` uniformly random L-hop edges.
pub fn baseline_random(
    weights: &ModelWeights,
    graph: &Graph,
    target: NodeId,
    config: &ExplainerConfig,
    budget: usize,
) -> Result<Explanation> {
    config.validate()?;
    let oracle = GameOracle::for_target(weights, graph, target, config.hops)?;
    let ranked: Vec<(EdgeId, f64)> = rank_random(oracle.subgraph(), config.sampling.seed)
        .into_iter()
        .map(|e| (e, 0.0))
        .collect();
    Ok(baseline(
        target,
        oracle.target_class(),
        config.hops,
        Method::Random,
        &ranked,
        budget,
    ))
}

/// The `budget` L-hop edges with the largest Shapley values.
pub fn baseline_topk_shapley(
    weights: &ModelWeights,
    graph: &Graph,
    target: NodeId,
    config: &ExplainerConfig,
    budget: usize,
) -> Result<Explanation> {
    config.validate()?;
    let oracle = GameOracle::for_target(weights, graph, target, config.hops)?;
    let ranked = rank_shapley(&oracle, oracle.subgraph(), &config.sampling);
    Ok(baseline(
        target,
        oracle.target_class(),
        config.hops,
        Method::TopkShapley,
        &ranked,
        budget,
    ))
}

/// Top-k selection against an arbitrary game, for injected test games.
pub fn topk_with_game<G: Game + ?Sized>(
    game: &G,
    subgraph: &Subgraph<'_>,
    predicted_class: usize,
    config: &ExplainerConfig,
    budget: usize,
) -> Explanation {
    let ranked = rank_shapley(game, subgraph, &config.sampling);
    baseline(
        subgraph.target(),
        predicted_class,
        subgraph.hops(),
        Method::TopkShapley,
        &ranked,
        budget,
    )
}

/// Rebuild the subgraph an explanation was computed on.
pub fn explanation_subgraph<'g>(graph: &'g Graph, explanation: &Explanation) -> Result<Subgraph<'g>> {
    l_hop_subgraph(graph, explanation.target, explanation.hops)
}
