//! Interaction values and interaction strength of edge coalitions.
//!
//! For a coalition `A` inside a universe `U`, every context `S ⊆ U \ A`
//! contributes the shared-context term
//!
//! ```text
//! b(S) = [v(S ∪ A) − v(S)] − Σ_{e ∈ A} [v(S ∪ {e}) − v(S)]
//! ```
//!
//! Averaging `b` under the Shapley context distribution gives the
//! interaction value `B(A)`; splitting the samples by sign gives the
//! positive and negative interaction masses whose difference is the
//! strength.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::shapley::{members, sorted_unique, ContextStream, Game, SamplingConfig};

/// Universe size limit for [`interaction_exact`] and
/// [`strength_partition_exact`].
pub const EXACT_INTERACTION_MAX_UNIVERSE: usize = 16;
/// Coalition size limit for [`strength_partition_exact`].
pub const PARTITION_MAX_COALITION: usize = 5;
/// Context-set size limit (`|U \ A|`) for [`strength_exhaustive`].
pub const EXHAUSTIVE_MAX_CONTEXT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionEstimate {
    /// `positive_sum − negative_sum`, never negative.
    pub strength: f64,
    /// `positive_sum + negative_sum`.
    pub net: f64,
    pub positive_sum: f64,
    /// Never positive.
    pub negative_sum: f64,
    /// Contexts the estimate is built from.
    pub samples: usize,
}

impl InteractionEstimate {
    pub const ZERO: Self = Self {
        strength: 0.0,
        net: 0.0,
        positive_sum: 0.0,
        negative_sum: 0.0,
        samples: 0,
    };

    fn from_parts(positive_sum: f64, negative_sum: f64, samples: usize) -> Self {
        Self {
            strength: positive_sum - negative_sum,
            net: positive_sum + negative_sum,
            positive_sum,
            negative_sum,
            samples,
        }
    }

    /// Sign split of per-context terms, `Σ weight·b / denominator`.
    fn from_terms(terms: &[f64], weights: impl Fn(usize) -> f64, denominator: f64) -> Self {
        let (mut pos, mut neg) = (0.0, 0.0);
        for (i, &b) in terms.iter().enumerate() {
            if b > 0.0 {
                pos += weights(i) * b;
            } else if b < 0.0 {
                neg += weights(i) * b;
            }
        }
        Self::from_parts(pos / denominator, neg / denominator, terms.len())
    }
}

/// Validated, sorted coalition and the remaining universe.
fn split(coalition: &[EdgeId], universe: &[EdgeId]) -> Result<(Vec<EdgeId>, Vec<EdgeId>)> {
    let a = sorted_unique(coalition);
    if a.is_empty() {
        return Err(Error::input("coalition must contain at least one edge"));
    }
    let u = sorted_unique(universe);
    if let Some(e) = a.iter().find(|e| u.binary_search(e).is_err()) {
        return Err(Error::input(format!("coalition edge {e} is not in the universe")));
    }
    let others = u.into_iter().filter(|e| a.binary_search(e).is_err()).collect();
    Ok((a, others))
}

fn with(context: &[EdgeId], extra: &[EdgeId]) -> Vec<EdgeId> {
    let mut v = Vec::with_capacity(context.len() + extra.len());
    v.extend_from_slice(context);
    v.extend_from_slice(extra);
    v
}

/// The shared-context interaction term `b(S)` of coalition `a`.
pub fn interaction_term<G: Game + ?Sized>(game: &G, a: &[EdgeId], context: &[EdgeId]) -> f64 {
    let base = game.value(context);
    let joint = game.value(&with(context, a)) - base;
    let singles: f64 = a.iter().map(|&e| game.value(&with(context, &[e])) - base).sum();
    joint - singles
}

/// `|S|!(m−|S|)!/(m+1)!` for `|S| = 0..=m`: the probability that a group
/// player in a universe of `m` other players has exactly `|S|` specific
/// predecessors.
fn group_weights(m: usize) -> Vec<f64> {
    let mut binom = 1.0f64;
    (0..=m)
        .map(|k| {
            let w = 1.0 / ((m + 1) as f64 * binom);
            binom = binom * (m - k) as f64 / (k + 1) as f64;
            w
        })
        .collect()
}

/// Sampled strength from a shared context stream.
pub fn strength_with_stream<G: Game + ?Sized>(
    game: &G,
    coalition: &[EdgeId],
    stream: &ContextStream,
) -> InteractionEstimate {
    let a = sorted_unique(coalition);
    if a.len() < 2 {
        return InteractionEstimate {
            samples: stream.len(),
            ..InteractionEstimate::ZERO
        };
    }
    let terms: Vec<f64> = (0..stream.len())
        .into_par_iter()
        .map(|t| interaction_term(game, &a, &stream.context(t, &a)))
        .collect();
    InteractionEstimate::from_terms(&terms, |_| 1.0, terms.len() as f64)
}

/// Sampled interaction strength with `config.interaction_samples` contexts.
pub fn strength_mc<G: Game + ?Sized>(
    game: &G,
    coalition: &[EdgeId],
    universe: &[EdgeId],
    config: &SamplingConfig,
) -> Result<InteractionEstimate> {
    config.validate()?;
    let (a, _) = split(coalition, universe)?;
    let stream = ContextStream::new(universe, config.interaction_samples, config.seed);
    Ok(strength_with_stream(game, &a, &stream))
}

/// Strength with every context of `U \ A` enumerated and weighted by its
/// Shapley probability. Its `net` is the exact interaction value.
pub fn strength_exhaustive<G: Game + ?Sized>(
    game: &G,
    coalition: &[EdgeId],
    universe: &[EdgeId],
) -> Result<InteractionEstimate> {
    let (a, others) = split(coalition, universe)?;
    let m = others.len();
    if m > EXHAUSTIVE_MAX_CONTEXT {
        return Err(Error::Capacity(format!(
            "{m} context edges exceed the enumeration limit of {EXHAUSTIVE_MAX_CONTEXT}"
        )));
    }
    if a.len() < 2 {
        return Ok(InteractionEstimate {
            samples: 1 << m,
            ..InteractionEstimate::ZERO
        });
    }
    let weights = group_weights(m);
    let terms: Vec<f64> = (0..1usize << m)
        .into_par_iter()
        .map(|mask| interaction_term(game, &a, &members(&others, mask)))
        .collect();
    Ok(InteractionEstimate::from_terms(
        &terms,
        |mask| weights[mask.count_ones() as usize],
        1.0,
    ))
}

/// Shapley value of `group` acting as one player against `others`, by
/// enumeration.
fn group_shapley<G: Game + ?Sized>(game: &G, group: &[EdgeId], others: &[EdgeId], weights: &[f64]) -> f64 {
    (0..1usize << others.len())
        .map(|mask| {
            let ctx = members(others, mask);
            weights[mask.count_ones() as usize] * (game.value(&with(&ctx, group)) - game.value(&ctx))
        })
        .sum()
}

fn exact_guard(universe_len: usize) -> Result<()> {
    if universe_len > EXACT_INTERACTION_MAX_UNIVERSE {
        return Err(Error::Capacity(format!(
            "universe of {universe_len} edges exceeds the enumeration limit of {EXACT_INTERACTION_MAX_UNIVERSE}"
        )));
    }
    Ok(())
}

/// Exact interaction value `B(A) = φ([A]) − Σ_{e∈A} φ(e)`, where `[A]` plays
/// against `U \ A` and each `e` against `U \ A` as well.
pub fn interaction_exact<G: Game + ?Sized>(game: &G, coalition: &[EdgeId], universe: &[EdgeId]) -> Result<f64> {
    let (a, others) = split(coalition, universe)?;
    exact_guard(a.len() + others.len())?;
    let w = group_weights(others.len());
    let joint = group_shapley(game, &a, &others, &w);
    let singles: f64 = a.iter().map(|&e| group_shapley(game, &[e], &others, &w)).sum();
    Ok(joint - singles)
}

/// Every partition of `items` into nonempty blocks (restricted-growth
/// strings).
pub(crate) fn partitions(items: &[EdgeId]) -> Vec<Vec<Vec<EdgeId>>> {
    fn go(items: &[EdgeId], i: usize, blocks: &mut Vec<Vec<EdgeId>>, out: &mut Vec<Vec<Vec<EdgeId>>>) {
        if i == items.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[i]);
            go(items, i + 1, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![items[i]]);
        go(items, i + 1, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    go(items, 0, &mut Vec::new(), &mut out);
    out
}

/// Partition-optimised bounds: `B_max` / `B_min` are the largest / smallest
/// `Σ_{C∈Ω} φ([C]) − Σ_{e∈A} φ(e)` over all partitions `Ω` of `A`, every
/// block playing against `U \ A`. Reported as `positive_sum = B_max`,
/// `negative_sum = B_min` and `strength = B_max − B_min`; since the
/// all-singletons partition scores zero, `B_max ≥ 0 ≥ B_min`.
pub fn strength_partition_exact<G: Game + ?Sized>(
    game: &G,
    coalition: &[EdgeId],
    universe: &[EdgeId],
) -> Result<InteractionEstimate> {
    let (a, others) = split(coalition, universe)?;
    if a.len() > PARTITION_MAX_COALITION {
        return Err(Error::Capacity(format!(
            "coalition of {} edges exceeds the partition limit of {PARTITION_MAX_COALITION}",
            a.len()
        )));
    }
    exact_guard(a.len() + others.len())?;
    let w = group_weights(others.len());
    let singles: f64 = a.iter().map(|&e| group_shapley(game, &[e], &others, &w)).sum();
    let (mut b_max, mut b_min) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut count = 0;
    for omega in partitions(&a) {
        let total: f64 = omega.iter().map(|c| group_shapley(game, c, &others, &w)).sum::<f64>() - singles;
        b_max = b_max.max(total);
        b_min = b_min.min(total);
        count += 1;
    }
    Ok(InteractionEstimate::from_parts(b_max, b_min, count))
}
