#![allow(dead_code)]

use graphgi_core::graph::EdgeId;
use graphgi_core::seed::rng_from_seed;
use graphgi_core::shapley::Game;
use rand::Rng;

/// A game given by a full value table over `players` (bit i = players[i]).
pub struct Table {
    pub players: Vec<EdgeId>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn random(players: Vec<EdgeId>, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let values = (0..1usize << players.len()).map(|_| rng.random::<f64>()).collect();
        Self { players, values }
    }

    pub fn from_fn(players: Vec<EdgeId>, f: impl Fn(&[EdgeId]) -> f64) -> Self {
        let values = (0..1usize << players.len())
            .map(|mask| f(&subset(&players, mask)))
            .collect();
        Self { players, values }
    }

    pub fn mask(&self, coalition: &[EdgeId]) -> usize {
        coalition.iter().fold(0, |m, e| {
            let i = self.players.iter().position(|p| p == e).expect("known player");
            m | (1 << i)
        })
    }

    pub fn v(&self, coalition: &[EdgeId]) -> f64 {
        self.values[self.mask(coalition)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            players: self.players.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

impl Game for Table {
    fn value(&self, coalition: &[EdgeId]) -> f64 {
        self.v(coalition)
    }
}

pub fn subset(items: &[EdgeId], mask: usize) -> Vec<EdgeId> {
    items
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &e)| e)
        .collect()
}

/// All orderings of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Shapley values of `blocks`, each block a player whose members join
/// together, by averaging marginal contributions over every join order.
pub fn order_shapley(game: &dyn Fn(&[EdgeId]) -> f64, blocks: &[Vec<EdgeId>]) -> Vec<f64> {
    let perms = permutations(blocks.len());
    let mut phi = vec![0.0; blocks.len()];
    for p in &perms {
        let mut present: Vec<EdgeId> = Vec::new();
        for &b in p {
            let before = game(&present);
            present.extend_from_slice(&blocks[b]);
            phi[b] += game(&present) - before;
        }
    }
    phi.iter().map(|s| s / perms.len() as f64).collect()
}

/// Every set partition of `items`, built by choosing the companions of the
/// first item and recursing on the rest.
pub fn set_partitions(items: &[EdgeId]) -> Vec<Vec<Vec<EdgeId>>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0];
    let rest = &items[1..];
    let mut out = Vec::new();
    for mask in 0..1usize << rest.len() {
        let mut block = vec![first];
        block.extend(subset(rest, mask));
        let remaining: Vec<EdgeId> = rest
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 0)
            .map(|(_, &e)| e)
            .collect();
        for mut tail in set_partitions(&remaining) {
            tail.insert(0, block.clone());
            out.push(tail);
        }
    }
    out
}
