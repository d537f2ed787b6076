#![allow(dead_code)]

use cakecut::allocation::{Allocation, Interval};
use cakecut::CakeInstance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Arbitrary allocation: random cut points, each interval to a random agent.
pub fn random_allocation(n: usize, rng: &mut ChaCha8Rng) -> Allocation {
    let parts = rng.gen_range(n..=3 * n);
    let mut cuts: Vec<f64> = (1..parts).map(|_| rng.gen_range(0.0..1.0)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut pieces = vec![Vec::new(); n];
    let mut start = 0.0;
    for end in cuts.into_iter().chain([1.0]) {
        pieces[rng.gen_range(0..n)].push(Interval::new(start, end));
        start = end;
    }
    Allocation::new(pieces).unwrap()
}

/// Connected, peak-ordered and non-wasteful allocation with random cut points.
/// Needs a common slope so that supports are ordered like peaks.
pub fn random_ordered_allocation(instance: &CakeInstance, rng: &mut ChaCha8Rng) -> Allocation {
    let order = instance.peak_order();
    let mut cuts = Vec::new();
    let mut prev: f64 = 0.0;
    for w in order.windows(2) {
        let lo = prev.max(instance.agent(w[1]).left());
        let hi = instance.agent(w[0]).right().max(lo);
        let c = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        cuts.push(c);
        prev = c;
    }
    Allocation::from_cuts(&cuts, &order).unwrap()
}

/// Same pieces with owners shuffled.
pub fn shuffled_owners(allocation: &Allocation, rng: &mut ChaCha8Rng) -> Allocation {
    let mut pieces = allocation.pieces().to_vec();
    pieces.shuffle(rng);
    Allocation::new(pieces).unwrap()
}
