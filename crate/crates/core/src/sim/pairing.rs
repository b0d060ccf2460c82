use rand::seq::SliceRandom;
use rand::Rng;

use super::network::NodeId;

/// Randomly pairs the members of `pool`. With an odd pool one uniformly
/// chosen member is left out. Pairs are returned as `(a, b)` with `a < b`.
pub fn random_pairs<R: Rng + ?Sized>(pool: &[NodeId], rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut pool = pool.to_vec();
    let mut out = Vec::with_capacity(pool.len() / 2);
    pair_up(&mut pool, rng, &mut out);
    out.into_iter()
        .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect()
}

/// Shuffles `pool` in place and pairs consecutive entries. A uniform shuffle
/// makes every perfect matching equally likely, and the unpaired last entry
/// of an odd pool is a uniform pick.
pub(crate) fn pair_up<T: Copy, R: Rng + ?Sized>(pool: &mut [T], rng: &mut R, out: &mut Vec<(T, T)>) {
    out.clear();
    if pool.len() < 2 {
        return;
    }
    pool.shuffle(rng);
    out.extend(pool.chunks_exact(2).map(|c| (c[0], c[1])));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use std::collections::HashSet;

    #[test]
    fn two_nodes_make_one_pair() {
        let mut rng = stream(0, Purpose::Simulation, 0);
        assert_eq!(random_pairs(&[2, 1], &mut rng), vec![(1, 2)]);
    }

    #[test]
    fn lone_node_is_dropped() {
        let mut rng = stream(0, Purpose::Simulation, 0);
        assert!(random_pairs(&[7], &mut rng).is_empty());
        assert!(random_pairs(&[], &mut rng).is_empty());
    }

    #[test]
    fn odd_pool_drops_each_member_uniformly() {
        let mut rng = stream(42, Purpose::Simulation, 0);
        let pool = [1u64, 2, 3, 4, 5];
        let trials = 10_000;
        let mut dropped = [0usize; 6];
        for _ in 0..trials {
            let pairs = random_pairs(&pool, &mut rng);
            assert_eq!(pairs.len(), 2);
            let covered: HashSet<u64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            assert_eq!(covered.len(), 4);
            let lone = pool.iter().find(|x| !covered.contains(x)).unwrap();
            dropped[*lone as usize] += 1;
        }
        for &count in &dropped[1..] {
            let freq = count as f64 / trials as f64;
            assert!((freq - 0.2).abs() <= 0.02, "drop frequency {freq}");
        }
    }

    #[test]
    fn matchings_of_four_are_uniform() {
        // three perfect matchings of {1,2,3,4}
        let mut rng = stream(5, Purpose::Simulation, 0);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..9_000 {
            let mut pairs = random_pairs(&[1, 2, 3, 4], &mut rng);
            pairs.sort();
            *counts.entry(pairs).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3);
        for &c in counts.values() {
            assert!((c as f64 / 9_000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }
}
