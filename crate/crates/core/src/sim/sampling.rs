use rand::Rng;

/// Selects each of `0..n` independently with probability `p`.
///
/// Sparse probabilities are handled by drawing geometric gaps between
/// successes, so the cost is proportional to the number of selected indices
/// rather than to `n`. Both branches produce exactly Bernoulli(p) draws.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BernoulliSelector {
    p: f64,
    ln_q: f64,
}

const SPARSE_BELOW: f64 = 0.1;

impl BernoulliSelector {
    pub fn new(p: f64) -> Self {
        BernoulliSelector {
            p,
            ln_q: (-p).ln_1p(),
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        if n == 0 || self.p <= 0.0 {
            return;
        }
        if self.p >= 1.0 {
            out.extend(0..n as u32);
            return;
        }
        if self.p >= SPARSE_BELOW {
            for i in 0..n as u32 {
                if rng.random::<f64>() < self.p {
                    out.push(i);
                }
            }
            return;
        }
        // P(gap >= k) = P(U <= q^k) = q^k
        let mut i = 0usize;
        loop {
            let u = 1.0 - rng.random::<f64>();
            let gap = (u.ln() / self.ln_q).floor();
            if gap >= (n - i) as f64 {
                break;
            }
            i += gap as usize;
            out.push(i as u32);
            i += 1;
            if i >= n {
                break;
            }
        }
    }
}

#[inline]
pub(crate) fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn frequency(p: f64, n: usize, trials: usize) -> (Vec<f64>, f64) {
        let mut rng = stream(11, Purpose::Simulation, 0);
        let sel = BernoulliSelector::new(p);
        let mut hits = vec![0usize; n];
        let mut out = Vec::new();
        let mut total = 0usize;
        for _ in 0..trials {
            sel.select(n, &mut rng, &mut out);
            assert!(out.windows(2).all(|w| w[0] < w[1]));
            total += out.len();
            for &i in &out {
                hits[i as usize] += 1;
            }
        }
        (
            hits.iter().map(|&h| h as f64 / trials as f64).collect(),
            total as f64 / (trials * n) as f64,
        )
    }

    #[test]
    fn sparse_and_dense_rates_match_p() {
        for &p in &[0.003, 0.04, 0.3, 0.9] {
            let (per_index, overall) = frequency(p, 50, 20_000);
            let se = (p * (1.0 - p) / (50.0 * 20_000.0)).sqrt();
            assert!((overall - p).abs() < 4.0 * se, "p={p} got {overall}");
            // no positional bias: first and last index look the same
            let se1 = (p * (1.0 - p) / 20_000.0).sqrt();
            assert!((per_index[0] - p).abs() < 5.0 * se1);
            assert!((per_index[49] - p).abs() < 5.0 * se1);
        }
    }

    #[test]
    fn degenerate_probabilities() {
        let mut rng = stream(1, Purpose::Simulation, 0);
        let mut out = vec![7];
        BernoulliSelector::new(0.0).select(10, &mut rng, &mut out);
        assert!(out.is_empty());
        BernoulliSelector::new(1.0).select(4, &mut rng, &mut out);
        assert_eq!(out, vec![0, 1, 2, 3]);
        BernoulliSelector::new(0.5).select(0, &mut rng, &mut out);
        assert!(out.is_empty());
    }
}
