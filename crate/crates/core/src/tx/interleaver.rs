//! S-random bit interleaver.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

const MAX_ATTEMPTS: u64 = 1_000;
const SWAP_ATTEMPTS_PER_ENTRY: usize = 200;

/// A bijective permutation used as bit interleaver.
///
/// `interleave(x)[k] = x[perm[k]]`. Any two positions `k`, `k'` with
/// `0 < |k - k'| < spread` satisfy `|perm[k] - perm[k']| >= spread`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    inverse: Vec<usize>,
    spread: usize,
}

/// Spread used by [`Interleaver::s_random`]: `floor(sqrt(size / 2))`.
pub fn default_spread(size: usize) -> usize {
    ((size as f64) / 2.0).sqrt().floor() as usize
}

impl Interleaver {
    /// Builds an S-random interleaver with spread [`default_spread`].
    pub fn s_random(size: usize, seed: u64) -> Result<Self> {
        Self::with_spread(size, default_spread(size), seed)
    }

    /// Seeded construction. A linear permutation `k -> (a k + b) mod size`
    /// with `a >= spread` and `a (spread - 1) <= size - spread` already meets
    /// the constraint; it is then randomized by rejection-sampled swaps that
    /// keep both touched positions valid. When no such `a` exists, plain
    /// greedy S-random passes are tried on successive ChaCha streams.
    pub fn with_spread(size: usize, spread: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("interleaver size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strides: Vec<usize> = (spread.max(1)..size.max(2))
            .filter(|&a| gcd(a, size) == 1 && a * spread.saturating_sub(1) + spread <= size)
            .collect();
        if let Some(&stride) = strides.choose(&mut rng) {
            let offset = rng.random_range(0..size);
            let mut perm: Vec<usize> = (0..size).map(|k| (stride * k + offset) % size).collect();
            for _ in 0..SWAP_ATTEMPTS_PER_ENTRY * size {
                let k = rng.random_range(0..size);
                let j = rng.random_range(0..size);
                if k == j {
                    continue;
                }
                perm.swap(k, j);
                if !(valid_at(&perm, k, spread) && valid_at(&perm, j, spread)) {
                    perm.swap(k, j);
                }
            }
            return Ok(Self::from_permutation_unchecked(perm, spread));
        }
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt + 1);
            if let Some(perm) = try_build(size, spread, &mut rng) {
                return Ok(Self::from_permutation_unchecked(perm, spread));
            }
        }
        Err(Error::Config(format!(
            "no S-random permutation of size {size} with spread {spread} found"
        )))
    }

    fn from_permutation_unchecked(perm: Vec<usize>, spread: usize) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        Interleaver {
            perm,
            inverse,
            spread,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn spread(&self) -> usize {
        self.spread
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len(), "interleaver length mismatch");
        self.perm.iter().map(|&p| x[p]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.perm.len(), "interleaver length mismatch");
        self.inverse.iter().map(|&k| y[k]).collect()
    }

    /// Smallest `|perm[k] - perm[k']|` over pairs with `0 < |k - k'| < window`.
    pub fn min_spread_within(&self, window: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for k in 0..self.perm.len() {
            for d in 1..window.min(self.perm.len() - k) {
                let dist = self.perm[k].abs_diff(self.perm[k + d]);
                best = Some(best.map_or(dist, |b| b.min(dist)));
            }
        }
        best
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn valid_at(perm: &[usize], k: usize, spread: usize) -> bool {
    let lo = (k + 1).saturating_sub(spread);
    let hi = (k + spread).min(perm.len());
    (lo..hi).all(|q| q == k || perm[q].abs_diff(perm[k]) >= spread)
}

fn try_build(size: usize, spread: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..size).collect();
    remaining.shuffle(rng);
    let mut perm = Vec::with_capacity(size);
    let window = spread.saturating_sub(1);
    while !remaining.is_empty() {
        let recent = &perm[perm.len().saturating_sub(window)..];
        let pos = remaining
            .iter()
            .position(|&c: &usize| recent.iter().all(|&p: &usize| c.abs_diff(p) >= spread))?;
        perm.push(remaining.swap_remove(pos));
    }
    Some(perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_one_is_identity() {
        let il = Interleaver::s_random(1, 3).unwrap();
        assert_eq!(il.permutation(), &[0]);
    }

    #[test]
    fn size_zero_rejected() {
        assert!(Interleaver::s_random(0, 3).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = Interleaver::s_random(500, 9).unwrap();
        let b = Interleaver::s_random(500, 9).unwrap();
        let c = Interleaver::s_random(500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spread_constraint_holds_for_3600() {
        let il = Interleaver::s_random(3600, 7).unwrap();
        assert_eq!(il.spread(), 42);
        let mut seen = vec![false; 3600];
        for &p in il.permutation() {
            assert!(!seen[p]);
            seen[p] = true;
        }
        assert!(il.min_spread_within(il.spread()).unwrap() >= il.spread());
    }

    #[test]
    fn small_sizes_are_valid_permutations() {
        for size in 1..60 {
            let il = Interleaver::s_random(size, size as u64).unwrap();
            let mut sorted = il.permutation().to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..size).collect::<Vec<_>>());
            if let Some(d) = il.min_spread_within(il.spread()) {
                assert!(d >= il.spread(), "size {size}");
            }
        }
    }

    #[test]
    fn randomized_away_from_linear_start() {
        let il = Interleaver::s_random(3600, 7).unwrap();
        let p = il.permutation();
        let stride = (p[1] + 3600 - p[0]) % 3600;
        let linear = (0..3600)
            .filter(|&k| p[k] == (p[0] + stride * k) % 3600)
            .count();
        assert!(linear < 360, "{linear} positions still on a lattice");
    }
}
