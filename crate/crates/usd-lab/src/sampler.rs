//! Dynamically weighted categorical sampling backed by a Fenwick tree.
//!
//! Draws index `i` with probability `w_i / sum(w)` and supports `O(log k)`
//! increment/decrement, so the engine pays `O(log k)` per interaction rather
//! than `O(k)`.

use rand::Rng;

use crate::{Error, Result};

/// Fenwick (binary indexed) tree over non-negative integer weights.
#[derive(Debug, Clone)]
pub struct WeightedIndexSampler {
    /// 1-based partial sums; `tree[i]` covers the range `i - lowbit(i) .. i`.
    tree: Vec<u64>,
    len: usize,
    total: u64,
    /// Largest power of two <= len, precomputed for the descent.
    top_bit: usize,
}

impl WeightedIndexSampler {
    /// Build from initial weights. Errors if every weight is zero.
    pub fn new(weights: &[u64]) -> Result<Self> {
        let len = weights.len();
        let mut tree = vec![0u64; len + 1];
        let mut total = 0u64;
        for (i, &w) in weights.iter().enumerate() {
            total = total
                .checked_add(w)
                .ok_or_else(|| Error::InvalidArgument("sampler weights overflow u64".into()))?;
            tree[i + 1] = w;
        }
        for i in 1..=len {
            let parent = i + (i & i.wrapping_neg());
            if parent <= len {
                tree[parent] += tree[i];
            }
        }
        if total == 0 {
            return Err(Error::EmptySampler);
        }
        let mut top_bit = 1usize;
        while top_bit * 2 <= len {
            top_bit *= 2;
        }
        Ok(Self {
            tree,
            len,
            total,
            top_bit,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Sum of the weights of slots `0..idx`.
    fn prefix(&self, mut idx: usize) -> u64 {
        let mut sum = 0u64;
        while idx > 0 {
            sum += self.tree[idx];
            idx -= idx & idx.wrapping_neg();
        }
        sum
    }

    /// Current weight of slot `i`.
    pub fn weight(&self, i: usize) -> u64 {
        debug_assert!(i < self.len);
        self.prefix(i + 1) - self.prefix(i)
    }

    pub fn increment(&mut self, i: usize, by: u64) {
        debug_assert!(i < self.len);
        self.total += by;
        let mut idx = i + 1;
        while idx <= self.len {
            self.tree[idx] += by;
            idx += idx & idx.wrapping_neg();
        }
    }

    pub fn decrement(&mut self, i: usize, by: u64) {
        debug_assert!(i < self.len);
        debug_assert!(self.weight(i) >= by, "weight underflow at slot {i}");
        self.total -= by;
        let mut idx = i + 1;
        while idx <= self.len {
            self.tree[idx] -= by;
            idx += idx & idx.wrapping_neg();
        }
    }

    /// Slot containing prefix position `target` (`target < total`): the
    /// smallest `i` with `prefix(i + 1) > target`.
    pub fn select(&self, target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0usize;
        let mut remaining = target;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= self.len && self.tree[next] <= remaining {
                remaining -= self.tree[next];
                pos = next;
            }
            step /= 2;
        }
        pos
    }

    /// Draw an index with probability proportional to its weight.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.total == 0 {
            return Err(Error::EmptySampler);
        }
        Ok(self.select(rng.random_range(0..self.total)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_slot_always_drawn() {
        let s = WeightedIndexSampler::new(&[5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(s.draw(&mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn all_zero_rejected() {
        assert!(matches!(
            WeightedIndexSampler::new(&[0, 0, 0]),
            Err(Error::EmptySampler)
        ));
    }

    #[test]
    fn select_matches_linear_scan() {
        let weights = [3u64, 0, 7, 1, 0, 4, 2];
        let s = WeightedIndexSampler::new(&weights).unwrap();
        let mut expect = Vec::new();
        for (i, &w) in weights.iter().enumerate() {
            for _ in 0..w {
                expect.push(i);
            }
        }
        for (t, &want) in expect.iter().enumerate() {
            assert_eq!(s.select(t as u64), want, "target {t}");
        }
    }

    #[test]
    fn frequencies_match_weights() {
        // weights (1,1,2) => (0.25, 0.25, 0.5), then decrement slot 2 to 1.
        let mut s = WeightedIndexSampler::new(&[1, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let reps = 1_000_000u64;
        let mut counts = [0u64; 3];
        for _ in 0..reps {
            counts[s.draw(&mut rng).unwrap()] += 1;
        }
        let sigma_quarter = (reps as f64 * 0.25 * 0.75).sqrt();
        assert!((counts[0] as f64 - reps as f64 * 0.25).abs() < 3.0 * sigma_quarter);
        assert!((counts[1] as f64 - reps as f64 * 0.25).abs() < 3.0 * sigma_quarter);
        let sigma_half = (reps as f64 * 0.25).sqrt();
        assert!((counts[2] as f64 - reps as f64 * 0.5).abs() < 3.0 * sigma_half);

        s.decrement(2, 1);
        assert_eq!(s.total(), 3);
        let mut counts = [0u64; 3];
        for _ in 0..reps {
            counts[s.draw(&mut rng).unwrap()] += 1;
        }
        let third = reps as f64 / 3.0;
        let sigma_third = (reps as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - third).abs() < 3.0 * sigma_third);
        }
    }

    #[test]
    fn increments_and_weights_round_trip() {
        let mut s = WeightedIndexSampler::new(&[3, 0, 7, 1]).unwrap();
        assert_eq!(s.weight(0), 3);
        assert_eq!(s.weight(1), 0);
        assert_eq!(s.weight(2), 7);
        s.increment(1, 5);
        s.decrement(2, 7);
        assert_eq!(s.weight(1), 5);
        assert_eq!(s.weight(2), 0);
        assert_eq!(s.total(), 3 + 5 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            assert_ne!(s.draw(&mut rng).unwrap(), 2);
        }
    }
}
