//! Seeded random streams.
//!
//! Every stochastic ingredient of a run (teacher, initial weights, feedback
//! matrices, data order, fresh samples) draws from its own named substream,
//! so any one of them can be reseeded while the others stay fixed. Two runs
//! that share the `"feedback"` substream but differ in `"init"` get the same
//! feedback matrices and different initial weights.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

/// A xoshiro256++ stream identified by `(seed, stream id)`.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: Xoshiro256PlusPlus,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        // the 256-bit state is four splitmix64 outputs of a (seed, stream) mix
        let mut sm = seed ^ splitmix64(&mut stream.clone());
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut sm).to_le_bytes());
        }
        let inner = Xoshiro256PlusPlus::from_seed(key);
        Rng {
            seed,
            stream,
            inner,
        }
    }

    /// Independent stream derived from this one's seed and a label.
    ///
    /// The result depends only on `(seed, stream, label)`, never on how many
    /// numbers have been drawn from `self`.
    pub fn substream(&self, label: &str) -> Rng {
        let mut key = self.stream.to_le_bytes().to_vec();
        key.extend_from_slice(label.as_bytes());
        Rng::with_stream(self.seed, fnv1a(&key))
    }

    /// Same as [`Rng::substream`] with an integer label, e.g. a trial index.
    pub fn substream_idx(&self, label: &str, idx: u64) -> Rng {
        self.substream(&format!("{label}#{idx}"))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substream_ignores_parent_position() {
        let a = Rng::new(3);
        let mut b = Rng::new(3);
        for _ in 0..17 {
            b.next_u64();
        }
        let mut sa = a.substream("feedback");
        let mut sb = b.substream("feedback");
        assert_eq!(sa.next_u64(), sb.next_u64());
    }

    #[test]
    fn labels_give_distinct_streams() {
        let root = Rng::new(3);
        let mut x = root.substream("init");
        let mut y = root.substream("feedback");
        let xs: Vec<u64> = (0..8).map(|_| x.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| y.next_u64()).collect();
        assert_ne!(xs, ys);
        let mut z = root.substream("init").substream("inner");
        assert_ne!(z.next_u64(), root.substream("init").next_u64());
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut r = Rng::new(1);
        let mut p = r.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
