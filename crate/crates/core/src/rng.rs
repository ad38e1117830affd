//! Splittable deterministic randomness.
//!
//! A [`RandomStream`] is a master seed plus a path of split indices. The
//! generator for a stream is derived by folding the path into the seed with a
//! SplitMix64 finalizer and keying ChaCha20 with the result, so any two
//! streams with the same `(seed, path)` produce the same sequence no matter
//! which thread asks for it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Generator type handed out by [`RandomStream::rng`].
pub type StreamRng = ChaCha20Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    master_seed: u64,
    path: Vec<u64>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// The stream obtained by extending the path with `index`.
    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    fn key(&self) -> [u8; 32] {
        // Depth is mixed in so that (seed, [0]) and (seed, []) differ.
        let mut state = splitmix64(self.master_seed);
        for (depth, &idx) in self.path.iter().enumerate() {
            state = splitmix64(state ^ splitmix64(idx ^ (depth as u64).wrapping_mul(GOLDEN)));
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            state = splitmix64(state.wrapping_add(i as u64));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        key
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        ChaCha20Rng::from_seed(self.key())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(s: &RandomStream) -> Vec<u64> {
        let mut r = s.rng();
        (0..16).map(|_| r.random()).collect()
    }

    #[test]
    fn equal_paths_give_equal_sequences() {
        let a = RandomStream::new(7).child(3).child(1);
        let b = RandomStream::new(7).child(3).child(1);
        assert_eq!(draws(&a), draws(&b));
    }

    #[test]
    fn distinct_paths_differ() {
        let root = RandomStream::new(7);
        let mut seen = std::collections::HashSet::new();
        assert!(seen.insert(draws(&root)));
        for i in 0..50 {
            assert!(seen.insert(draws(&root.child(i))));
            assert!(seen.insert(draws(&root.child(i).child(0))));
        }
        assert_ne!(draws(&RandomStream::new(1)), draws(&RandomStream::new(2)));
    }

    #[test]
    fn sibling_streams_look_uncorrelated() {
        // correlation of uniforms across sibling streams
        let root = RandomStream::new(99);
        let (mut a, mut b) = (root.child(0).rng(), root.child(1).rng());
        let n = 100_000;
        let mut sxy = 0.0;
        for _ in 0..n {
            let x: f64 = a.random::<f64>() - 0.5;
            let y: f64 = b.random::<f64>() - 0.5;
            sxy += x * y;
        }
        // sd of the mean product is 1/(12 sqrt(n)) ~ 2.6e-4
        assert!((sxy / n as f64).abs() < 1.5e-3);
    }
}
