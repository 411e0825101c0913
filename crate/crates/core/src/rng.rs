//! Deterministic random number generation.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood), implemented locally so
//! that datasets and initializations can be reproduced bit-for-bit from the
//! constants below in any language:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Streams for distinct purposes are derived from a base seed plus a purpose
//! tag: the sub-seed is FNV-1a (offset 0xcbf29ce484222325, prime 0x100000001b3)
//! over the seed's little-endian bytes followed by the tag bytes.

const GOLDEN_GAMMA: u64 = 0x9E3779B97F4A7C15;
const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(init: u64, bytes: &[u8]) -> u64 {
    let mut h = init;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic generator: identical seed, identical stream.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, state: seed }
    }

    /// The base seed this stream was created with (not the current state).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named purpose. Derivation uses the base
    /// seed, so the result does not depend on how many draws were taken.
    pub fn derive(&self, tag: &str) -> Rng {
        let h = fnv1a(FNV_OFFSET, &self.seed.to_le_bytes());
        Rng::new(fnv1a(h, tag.as_bytes()))
    }

    /// Independent stream for an indexed item (e.g. one dataset sample).
    pub fn derive_index(&self, index: u64) -> Rng {
        let h = fnv1a(FNV_OFFSET, &self.seed.to_le_bytes());
        Rng::new(fnv1a(h, &index.to_le_bytes()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Uses `next_u64() % n`; the modulo bias is
    /// negligible for the small ranges used here and keeps the scheme
    /// trivial to reproduce elsewhere.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller; consumes exactly two draws.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `count` distinct values sampled from 0..n, ascending.
    pub fn choose_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot choose {count} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        let mut picked: Vec<usize> = pool[..count].to_vec();
        picked.sort_unstable();
        picked
    }
}
