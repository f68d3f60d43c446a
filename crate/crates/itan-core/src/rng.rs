//! Deterministic random number generation.
//!
//! The generator is pinned to exact algorithms so that independent
//! implementations (in any language) can reproduce every stream bit for bit:
//!
//! * seeding / mixing: splitmix64,
//! * stream generation: xoshiro256**,
//! * bounded draw: `next_u64() % n`,
//! * shuffle: Fisher-Yates from the last index down,
//! * gaussian: Box-Muller (no spare caching, so the state is always the
//!   four xoshiro words).
//!
//! See `docs/FORMATS.md` for the algorithm statement and test vectors.

/// Advances a splitmix64 state and returns the next output.
pub fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash, used to fold string tags into seed material.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF29CE484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001B3);
    }
    h
}

/// Derives a sub-seed from a master seed and a domain tag.
///
/// `derive_seed(m, tag) = splitmix64_next(m XOR fnv1a64(tag))`. Independent
/// tags give statistically independent streams, which keeps per-video and
/// per-run generation parallelizable.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut s = master ^ fnv1a64(tag.as_bytes());
    splitmix64_next(&mut s)
}

/// xoshiro256** generator with splitmix64 seeding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    /// Seeds the four state words from four consecutive splitmix64 outputs.
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
            splitmix64_next(&mut sm),
        ];
        Rng { s }
    }

    /// Restores a generator from captured state words.
    pub fn from_state(s: [u64; 4]) -> Self {
        Rng { s }
    }

    /// Captures the full generator state (restorable via [`Rng::from_state`]).
    pub fn state(&self) -> [u64; 4] {
        self.s
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform f64 in [0, 1): the top 53 bits scaled by 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Panics if `n == 0`.
    ///
    /// Deliberately plain modulo (not rejection sampling): the pinned stream
    /// matters more here than the ~2^-40 bias at the sizes we draw.
    pub fn bounded(&mut self, n: u64) -> u64 {
        assert!(n > 0, "bounded(0)");
        self.next_u64() % n
    }

    /// Uniform f64 in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller. One draw consumes two uniforms; the
    /// second Box-Muller output is discarded so state stays reproducible.
    pub fn gaussian(&mut self) -> f64 {
        // Guard the log: map u1 = 0 to the smallest representable step.
        let mut u1 = self.next_f64();
        if u1 <= 0.0 {
            u1 = f64::MIN_POSITIVE;
        }
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// In-place Fisher-Yates shuffle, iterating from the last index down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.bounded(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Draws `k` distinct indices from `0..n`, returned sorted ascending.
    /// Implemented as a full shuffle of `0..n` followed by take-and-sort,
    /// so the stream consumption is independent of `k`.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "sample_distinct: k > n");
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx.truncate(k);
        idx.sort_unstable();
        idx
    }
}
