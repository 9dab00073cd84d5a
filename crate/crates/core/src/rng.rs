//! Seeded randomness: named substreams and counter-based random fields.
//!
//! Query batteries draw their real-valued entries from keyed fields rather
//! than from a sequential stream, so any entry of any query can be recomputed
//! from `(seed, block, row, coord)` alone. This lets a whole battery be laid
//! out before a single oracle call and lets two algorithms share randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bound on the magnitude of Gaussian query entries; larger draws are redrawn.
pub const GAUSSIAN_BOUND: f64 = 6.0;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Uniform in the open interval (0, 1).
#[inline]
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Hash a string label into a stream tag.
pub fn tag(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

/// Derive an independent seed for a named sub-purpose of a master seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    mix(&[seed, tag(label)])
}

/// A ChaCha stream for a named sub-purpose of a master seed.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// Standard normal entries keyed by `(block, row, coord)`, truncated to
/// `|x| <= GAUSSIAN_BOUND` by redrawing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianField {
    seed: u64,
}

impl GaussianField {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry(&self, block: u64, row: u64, coord: usize) -> f64 {
        let mut attempt = 0u64;
        loop {
            let h = mix(&[self.seed, block, row, coord as u64, attempt]);
            let u1 = unit_open(h);
            let u2 = unit_open(splitmix64(h));
            let x = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            if x.abs() <= GAUSSIAN_BOUND {
                return x;
            }
            attempt += 1;
        }
    }

    pub fn vector(&self, block: u64, row: u64, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.entry(block, row, j)).collect()
    }
}

/// Uniform(0,1) entries keyed by `(block, row, coord)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformField {
    seed: u64,
}

impl UniformField {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn entry(&self, block: u64, row: u64, coord: usize) -> f64 {
        unit_open(mix(&[self.seed, block, row, coord as u64]))
    }
}

/// Uniform ±1 entries keyed by `(row, coord)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignField {
    seed: u64,
}

impl SignField {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn entry(&self, row: u64, coord: usize) -> f64 {
        if mix(&[self.seed, row, coord as u64]) >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn vector(&self, row: u64, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.entry(row, j)).collect()
    }
}
