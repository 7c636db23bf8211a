//! Counter-based noise streams.
//!
//! Every complex Gaussian used by synthesis is a pure function of
//! `(seed, realization, block, row, column)`: the ChaCha8 key encodes the
//! first three, the stream id is the row (receive node) and each column
//! consumes exactly four 32-bit words. Results therefore do not depend on
//! thread scheduling or iteration order.

use core::f64::consts::TAU;

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::C64;

/// Noise block tags (one per independent field of W).
pub mod block {
    pub const UP_UP: u32 = 0;
    pub const UP_DOWN: u32 = 1;
    pub const DOWN_UP: u32 = 2;
    pub const DOWN_DOWN: u32 = 3;
    pub const PLANAR: u32 = 4;
    pub const RAY_PHASE: u32 = 5;
    pub const INJECTION: u32 = 6;
}

/// Key for one realization and noise block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseKey {
    pub seed: u64,
    pub realization: u64,
    pub block: u32,
}

impl NoiseKey {
    pub fn new(seed: u64, realization: u64, block: u32) -> Self {
        Self { seed, realization, block }
    }

    fn bytes(&self) -> [u8; 32] {
        let mut k = [0u8; 32];
        k[..8].copy_from_slice(&self.seed.to_le_bytes());
        k[8..16].copy_from_slice(&self.realization.to_le_bytes());
        k[16..20].copy_from_slice(&self.block.to_le_bytes());
        k[20..32].copy_from_slice(b"planewave-w1");
        k
    }

    /// Sequential reader for row `row`, positioned at column 0.
    pub fn row(&self, row: u64) -> NoiseRow {
        let mut rng = ChaCha8Rng::from_seed(self.bytes());
        rng.set_stream(row);
        NoiseRow { rng }
    }

    /// Random access to the draw at `(row, col)`.
    pub fn at(&self, row: u64, col: u64) -> C64 {
        let mut r = self.row(row);
        r.rng.set_word_pos(4 * col as u128);
        r.next_cn()
    }

    /// Generic RNG derived from this key (for non-grid draws).
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.bytes());
        rng.set_stream(stream);
        rng
    }
}

/// Sequential CN(0,1) draws along one row.
pub struct NoiseRow {
    rng: ChaCha8Rng,
}

impl NoiseRow {
    /// Next circularly-symmetric complex Gaussian with `E|w|² = 1`.
    pub fn next_cn(&mut self) -> C64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        box_muller(a, b)
    }

    /// Uniform phase `e^{iφ}`; consumes the same four words as a draw.
    pub fn next_phase(&mut self) -> C64 {
        let _ = self.rng.next_u64();
        let b = self.rng.next_u64();
        let (s, c) = (TAU * unit_open(b)).sin_cos();
        C64::new(c, s)
    }
}

/// `(0, 1]` uniform from the top 53 bits.
fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller with unit complex variance: `√(−ln u) · e^{2πiv}`.
fn box_muller(a: u64, b: u64) -> C64 {
    let r = (-unit_open(a).ln()).sqrt();
    let (s, c) = (TAU * unit_open(b)).sin_cos();
    C64::new(r * c, r * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_random_access_agree() {
        let key = NoiseKey::new(7, 3, block::UP_UP);
        let mut row = key.row(11);
        for col in 0..40 {
            assert_eq!(row.next_cn(), key.at(11, col));
        }
    }

    #[test]
    fn keys_separate_streams() {
        let a = NoiseKey::new(1, 0, 0).at(0, 0);
        assert_ne!(a, NoiseKey::new(2, 0, 0).at(0, 0));
        assert_ne!(a, NoiseKey::new(1, 1, 0).at(0, 0));
        assert_ne!(a, NoiseKey::new(1, 0, 1).at(0, 0));
        assert_ne!(a, NoiseKey::new(1, 0, 0).at(1, 0));
    }

    #[test]
    fn unit_complex_variance_and_circularity() {
        let key = NoiseKey::new(42, 0, 0);
        let n = 200_000;
        let mut row = key.row(0);
        let (mut p, mut pc) = (0.0, C64::new(0.0, 0.0));
        for _ in 0..n {
            let w = row.next_cn();
            p += w.norm_sqr();
            pc += w * w;
        }
        p /= n as f64;
        pc /= n as f64;
        assert!((p - 1.0).abs() < 0.01, "power {p}");
        assert!(pc.norm() < 0.01, "pseudo-covariance {pc}");
    }
}
