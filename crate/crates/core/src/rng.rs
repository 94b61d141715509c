//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by `(seed, block_id, column)`,
//! so any column of any sketch block can be regenerated on its own, in any
//! order, on any thread.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::fmath;
use crate::matrix::DenseMatrix;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic random stream.
pub struct Stream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, block_id: u64, column: u64) -> Self {
        let mut state = seed ^ splitmix64(&mut block_id.wrapping_mul(0xA24B_AED4_963E_E407));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(column);
        Self {
            rng,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `(0, 1]`, never zero so logarithms stay finite.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (Lemire's nearly-divisionless method).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let mut x = self.next_u64();
        let mut m = (x as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via the Box–Muller transform; the second variate of
    /// each pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = fmath::sqrt(-2.0 * fmath::ln(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * fmath::sin(theta));
        r * fmath::cos(theta)
    }

    /// Number of failures before the next success of a Bernoulli(p) trial.
    #[inline]
    pub fn geometric_gap(&mut self, ln_q: f64) -> u64 {
        let g = fmath::floor(fmath::ln(self.uniform_open0()) / ln_q);
        if g >= u64::MAX as f64 {
            u64::MAX
        } else {
            g as u64
        }
    }
}

/// `rows x cols` standard Gaussian matrix, one stream per column.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, block_id: u64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut s = Stream::new(seed, block_id, j as u64);
        m.col_mut(j).iter_mut().for_each(|v| *v = s.normal());
    }
    m
}

/// Gaussian test matrix with a fixed block id, for unit tests across modules.
#[doc(hidden)]
pub fn test_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    gaussian_matrix(rows, cols, seed, 0xDEAD_BEEF)
}
