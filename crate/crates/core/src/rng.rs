//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 (RFC 8439 block function, 64-bit
//! counter) keyed by `seed_from_u64(seed)`. Each consumer reads its own
//! ChaCha stream id, so the factors of a synthetic matrix, the sampling
//! mask and the observation noise of one experiment are independent and do
//! not shift when another consumer draws more numbers.
//!
//! * uniform reals: top 53 bits of a `u64`;
//! * bounded integers: Lemire's multiply-shift with rejection (unbiased);
//! * standard normals: Box–Muller, both outputs of a pair used in order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Fixed stream offsets. Changing these changes every generated dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    LeftFactor = 1,
    RightFactor = 2,
    Mask = 3,
    Noise = 4,
    PowerIteration = 5,
}

pub struct StreamRng {
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream as u64);
        Self {
            inner,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }
}
