//! Deterministic random numbers.
//!
//! Every trace in the simulator derives from one `u64` seed through this
//! generator, so it is spelled out exactly and reproducible in any language:
//!
//! * **Step** (SplitMix64): `state += 0x9E3779B97F4A7C15` (wrapping), then the
//!   output is `mix(state)`.
//! * **mix**: `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//!   z *= 0x94D049BB133111EB; z ^= z >> 31` (wrapping multiplies).
//! * **uniform(lo, hi)**: `span = hi - lo + 1` as `u64` (0 means the full
//!   64-bit range); `zone = (u64::MAX / span) * span`; draw outputs until one
//!   is `< zone`, return `lo + x % span`.
//! * **split(label)**: child state is
//!   `mix(state ^ mix(label ^ 0xD1B54A32D192ED03))`. The parent is not advanced.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 generator. `Copy`, so a snapshot replays the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform integer in the closed range `[lo, hi]`.
    pub fn uniform(&mut self, lo: i64, hi: i64) -> Result<i64> {
        if lo > hi {
            return Err(Error::EmptyRange { lo, hi });
        }
        let span = (hi as u64).wrapping_sub(lo as u64).wrapping_add(1);
        if span == 0 {
            return Ok(self.next_u64() as i64);
        }
        let zone = (u64::MAX / span) * span;
        loop {
            let x = self.next_u64();
            if x < zone {
                return Ok((lo as u64).wrapping_add(x % span) as i64);
            }
        }
    }

    /// Pure form of [`Rng::uniform`]: returns the value and the advanced generator.
    pub fn next_uniform(self, lo: i64, hi: i64) -> Result<(i64, Rng)> {
        let mut next = self;
        let v = next.uniform(lo, hi)?;
        Ok((v, next))
    }

    /// Uniform index in `0..n`; `n` must be non-zero.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over empty range");
        self.uniform(0, n as i64 - 1).expect("non-empty range") as usize
    }

    /// Uniform `f64` in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Child stream keyed by `label`. Does not advance `self`.
    pub fn split(&self, label: u64) -> Rng {
        Rng {
            state: mix64(self.state ^ mix64(label ^ SPLIT_SALT)),
        }
    }
}
