//! Deterministic random streams.
//!
//! Every random quantity in the simulation harness is drawn from a
//! counter-mode stream addressed by `(master_seed, stream_id)`, so any
//! replicate can be regenerated in isolation and results are identical
//! regardless of thread count or evaluation order.
//!
//! Stream layout:
//! * stream 0 is reserved for one-off design generation;
//! * replicate `r` owns streams `4r+1` (training noise), `4r+2`
//!   (test design), `4r+3` (test noise).
//!
//! Because noise is drawn as standard normals and scaled by sigma at the
//! point of use, runs at different noise levels share the same underlying
//! uniforms (common random numbers).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stats::normal_quantile;

/// Stream reserved for design generation (drawn once, outside replicates).
pub const DESIGN_STREAM: u64 = 0;

const REPLICATE_STRIDE: u64 = 4;

/// What a replicate-scoped stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    TrainingNoise,
    TestDesign,
    TestNoise,
}

/// Stream id owned by `replicate` for the given purpose.
pub fn replicate_stream(replicate: u64, purpose: StreamPurpose) -> u64 {
    let offset = match purpose {
        StreamPurpose::TrainingNoise => 1,
        StreamPurpose::TestDesign => 2,
        StreamPurpose::TestNoise => 3,
    };
    replicate
        .checked_mul(REPLICATE_STRIDE)
        .and_then(|v| v.checked_add(offset))
        .expect("replicate index overflow")
}

/// One addressed substream of the master generator.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    master_seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RngStream {
            rng,
            master_seed,
            stream_id,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw strictly inside (0, 1): the top 53 bits of a u64,
    /// offset by half a grid step. Never returns 0 or 1, so it is safe
    /// to feed through the normal quantile.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via inverse-CDF transform. Inverse sampling keeps
    /// one draw per variate, which is what makes the common-random-number
    /// coupling across noise levels exact.
    pub fn standard_normal(&mut self) -> f64 {
        let u = self.uniform();
        normal_quantile(u).expect("uniform() stays inside (0, 1)")
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Fill a fresh vector with standard normals.
    pub fn standard_normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.standard_normal()).collect()
    }

    /// Integer in [0, bound) by widening multiply. Bias is below 2^-64 per
    /// draw; determinism, not exact uniformity, is the requirement here.
    pub fn index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "index bound must be positive");
        let wide = self.rng.next_u64() as u128 * bound as u128;
        (wide >> 64) as usize
    }

    /// Fisher-Yates permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}
