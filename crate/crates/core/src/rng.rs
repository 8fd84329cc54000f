//! Keyed random streams.
//!
//! Every random quantity is drawn from a ChaCha stream whose key is derived
//! from a root seed and a path such as `(trial, experiment, sub-experiment,
//! step)`. Streams never depend on the order in which other streams were
//! consumed, so Monte Carlo trials can run in any order or in parallel.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Stream labels used as the second path component.
pub mod label {
    pub const EXP1: u64 = 1;
    pub const EXP2: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const INPUT: u64 = 4;
    pub const INITIAL: u64 = 5;
    pub const CLOSED_LOOP: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of keys into one 64-bit key.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .enumerate()
        .fold(splitmix64(seed), |acc, (depth, &k)| {
            splitmix64(acc ^ splitmix64(k.wrapping_add((depth as u64 + 1) << 56)))
        })
}

/// Opens the stream addressed by `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let key = derive_key(seed, path);
    let mut bytes = [0u8; 32];
    let mut state = key;
    for chunk in bytes.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Uniform sample from the closed Euclidean ball `{w : ‖w‖₂² ≤ radius_sq}`.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius_sq: f64) -> DVector<f64> {
    if dim == 0 || radius_sq <= 0.0 {
        return DVector::zeros(dim);
    }
    let mut dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm();
    if norm == 0.0 {
        return DVector::zeros(dim);
    }
    let u: f64 = rng.random();
    let radius = radius_sq.sqrt() * u.powf(1.0 / dim as f64);
    dir *= radius / norm;
    // rounding can push the squared norm a few ulps past the bound
    while dir.norm_squared() > radius_sq {
        dir *= 1.0 - 1e-15;
    }
    dir
}

/// Vector with entries uniform in `[0, 1)`.
pub fn uniform_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random::<f64>())
}
