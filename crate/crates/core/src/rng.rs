//! Counter-based random sub-streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose key is
//! derived from the master seed and a path of counters (trial index, purpose
//! tag, device index, antenna index, ...). Any two paths give independent
//! streams, so results never depend on how trials are scheduled onto workers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Purpose tags used as the second element of sub-stream paths.
pub mod tag {
    pub const DEPLOY: u64 = 1;
    pub const SHADOWING: u64 = 2;
    pub const FADING: u64 = 3;
    pub const ASSIGN: u64 = 4;
    pub const BITS: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const CODEBOOK: u64 = 7;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream for `(master, path...)`.
pub fn substream(master: u64, path: &[u64]) -> SimRng {
    let mut state = master;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xD6E8_FEB8_6659_FD93).rotate_left(17) ^ acc;
        acc = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Circularly-symmetric complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}
