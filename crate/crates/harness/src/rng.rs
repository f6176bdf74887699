//! Per-trial random streams.
//!
//! The ChaCha key is derived from `(seed, experiment, n)` and the trial index
//! selects the stream, so every trial can be replayed on its own regardless
//! of scheduling.

use matchlab_core::transport::EmpiricalSample;
use matchlab_core::{DomainGeometry, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trial_rng(seed: u64, experiment: u64, n: usize, trial: usize) -> ChaCha8Rng {
    let mut state = seed;
    splitmix64(&mut state);
    state ^= experiment.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut state);
    state ^= (n as u64).wrapping_mul(0xa076_1d64_78bd_642f);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial as u64);
    rng
}

/// `n` i.i.d. uniform points of the fundamental domain.
pub fn sampler<R: Rng>(domain: DomainGeometry, n: usize, rng: &mut R) -> EmpiricalSample {
    let points = (0..n)
        .map(|_| {
            if domain.dimension() == 1 {
                Point::d1(rng.random())
            } else {
                Point::d2(rng.random(), rng.random())
            }
        })
        .collect();
    EmpiricalSample::new(domain, points).expect("uniform draws lie in [0, 1)")
}
