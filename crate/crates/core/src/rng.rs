//! Counter-based random substreams.
//!
//! Every draw is addressed by `(master seed, stream, trial, vector)`: the
//! seed and stream select a ChaCha key, the trial selects the ChaCha stream
//! and the vector index selects a word offset. Any trial can therefore be
//! regenerated in isolation, in any order, on any worker.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexVector;

/// Words reserved per vector; far more than any `N` in use needs.
const WORDS_PER_VECTOR: u128 = 1 << 32;

/// Independent purposes that draw from the same master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Null ensembles used to set thresholds.
    Calibration,
    /// Ensembles used to measure Pfa / Pd against a fixed threshold.
    Evaluation,
    /// Synthetic data cubes.
    Cube,
    /// Anything else (tests, ad-hoc sampling).
    Auxiliary(u64),
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Calibration => 0x43414c49,
            Stream::Evaluation => 0x4556414c,
            Stream::Cube => 0x43554245,
            Stream::Auxiliary(x) => 0x4155_5800_0000_0000 ^ x,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(master_seed: u64, stream: Stream) -> [u8; 32] {
    let mut state = master_seed ^ stream.tag().rotate_left(17);
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// Generator positioned at the start of one vector's substream.
pub fn substream(master_seed: u64, stream: Stream, trial: u64, vector: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(master_seed, stream));
    rng.set_stream(trial);
    rng.set_word_pos(vector as u128 * WORDS_PER_VECTOR);
    rng
}

/// Circular complex normal with unit variance: `(x + j y) / √2`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

/// `n` i.i.d. unit-variance circular complex normals.
pub fn white_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexVector {
    (0..n).map(|_| complex_normal(rng)).collect()
}
