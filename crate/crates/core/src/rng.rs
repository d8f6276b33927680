//! Random streams.
//!
//! Every trial owns a ChaCha stream addressed by `(seed, trial index)`, so a
//! run is reproducible no matter how trials are spread over workers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

/// Stream reserved for the up-front channel draw in fixed-realization runs.
pub const CHANNEL_STREAM: u64 = u64::MAX;

/// Independent stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One draw from CN(0, `variance`): real and imaginary parts each carry
/// `variance / 2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> Vec<Complex64> {
    (0..len).map(|_| complex_gaussian(rng, variance)).collect()
}
