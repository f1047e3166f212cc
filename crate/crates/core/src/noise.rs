//! Seeded noise. Every random draw in the toolkit goes through
//! [`rng_from_seed`] so outputs are reproducible from a single `u64`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Identifier recorded in output metadata next to the seed.
pub const RNG_ALGORITHM: &str = "chacha20";

pub type NoiseRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> NoiseRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Total complex noise standard deviation for a signal of amplitude
/// `reference` at `snr_db` (power ratio). Infinite SNR gives zero.
pub fn noise_sigma(snr_db: f64, reference: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        reference * 10f64.powf(-snr_db / 20.0)
    }
}

/// Add circular complex Gaussian noise with total standard deviation `sigma`
/// (`sigma/√2` per quadrature).
pub fn add_complex_noise(samples: &mut [Complex64], sigma: f64, rng: &mut NoiseRng) {
    if sigma == 0.0 {
        return;
    }
    let per = sigma / std::f64::consts::SQRT_2;
    for s in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += Complex64::new(re * per, im * per);
    }
}

/// Multiply each value by `1 + rel·ε`, `ε ~ N(0, 1)`.
pub fn multiplicative_noise(values: &mut [f64], rel: f64, rng: &mut NoiseRng) {
    if rel == 0.0 {
        return;
    }
    for v in values {
        let e: f64 = StandardNormal.sample(rng);
        *v *= 1.0 + rel * e;
    }
}
