use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lindyn::TimeGrid;

/// One realization of the bath noise `z*_t` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: TimeGrid,
    pub z_star: Vec<Complex64>,
    pub seed: u64,
}

/// Mixes a master seed and a stream index into an independent seed
/// (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Stationary complex Ornstein–Uhlenbeck noise with
/// `M[z_t z*_s] = (γ/2)e^{−γ|t−s|}` and `M[z_t z_s] = 0`, sampled exactly at
/// the grid points as a first-order autoregression started from the
/// stationary law.
pub fn sample_colored_noise(gamma: f64, grid: &TimeGrid, seed: u64) -> Result<NoisePath> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var = 0.5 * gamma;
    let a = (-gamma * grid.dt()).exp();
    let innovation = var * (1.0 - a * a);
    let mut z = complex_normal(&mut rng, var);
    let mut z_star = Vec::with_capacity(grid.len());
    z_star.push(z);
    for _ in 0..grid.n_steps() {
        z = z * a + complex_normal(&mut rng, innovation);
        z_star.push(z);
    }
    Ok(NoisePath { grid: *grid, z_star, seed })
}
