//! Concrete models: a central spin in a spin bath, and an `n`-level atom in
//! a non-Markovian bosonic bath treated by linear quantum-state diffusion.

use std::sync::Arc;

mod noise;
mod qsd;
mod spin_bath;
mod trajectory;

pub use noise::{derive_seed, sample_colored_noise, NoisePath};
pub use qsd::{
    qsd_coefficients, qsd_coefficients_double_grid, qsd_fidelity_closed, qsd_fidelity_exact, FidelitySeries,
    QsdCoefficients, QsdSpec,
};
pub use spin_bath::{spin_bath_generator, spin_bath_kernel, SpinBathSpec};
pub use trajectory::{qsd_fidelity_mc, qsd_trajectory, QsdModel};

/// A real function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant_fn(x: f64) -> TimeFn {
    Arc::new(move |_| x)
}
