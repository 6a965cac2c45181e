use num_complex::Complex64;

use super::leo::{block_split, LeoSpec};
use crate::error::{Error, Result};
use crate::lindyn::{CMat, Generator, I};

fn free_step(h: &CMat, tau: f64) -> CMat {
    (h * (-I * tau)).exp()
}

fn check(gen: &Generator, spec: &LeoSpec, n_kicks: usize, tau: f64) -> Result<()> {
    if n_kicks == 0 {
        return Err(Error::InvalidParameter("n_kicks must be positive".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("kick interval must be positive, got {tau}")));
    }
    if !gen.is_hermitian() {
        return Err(Error::InvalidParameter("parity kicks need a Hamiltonian generator".into()));
    }
    if gen.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), actual: spec.dim() });
    }
    Ok(())
}

/// Bang-bang evolution: before each of `n_kicks` free intervals of length
/// `tau` the ideal parity `2|A⟩⟨A| − I` is applied, i.e. the product of
/// `e^{−iH̃ τ} R̃ e^{−iH̃ τ} R̃ …`, with `H̃` sampled at each interval midpoint.
///
/// For odd `n_kicks` a closing kick is appended so the net control is the
/// identity and the result is comparable with uncontrolled evolution.
pub fn parity_kick_propagator(gen_rot: &Generator, spec: &LeoSpec, tau: f64, n_kicks: usize) -> Result<CMat> {
    check(gen_rot, spec, n_kicks, tau)?;
    let parity = spec.parity();
    let n = gen_rot.dim();
    let mut u = CMat::identity(n, n);
    for k in 0..n_kicks {
        let h = gen_rot.hamiltonian((k as f64 + 0.5) * tau)?;
        u = free_step(&h, tau) * &parity * u;
    }
    if n_kicks % 2 == 1 {
        u = &parity * u;
    }
    Ok(u)
}

/// Finite-width variant: each kick is `exp[−i(cẐ + H̃)δ]` with `Ẑ = 2|A⟩⟨A| − I`
/// and `cδ = π/2`, so that the control alone is `−iẐ`; the free interval is
/// `tau − δ`. The global phase `(−i)^n` of the kicks is removed.
pub fn finite_kick_propagator(
    gen_rot: &Generator,
    spec: &LeoSpec,
    tau: f64,
    n_kicks: usize,
    width: f64,
) -> Result<CMat> {
    check(gen_rot, spec, n_kicks, tau)?;
    if !(width > 0.0 && width < tau) {
        return Err(Error::InvalidParameter(format!("kick width must lie in (0, tau), got {width}")));
    }
    let z = spec.parity();
    let strength = std::f64::consts::FRAC_PI_2 / width;
    let n = gen_rot.dim();
    let mut u = CMat::identity(n, n);
    for k in 0..n_kicks {
        let t = k as f64 * tau;
        let h_kick = gen_rot.hamiltonian(t + 0.5 * width)?;
        let kick = free_step(&(&z * Complex64::new(strength, 0.0) + h_kick), width) * I;
        let h = gen_rot.hamiltonian(t + width + 0.5 * (tau - width))?;
        u = free_step(&h, tau - width) * kick * u;
    }
    if n_kicks % 2 == 1 {
        u = &z * u;
    }
    Ok(u)
}

/// Evolution under the block-diagonal part alone, `Π e^{−iH_d τ}`, on the
/// same midpoint samples as [`parity_kick_propagator`].
pub fn block_diagonal_propagator(gen_rot: &Generator, spec: &LeoSpec, tau: f64, n_steps: usize) -> Result<CMat> {
    check(gen_rot, spec, n_steps, tau)?;
    let n = gen_rot.dim();
    let mut u = CMat::identity(n, n);
    for k in 0..n_steps {
        let h = gen_rot.hamiltonian((k as f64 + 0.5) * tau)?;
        let (hd, _) = block_split(&h, spec.target());
        u = free_step(&hd, tau) * u;
    }
    Ok(u)
}

/// Frobenius norm of the difference between two propagators.
pub fn propagator_deviation(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm()
}
