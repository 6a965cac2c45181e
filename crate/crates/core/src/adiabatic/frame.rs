use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use super::eigenpath::EigenPath;
use crate::control::PulseSequence;
use crate::error::{Error, Result};
use crate::lindyn::{CMat, FramePath, Generator, I};
use crate::one_component::{MemoryKernel, PhaseAccumulator};

/// Step used for finite differences off the path grid.
const FD_STEP: f64 = 1e-5;

/// `Ḣ(t)` by a central difference of the generator's Hamiltonian.
pub fn hamiltonian_derivative(gen: &Generator, step: f64) -> impl Fn(f64) -> CMat + Send + Sync + 'static {
    let gen = gen.clone();
    move |t| {
        let plus = gen.eval_unchecked(t + step);
        let minus = gen.eval_unchecked(t - step);
        (plus - minus) * (I / Complex64::new(2.0 * step, 0.0))
    }
}

fn phase_factors(theta: &DVector<f64>) -> Vec<Complex64> {
    theta.iter().map(|&x| (I * x).exp()).collect()
}

/// Nonadiabatic couplings `A_mn = −⟨E_m|Ė_n⟩` at `t`; off-diagonal entries
/// from `⟨E_m|Ḣ|E_n⟩/(E_n − E_m)`, diagonal ones by differencing the
/// gauge-matched eigenvectors.
fn couplings(path: &EigenPath, hdot: &CMat, t: f64) -> Result<(DVector<f64>, CMat)> {
    let (e, v) = path.eigen_at(t)?;
    let (_, vp) = path.eigen_at(t + FD_STEP)?;
    let (_, vm) = path.eigen_at(t - FD_STEP)?;
    let n = e.len();
    let hd = v.adjoint() * hdot * &v;
    let mut a = CMat::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            if m == k {
                let d = (vp.column(k) - vm.column(k)) / Complex64::new(2.0 * FD_STEP, 0.0);
                a[(m, m)] = -v.column(m).dotc(&d);
            } else {
                let gap = e[k] - e[m];
                if gap.abs() == 0.0 {
                    return Err(Error::LevelCrossing { t, gap: 0.0, threshold: 0.0 });
                }
                a[(m, k)] = -hd[(m, k)] / gap;
            }
        }
    }
    Ok((e, a))
}

/// Generator for the adiabatic-frame amplitudes `ψ_n`, defined by
/// `X(t) = Σ ψ_n(t) e^{−iθ_n(t)} |E_n(t)⟩`:
/// `M_mn = −e^{i(θ_m − θ_n)} ⟨E_m|Ė_n⟩`.
///
/// `hdot` supplies `Ḣ(t)`; see [`hamiltonian_derivative`] for a numerical one.
/// The returned generator evaluates the eigenbasis at any `t` and is NaN
/// (hence rejected by `Generator::eval`) where the decomposition fails.
pub fn adiabatic_generator<F>(path: &EigenPath, hdot: F) -> Generator
where
    F: Fn(f64) -> CMat + Send + Sync + 'static,
{
    let path = path.clone();
    let n = path.dim();
    Generator::new(n, move |t| {
        let (Ok((_, a)), Ok(theta)) = (couplings(&path, &hdot(t), t), path.phases_at(t)) else {
            return CMat::from_element(n, n, Complex64::new(f64::NAN, 0.0));
        };
        let ph = phase_factors(&theta);
        CMat::from_fn(n, n, |m, k| ph[m] * ph[k].conj() * a[(m, k)])
    })
}

/// The frame `U(t) = Σ e^{iθ_n(t)} |E_n(t₀)⟩⟨E_n(t)|` in which the lab state
/// has components `ψ_n` along `|E_n(t₀)⟩`.
pub fn adiabatic_frame(path: &EigenPath) -> FramePath {
    let path = path.clone();
    let b0 = path.states(0).clone();
    FramePath::new(move |t| {
        let (Ok((_, v)), Ok(theta)) = (path.eigen_at(t), path.phases_at(t)) else {
            return CMat::from_element(b0.nrows(), b0.ncols(), Complex64::new(f64::NAN, 0.0));
        };
        let ph = phase_factors(&theta);
        let mut scaled = b0.clone();
        for (mut col, p) in scaled.column_iter_mut().zip(&ph) {
            col *= *p;
        }
        scaled * v.adjoint()
    })
    .fd_step(FD_STEP)
}

/// The reduced problem for the adiabatic ground-state amplitude of a two-level
/// path.
#[derive(Debug, Clone)]
pub struct TwoLevelReduction {
    pub kernel: MemoryKernel,
    pub phase: PhaseAccumulator,
}

/// Rank-one kernel `g(t, s) = R(t) e^{∫ₛᵗ D} W(s)` with
/// `R = −e^{i(θ₀−θ₁)}⟨E₀|Ė₁⟩`, `W = −e^{i(θ₁−θ₀)}⟨E₁|Ė₀⟩`, `D = −⟨E₁|Ė₁⟩`,
/// and the phase of `h = −⟨E₀|Ė₀⟩`, all from the stored path data.
///
/// Only the gap `θ₁ − θ₀` enters, so shifting the trace of `H` changes
/// nothing.
pub fn two_level_kernel(path: &EigenPath) -> Result<TwoLevelReduction> {
    if path.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: path.dim() });
    }
    let grid = *path.grid();
    let dt = grid.dt();
    let mut left = Vec::with_capacity(grid.len());
    let mut right = Vec::with_capacity(grid.len());
    let mut h = Vec::with_capacity(grid.len());
    let mut d_int = Complex64::new(0.0, 0.0);
    let mut d_prev = Complex64::new(0.0, 0.0);
    for k in 0..grid.len() {
        let theta = path.phases(k);
        let rel = (I * (theta[0] - theta[1])).exp();
        let r = -rel * path.coupling(k, 0, 1);
        let w = -rel.conj() * path.coupling(k, 1, 0);
        let d = -path.coupling(k, 1, 1);
        if k > 0 {
            d_int += (d_prev + d) * (0.5 * dt);
        }
        d_prev = d;
        left.push(r * d_int.exp());
        right.push((-d_int).exp() * w);
        h.push(-path.coupling(k, 0, 0));
    }
    Ok(TwoLevelReduction {
        kernel: MemoryKernel::separable(grid, vec![(left, right)])?,
        phase: PhaseAccumulator::from_samples(&grid, h)?,
    })
}

/// `H(t) → [1 + c(t)] H(t)`: eigenvectors unchanged, eigenvalues scaled.
pub fn scaled_control(gen: &Generator, pulses: &PulseSequence) -> Generator {
    let pulses = Arc::new(pulses.clone());
    gen.map(
        move |t, m| m * Complex64::new(1.0 + pulses.value(t), 0.0),
        gen.is_hermitian(),
    )
}
