use nalgebra::DMatrix;
use num_complex::Complex64;

use super::TimeFn;
use crate::error::{Error, Result};
use crate::lindyn::{CMat, Generator, TimeGrid, I};
use crate::one_component::{phase_integral, MemoryKernel, PhaseAccumulator};

/// Central spin coupled to `N` bath spins, restricted to the single-exciton
/// subspace with basis `{|1 0…0⟩, |0 1_n 0…⟩}`.
#[derive(Clone)]
pub struct SpinBathSpec {
    /// Electron splitting `Ω(t)`.
    pub omega: TimeFn,
    /// Bath spin frequencies `ω_n`.
    pub omegas: Vec<f64>,
    /// Longitudinal couplings `J_n^z(t)`.
    pub jz: Vec<TimeFn>,
    /// Transverse couplings `J_n^⊥(t) = J_n^x(t) + J_n^y(t)`.
    pub jperp: Vec<TimeFn>,
    /// Intra-bath `B^z`, symmetric with zero diagonal.
    pub bz: Option<DMatrix<f64>>,
    /// Intra-bath flip-flop `B^x + B^y`, symmetric with zero diagonal.
    pub bxy: Option<DMatrix<f64>>,
}

impl std::fmt::Debug for SpinBathSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpinBathSpec")
            .field("omegas", &self.omegas)
            .field("bz", &self.bz)
            .field("bxy", &self.bxy)
            .finish_non_exhaustive()
    }
}

fn check_bath_matrix(b: &Option<DMatrix<f64>>, n: usize, name: &str) -> Result<()> {
    let Some(b) = b else { return Ok(()) };
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: b.nrows() });
    }
    for i in 0..n {
        if b[(i, i)] != 0.0 {
            return Err(Error::InvalidParameter(format!("{name} must have a zero diagonal")));
        }
        for j in 0..i {
            if (b[(i, j)] - b[(j, i)]).abs() > 1e-12 * (1.0 + b[(i, j)].abs()) {
                return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
            }
        }
    }
    Ok(())
}

impl SpinBathSpec {
    pub fn bath_size(&self) -> usize {
        self.omegas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bath_size();
        if n == 0 {
            return Err(Error::InvalidParameter("bath must contain at least one spin".into()));
        }
        for len in [self.jz.len(), self.jperp.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        check_bath_matrix(&self.bz, n, "B^z")?;
        check_bath_matrix(&self.bxy, n, "B^x + B^y")
    }

    fn has_inner_coupling(&self) -> bool {
        let nonzero = |b: &Option<DMatrix<f64>>| b.as_ref().is_some_and(|b| b.iter().any(|x| *x != 0.0));
        nonzero(&self.bz) || nonzero(&self.bxy)
    }

    /// The single-exciton Hamiltonian at `t`.
    pub fn hamiltonian(&self, t: f64) -> CMat {
        let n = self.bath_size();
        let mut h = CMat::zeros(n + 1, n + 1);
        let jz: Vec<f64> = self.jz.iter().map(|f| f(t)).collect();
        h[(0, 0)] = Complex64::new((self.omega)(t) - 0.5 * jz.iter().sum::<f64>(), 0.0);
        for k in 0..n {
            let jp = Complex64::new((self.jperp[k])(t), 0.0);
            h[(0, k + 1)] = jp;
            h[(k + 1, 0)] = jp;
            let mut d = self.omegas[k] - 0.5 * jz[k];
            if let Some(bz) = &self.bz {
                d -= 0.5 * (0..n).filter(|&m| m != k).map(|m| bz[(k, m)]).sum::<f64>();
            }
            h[(k + 1, k + 1)] = Complex64::new(d, 0.0);
            if let Some(bxy) = &self.bxy {
                for m in 0..n {
                    if m != k {
                        h[(k + 1, m + 1)] = Complex64::new(bxy[(k, m)], 0.0);
                    }
                }
            }
        }
        h
    }
}

/// `M(t) = −iH(t)` for the single-exciton subspace.
pub fn spin_bath_generator(spec: &SpinBathSpec) -> Result<Generator> {
    spec.validate()?;
    let spec = spec.clone();
    Ok(Generator::from_hamiltonian(spec.bath_size() + 1, move |t| spec.hamiltonian(t)))
}

/// Analytic kernel and phase for the target `|1 0…0⟩` without inner bath
/// coupling:
///
/// `g(t, s) = −Σ_n J_n^⊥(t) J_n^⊥(s) e^{−iω_n(t−s) + i∫ₛᵗ J_n^z/2}`,
/// `C(t) = ∫₀ᵗ [Ω − Σ_n J_n^z/2]`.
///
/// The kernel is stored as a sum of `N` rank-one terms.
pub fn spin_bath_kernel(spec: &SpinBathSpec, grid: &TimeGrid) -> Result<(MemoryKernel, PhaseAccumulator)> {
    spec.validate()?;
    if spec.has_inner_coupling() {
        return Err(Error::InvalidParameter(
            "the analytic kernel needs a diagonal bath block; use kernel_from_blocks".into(),
        ));
    }
    let mut terms = Vec::with_capacity(spec.bath_size());
    for k in 0..spec.bath_size() {
        let (w, jz, jp) = (spec.omegas[k], spec.jz[k].clone(), spec.jperp[k].clone());
        let xi = phase_integral(|t| -I * (w - 0.5 * jz(t)), grid, &[])?;
        let mut left = Vec::with_capacity(grid.len());
        let mut right = Vec::with_capacity(grid.len());
        for (idx, t) in grid.times().enumerate() {
            let rot = (-I * xi.c()[idx].re).exp();
            left.push(-jp(t) * rot);
            right.push(jp(t) * rot.conj());
        }
        terms.push((left, right));
    }
    let kernel = MemoryKernel::separable(*grid, terms)?;
    let s = spec.clone();
    let phase = phase_integral(
        move |t| -I * ((s.omega)(t) - 0.5 * s.jz.iter().map(|f| f(t)).sum::<f64>()),
        grid,
        &[],
    )?;
    Ok((kernel, phase))
}
