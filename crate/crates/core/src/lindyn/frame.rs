use super::generator::MaxAbs;
use std::fmt;
use std::sync::Arc;

use super::generator::{CMat, Generator, I};
use super::grid::TimeGrid;
use crate::error::{Error, Result};

type MatrixFn = dyn Fn(f64) -> CMat + Send + Sync;

/// Time-dependent change of frame `U(t)`, with `|ψ̃⟩ = U|ψ⟩`.
#[derive(Clone)]
pub struct FramePath {
    unitary: Arc<MatrixFn>,
    derivative: Option<Arc<MatrixFn>>,
    fd_step: f64,
}

impl fmt::Debug for FramePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FramePath")
            .field("analytic_derivative", &self.derivative.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl FramePath {
    /// Frame whose derivative is taken by symmetric finite differences.
    pub fn new<U>(unitary: U) -> Self
    where
        U: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        Self {
            unitary: Arc::new(unitary),
            derivative: None,
            fd_step: 1e-5,
        }
    }

    pub fn with_derivative<U, D>(unitary: U, derivative: D) -> Self
    where
        U: Fn(f64) -> CMat + Send + Sync + 'static,
        D: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        Self {
            unitary: Arc::new(unitary),
            derivative: Some(Arc::new(derivative)),
            fd_step: 1e-5,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::with_derivative(move |_| CMat::identity(n, n), move |_| CMat::zeros(n, n))
    }

    /// Step used for the central difference when no analytic derivative exists.
    pub fn fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn unitary(&self, t: f64) -> CMat {
        (self.unitary)(t)
    }

    pub fn derivative(&self, t: f64) -> CMat {
        match &self.derivative {
            Some(d) => d(t),
            None => {
                let h = self.fd_step;
                ((self.unitary)(t + h) - (self.unitary)(t - h)) / nalgebra::Complex::new(2.0 * h, 0.0)
            }
        }
    }

    /// Largest entry of `U U† − I` at `t`.
    pub fn unitarity_defect(&self, t: f64) -> f64 {
        let u = self.unitary(t);
        let n = u.nrows();
        (&u * u.adjoint() - CMat::identity(n, n)).max_abs()
    }
}

/// Hamiltonian seen in the moving frame: `H̃ = U H U† + i U̇ U†`.
///
/// Unitarity of the frame is checked at every point of `grid` (10⁻¹⁰).
pub fn rotate_generator(h: &Generator, frame: &FramePath, grid: &TimeGrid) -> Result<Generator> {
    if !h.is_hermitian() {
        return Err(Error::InvalidParameter(
            "frame rotation needs a Hamiltonian-form generator".into(),
        ));
    }
    for t in grid.times() {
        let u = frame.unitary(t);
        if u.nrows() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                actual: u.nrows(),
            });
        }
        let deviation = frame.unitarity_defect(t);
        if deviation > 1e-10 {
            return Err(Error::NonUnitaryFrame { t, deviation });
        }
    }
    let h = h.clone();
    let frame = frame.clone();
    Ok(Generator::from_hamiltonian(h.dim(), move |t| {
        let u = frame.unitary(t);
        let ud = u.adjoint();
        let ham = h.eval_unchecked(t) * I;
        &u * ham * &ud + frame.derivative(t) * ud * I
    }))
}
