use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

type MatrixFn = dyn Fn(f64) -> CMat + Send + Sync;

/// Time-dependent dynamic matrix `M(t)` of a linear system `∂ₜX = M X`.
///
/// When `hermitian` is set the generator has the Schrödinger form
/// `M(t) = −iH(t)` with `H` Hermitian.
#[derive(Clone)]
pub struct Generator {
    dim: usize,
    eval: Arc<MatrixFn>,
    hermitian: bool,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("dim", &self.dim)
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl Generator {
    /// General (non-Hermitian) generator.
    pub fn new<F>(dim: usize, m: F) -> Self
    where
        F: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(m),
            hermitian: false,
        }
    }

    /// Schrödinger-form generator `M(t) = −iH(t)`.
    pub fn from_hamiltonian<F>(dim: usize, h: F) -> Self
    where
        F: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(move |t| h(t) * (-I)),
            hermitian: true,
        }
    }

    pub fn constant(m: CMat) -> Self {
        let dim = m.nrows();
        Self::new(dim, move |_| m.clone())
    }

    pub fn constant_hamiltonian(h: CMat) -> Self {
        let dim = h.nrows();
        Self::from_hamiltonian(dim, move |_| h.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `M(t)` without validation; used in inner loops after [`Generator::eval`]
    /// has been checked once.
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> CMat {
        (self.eval)(t)
    }

    /// `M(t)`, checked for dimension and finiteness.
    pub fn eval(&self, t: f64) -> Result<CMat> {
        let m = (self.eval)(t);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: m.nrows().max(m.ncols()),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { what: "generator entry", t });
        }
        Ok(m)
    }

    /// `H(t) = iM(t)`; only meaningful for Schrödinger-form generators.
    pub fn hamiltonian(&self, t: f64) -> Result<CMat> {
        if !self.hermitian {
            return Err(Error::InvalidParameter(
                "generator is not flagged Hermitian".into(),
            ));
        }
        Ok(self.eval(t)? * I)
    }

    /// Checks `M + M† = 0` at `t` for Hermitian-flagged generators.
    pub fn check_hermitian(&self, t: f64, tol: f64) -> Result<()> {
        let m = self.eval(t)?;
        let deviation = (&m + m.adjoint()).max_abs();
        if deviation > tol {
            return Err(Error::NotHermitian { t, deviation });
        }
        Ok(())
    }

    /// Pointwise sum `M(t) + A(t)`; stays Hermitian-flagged only if
    /// `addition_is_antihermitian` holds for `A`.
    pub fn plus<F>(&self, add: F, addition_is_antihermitian: bool) -> Self
    where
        F: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        let base = self.eval.clone();
        Self {
            dim: self.dim,
            eval: Arc::new(move |t| base(t) + add(t)),
            hermitian: self.hermitian && addition_is_antihermitian,
        }
    }

    /// Pointwise map of the matrix, keeping the flag as given.
    pub fn map<F>(&self, f: F, hermitian: bool) -> Self
    where
        F: Fn(f64, CMat) -> CMat + Send + Sync + 'static,
    {
        let base = self.eval.clone();
        Self {
            dim: self.dim,
            eval: Arc::new(move |t| f(t, base(t))),
            hermitian,
        }
    }
}

/// Pauli matrices and small helpers shared by tests and models.
pub mod pauli {
    use super::*;

    pub fn x() -> CMat {
        CMat::from_row_slice(2, 2, &[0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()])
    }

    pub fn y() -> CMat {
        CMat::from_row_slice(2, 2, &[0.0.into(), -I, I, 0.0.into()])
    }

    pub fn z() -> CMat {
        CMat::from_row_slice(2, 2, &[1.0.into(), 0.0.into(), 0.0.into(), (-1.0).into()])
    }
}

/// Canonical basis vector `e_k` of dimension `n`.
pub fn basis_vector(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = Complex64::new(1.0, 0.0);
    v
}


/// Largest entry modulus of a complex matrix or vector.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl<R, C, S> MaxAbs for nalgebra::Matrix<Complex64, R, C, S>
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<Complex64, R, C>,
{
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}
