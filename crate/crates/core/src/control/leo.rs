use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::pulse::PulseSequence;
use crate::error::{Error, Result};
use crate::lindyn::{check_normalized, CMat, CVec, Generator, I};

/// Rotating-frame leakage elimination operator `c(t)[2|A⟩⟨A| − I]`.
#[derive(Debug, Clone)]
pub struct LeoSpec {
    target: CVec,
    pub pulses: PulseSequence,
}

impl LeoSpec {
    pub fn new(target: CVec, pulses: PulseSequence) -> Result<Self> {
        check_normalized(&target, "LEO target")?;
        Ok(Self { target, pulses })
    }

    pub fn target(&self) -> &CVec {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// `2|A⟩⟨A| − I`.
    pub fn parity(&self) -> CMat {
        parity_operator(&self.target)
    }
}

pub fn parity_operator(target: &CVec) -> CMat {
    let n = target.len();
    target * target.adjoint() * Complex64::new(2.0, 0.0) - CMat::identity(n, n)
}

/// `R̃_L(t) = c(t)[2|A⟩⟨A| − I]`.
pub fn rotating_leo(spec: &LeoSpec, t: f64) -> CMat {
    spec.parity() * Complex64::new(spec.pulses.value(t), 0.0)
}

/// Controlled generator `M(t) − i R̃_L(t)`.
///
/// In P-Q terms this shifts `h` by `−ic(t)` and the complement diagonal by
/// `+ic(t)`, a phase contrast of `2c(t)`; the off-diagonal blocks are
/// untouched.
pub fn apply_leo(gen: &Generator, spec: &LeoSpec) -> Result<Generator> {
    if gen.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            actual: spec.dim(),
        });
    }
    let parity = spec.parity() * (-I);
    let pulses = spec.pulses.clone();
    Ok(gen.plus(move |t| &parity * Complex64::new(pulses.value(t), 0.0), true))
}

/// Projector onto the instantaneous eigenvector of `h` with the given index
/// in ascending order of energy.
pub fn eigenprojector(h: &CMat, level: usize) -> CMat {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let v = eig.eigenvectors.column(order[level]).into_owned();
    &v * v.adjoint()
}

/// Lab-frame LEO `c(t)[2|E_k(t)⟩⟨E_k(t)| − I]` added to a Hamiltonian
/// generator, where `|E_k(t)⟩` is the `level`-th instantaneous eigenstate.
pub fn apply_lab_leo(gen: &Generator, pulses: &PulseSequence, level: usize) -> Result<Generator> {
    if !gen.is_hermitian() {
        return Err(Error::InvalidParameter("lab-frame LEO needs a Hamiltonian generator".into()));
    }
    if level >= gen.dim() {
        return Err(Error::InvalidParameter(format!("level {level} out of range")));
    }
    let base = gen.clone();
    let pulses = pulses.clone();
    let n = gen.dim();
    Ok(gen.plus(
        move |t| {
            let c = pulses.value(t);
            if c == 0.0 {
                return CMat::zeros(n, n);
            }
            let h = base.eval_unchecked(t) * I;
            let proj = eigenprojector(&h, level);
            (proj * Complex64::new(2.0, 0.0) - CMat::identity(n, n)) * (-I * c)
        },
        true,
    ))
}

/// Splits `h` into its block-diagonal part `H_d = PHP + QHQ` and the
/// leakage part `L = PHQ + QHP` relative to `target`.
pub fn block_split(h: &CMat, target: &CVec) -> (CMat, CMat) {
    let n = h.nrows();
    let p = target * target.adjoint();
    let q = CMat::identity(n, n) - &p;
    let hd = &p * h * &p + &q * h * &q;
    let l = &p * h * &q + &q * h * &p;
    (hd, l)
}
