use num_complex::Complex64;

use super::generator::{CMat, CVec, Generator};
use crate::error::{Error, Result};

/// Residual norm under which a canonical vector counts as already spanned.
const PARALLEL_THRESHOLD: f64 = 1e-8;

/// Blocks of `M(t)` at one time, in the basis `{target, complement…}`:
///
/// ```text
///     ( h | R )
/// M = (---+---)
///     ( W | D )
/// ```
#[derive(Debug, Clone)]
pub struct BlockSample {
    pub h: Complex64,
    /// Row block, stored as a vector; `R·v = Σ R_k v_k`.
    pub r: CVec,
    pub w: CVec,
    pub d: CMat,
}

/// P-Q partition of a generator with respect to a fixed target direction.
#[derive(Debug, Clone)]
pub struct PQBlocks {
    gen: Generator,
    basis: CMat,
}

/// Unitary whose first column is `target` and whose remaining columns come
/// from Gram–Schmidt over `e_0, e_1, …` in index order.
pub fn complete_basis(target: &CVec) -> Result<CMat> {
    let n = target.len();
    let norm = target.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector("target"));
    }
    let mut cols: Vec<CVec> = vec![target / Complex64::new(norm, 0.0)];
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = super::generator::basis_vector(n, k);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let r = v.norm();
        if r < PARALLEL_THRESHOLD {
            continue;
        }
        cols.push(v / Complex64::new(r, 0.0));
    }
    Ok(CMat::from_columns(&cols))
}

pub(crate) fn check_normalized(v: &CVec, what: &'static str) -> Result<()> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector(what));
    }
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { what, norm });
    }
    Ok(())
}

/// Partitions `gen` with respect to `target` (normalized to 10⁻¹²).
pub fn pq_partition(gen: &Generator, target: &CVec) -> Result<PQBlocks> {
    check_normalized(target, "target")?;
    if target.len() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            actual: target.len(),
        });
    }
    if gen.dim() < 2 {
        return Err(Error::InvalidParameter(
            "P-Q partition needs dimension at least 2".into(),
        ));
    }
    Ok(PQBlocks {
        gen: gen.clone(),
        basis: complete_basis(target)?,
    })
}

impl PQBlocks {
    pub fn dim(&self) -> usize {
        self.gen.dim()
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    /// Columns: target followed by the orthonormal complement.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn target(&self) -> CVec {
        self.basis.column(0).into_owned()
    }

    /// `B† M(t) B` for the completed basis `B`.
    pub fn conjugated(&self, t: f64) -> Result<CMat> {
        let m = self.gen.eval(t)?;
        Ok(self.basis.adjoint() * m * &self.basis)
    }

    pub(crate) fn conjugated_unchecked(&self, t: f64) -> CMat {
        self.basis.adjoint() * self.gen.eval_unchecked(t) * &self.basis
    }

    pub fn sample(&self, t: f64) -> Result<BlockSample> {
        Ok(split(&self.conjugated(t)?))
    }

    pub fn h(&self, t: f64) -> Result<Complex64> {
        Ok(self.conjugated(t)?[(0, 0)])
    }

    /// Puts a block sample back together into the full conjugated matrix.
    pub fn reassemble(sample: &BlockSample) -> CMat {
        let n = sample.w.len() + 1;
        let mut m = CMat::zeros(n, n);
        m[(0, 0)] = sample.h;
        for k in 1..n {
            m[(0, k)] = sample.r[k - 1];
            m[(k, 0)] = sample.w[k - 1];
        }
        m.view_mut((1, 1), (n - 1, n - 1)).copy_from(&sample.d);
        m
    }

    /// Amplitude of the target in a full state, `P = ⟨A|X⟩`.
    pub fn target_amplitude(&self, x: &CVec) -> Complex64 {
        self.basis.column(0).dotc(x)
    }
}

pub(crate) fn split(m: &CMat) -> BlockSample {
    let n = m.nrows();
    BlockSample {
        h: m[(0, 0)],
        r: CVec::from_iterator(n - 1, (1..n).map(|k| m[(0, k)])),
        w: CVec::from_iterator(n - 1, (1..n).map(|k| m[(k, 0)])),
        d: m.view((1, 1), (n - 1, n - 1)).into_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindyn::generator::{basis_vector, pauli, MaxAbs};
    use proptest::prelude::*;

    #[test]
    fn canonical_target_reads_blocks_directly() {
        let m = CMat::from_fn(2, 2, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 0.5));
        let blocks = pq_partition(&Generator::constant(m.clone()), &basis_vector(2, 0)).unwrap();
        let s = blocks.sample(0.0).unwrap();
        assert_eq!(s.h, m[(0, 0)]);
        assert_eq!(s.r[0], m[(0, 1)]);
        assert_eq!(s.w[0], m[(1, 0)]);
        assert_eq!(s.d[(0, 0)], m[(1, 1)]);
    }

    #[test]
    fn hadamard_like_target_diagonalizes_sigma_x() {
        let a = CVec::from_vec(vec![Complex64::new(1.0, 0.0); 2]) / Complex64::new(2f64.sqrt(), 0.0);
        let blocks = pq_partition(&Generator::constant_hamiltonian(pauli::x()), &a).unwrap();
        let s = blocks.sample(0.0).unwrap();
        assert!((s.h - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(s.r[0].norm() < 1e-15);
        assert!(s.w[0].norm() < 1e-15);
        assert!((s.d[(0, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_and_unnormalized_targets_rejected() {
        let gen = Generator::constant(CMat::zeros(3, 3));
        assert!(matches!(pq_partition(&gen, &CVec::zeros(3)), Err(Error::ZeroVector(_))));
        let v = basis_vector(3, 1) * Complex64::new(1.1, 0.0);
        assert!(matches!(pq_partition(&gen, &v), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn completion_skips_parallel_canonical_vectors() {
        let b = complete_basis(&basis_vector(3, 1)).unwrap();
        assert_eq!(b.column(1).into_owned(), basis_vector(3, 0));
        assert_eq!(b.column(2).into_owned(), basis_vector(3, 2));
    }

    fn random_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (2usize..=8).prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(-1.0f64..1.0, 2 * n * n),
                proptest::collection::vec(-1.0f64..1.0, 2 * n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

        #[test]
        fn reassembly_reproduces_conjugated_matrix((n, mv, av) in random_case()) {
            let m = CMat::from_fn(n, n, |i, j| Complex64::new(mv[2 * (i * n + j)], mv[2 * (i * n + j) + 1]));
            let a = CVec::from_fn(n, |i, _| Complex64::new(av[2 * i], av[2 * i + 1]));
            prop_assume!(a.norm() > 1e-3);
            let a = &a / Complex64::new(a.norm(), 0.0);
            let blocks = pq_partition(&Generator::constant(m.clone()), &a).unwrap();
            let b = blocks.basis();
            prop_assert!((b.adjoint() * b - CMat::identity(n, n)).max_abs() < 1e-12);
            let full = PQBlocks::reassemble(&blocks.sample(0.0).unwrap());
            prop_assert!((b * &full * b.adjoint() - &m).max_abs() < 1e-12);
            // deterministic completion
            let again = pq_partition(&Generator::constant(m), &a).unwrap();
            prop_assert_eq!(again.basis(), b);
        }
    }
}
