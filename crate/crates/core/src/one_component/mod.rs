//! The one-component equation for the target amplitude: memory kernels,
//! accumulated phase, the Volterra solver and leakage diagnostics.

mod kernel;
mod phase;
mod volterra;

pub use kernel::{kernel_from_blocks, KernelRepr, MemoryKernel, MAX_TABLE_POINTS};
pub use phase::{phase_integral, ControlArea, PhaseAccumulator};
pub use volterra::{
    closed_form_two_state, closed_form_two_state_target, leakage_integral, solve_p,
    AmplitudeSeries,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindyn::{
        basis_vector, pq_partition, time_ordered_propagator, CMat, Generator, Scheme, TimeGrid,
    };
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_kernel_examples() {
        let grid = TimeGrid::with_step(0.0, 2.0, 1e-2).unwrap();
        let v = 0.8;
        let gen = Generator::constant_hamiltonian(crate::lindyn::pauli::x() * Complex64::new(v, 0.0));
        let blocks = pq_partition(&gen, &basis_vector(2, 0)).unwrap();
        let k = kernel_from_blocks(&blocks, &grid).unwrap();
        for i in (0..grid.len()).step_by(17) {
            for j in (0..=i).step_by(5) {
                assert!((k.value(i, j) + v * v).norm() < 1e-13);
            }
        }
        // W = 0: upper-triangular generator
        let m = CMat::from_row_slice(2, 2, &[Complex64::new(0.1, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-0.3, 0.0)]);
        let blocks = pq_partition(&Generator::constant(m), &basis_vector(2, 0)).unwrap();
        let k = kernel_from_blocks(&blocks, &grid).unwrap();
        for i in 0..grid.len() {
            for j in 0..=i {
                assert_eq!(k.value(i, j), Complex64::new(0.0, 0.0));
            }
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
        CMat::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
    }

    #[test]
    fn block_kernel_matches_dense_propagators() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 6;
        let a = random_matrix(&mut rng, n, 0.5);
        let b = random_matrix(&mut rng, n, 0.5);
        let gen = Generator::new(n, move |t| &a + &b * Complex64::new((1.3 * t).cos(), 0.0));
        let target = {
            let v = crate::lindyn::CVec::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            &v / Complex64::new(v.norm(), 0.0)
        };
        let blocks = pq_partition(&gen, &target).unwrap();
        let grid = TimeGrid::with_step(0.0, 1.5, 1e-2).unwrap();
        let k = kernel_from_blocks(&blocks, &grid).unwrap();
        let d = |t: f64| crate::lindyn::split(&blocks.conjugated(t).unwrap()).d;
        for i in (0..grid.len()).step_by(13) {
            for j in (0..=i).step_by(11) {
                let (t, s) = (grid.time(i), grid.time(j));
                let g = time_ordered_propagator(d, s, t, &grid, Scheme::Rk4).unwrap();
                let rt = blocks.sample(t).unwrap().r;
                let ws = blocks.sample(s).unwrap().w;
                let dense = rt.transpose() * g * ws;
                assert!((dense[(0, 0)] - k.value(i, j)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn tabulated_and_separable_kernels_agree() {
        let grid = TimeGrid::new(0.0, 1.0, 40).unwrap();
        let left: Vec<Complex64> = grid.times().map(|t| Complex64::new(t.cos(), t.sin())).collect();
        let right: Vec<Complex64> = grid.times().map(|s| Complex64::new(s, -1.0)).collect();
        let sep = MemoryKernel::separable(grid, vec![(left.clone(), right.clone())]).unwrap();
        let tab = sep.tabulate().unwrap();
        for i in 0..grid.len() {
            for j in 0..=i {
                assert_eq!(sep.value(i, j), left[i] * right[j]);
                assert_eq!(tab.value(i, j), sep.value(i, j));
            }
        }
    }

    #[test]
    fn oversized_tables_refused() {
        let grid = TimeGrid::new(0.0, 1.0, MAX_TABLE_POINTS).unwrap();
        let gen = Generator::constant(CMat::zeros(2, 2));
        let blocks = pq_partition(&gen, &basis_vector(2, 0)).unwrap();
        assert!(matches!(
            kernel_from_blocks(&blocks, &grid),
            Err(crate::Error::KernelTooLarge { .. })
        ));
    }
}
