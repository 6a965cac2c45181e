//! Instantaneous eigenbasis tracking, the adiabatic-frame generator, the
//! two-level adiabatic kernel and control by scaling the Hamiltonian.

mod eigenpath;
mod frame;

pub use eigenpath::{track_eigenpath, EigenPath, DEFAULT_GAP_FRACTION};
pub use frame::{
    adiabatic_frame, adiabatic_generator, hamiltonian_derivative, scaled_control, two_level_kernel,
    TwoLevelReduction,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{rotating_leo, LeoSpec, PulseSequence, SignPolicy};
    use crate::lindyn::{pauli, propagate, propagate_with, rotate_generator, CMat, CVec, Generator, MaxAbs, Scheme, TimeGrid, I};
    use crate::one_component::solve_p;
    use nalgebra::SymmetricEigen;
    use num_complex::Complex64;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn landau_zener(v: f64, w: f64) -> Generator {
        Generator::from_hamiltonian(2, move |t| (pauli::z() * re(v * t) + pauli::x() * re(w)) * re(0.5))
    }

    fn lz_dot(v: f64) -> impl Fn(f64) -> CMat + Send + Sync + 'static {
        move |_| pauli::z() * re(0.5 * v)
    }

    #[test]
    fn constant_hamiltonian_has_vanishing_adiabatic_generator() {
        let h = CMat::from_row_slice(3, 3, &[re(1.0), re(0.2), re(0.0), re(0.2), re(-0.5), I * 0.3, re(0.0), -I * 0.3, re(2.0)]);
        let gen = Generator::constant_hamiltonian(h);
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let path = track_eigenpath(&gen, &grid, None).unwrap();
        let m = adiabatic_generator(&path, |_| CMat::zeros(3, 3));
        for t in [0.0, 0.33, 0.5, 1.0] {
            assert!(m.eval(t).unwrap().max_abs() < 1e-9);
        }
        let red = two_level_kernel(&path);
        assert!(red.is_err());
    }

    #[test]
    fn two_level_generator_has_the_expected_blocks() {
        let grid = TimeGrid::new(-2.0, 2.0, 400).unwrap();
        let path = track_eigenpath(&landau_zener(1.0, 0.6), &grid, None).unwrap();
        let m = adiabatic_generator(&path, lz_dot(1.0));
        for k in [10, 150, 200, 333] {
            let mk = m.eval(grid.time(k)).unwrap();
            let th = path.phases(k);
            let r = -(I * (th[0] - th[1])).exp() * path.coupling(k, 0, 1);
            let w = -(I * (th[1] - th[0])).exp() * path.coupling(k, 1, 0);
            // the path couplings are grid-resolution differences
            assert!((mk[(0, 1)] - r).norm() < 1e-4);
            assert!((mk[(1, 0)] - w).norm() < 1e-4);
            assert!(mk[(0, 0)].norm() < 1e-6 && mk[(1, 1)].norm() < 1e-6);
        }
    }

    #[test]
    fn adiabatic_generator_matches_rotated_hamiltonian() {
        let gen = landau_zener(1.0, 0.6);
        let grid = TimeGrid::new(-3.0, 3.0, 600).unwrap();
        let path = track_eigenpath(&gen, &grid, None).unwrap();
        let m = adiabatic_generator(&path, lz_dot(1.0));
        let frame = adiabatic_frame(&path);
        let rotated = rotate_generator(&gen, &frame, &grid).unwrap();
        let b0 = path.states(0).clone();
        for k in (0..grid.len()).step_by(7) {
            let t = grid.time(k);
            let expected = b0.adjoint() * rotated.eval(t).unwrap() * &b0;
            assert!((m.eval(t).unwrap() - expected).max_abs() < 1e-6, "t = {t}");
        }
        let x0 = CVec::from_vec(vec![re(1.0), re(0.0)]);
        let a = propagate(&m, &x0, &grid).unwrap();
        let b = propagate(&rotated, &(&b0 * &x0), &grid).unwrap();
        for k in (0..grid.len()).step_by(50) {
            assert!((&a[k] - b0.adjoint() * &b[k]).max_abs() < 1e-6);
        }
    }

    #[test]
    fn lab_frame_leo_identity() {
        let gen = landau_zener(1.3, 0.4);
        let grid = TimeGrid::new(-1.0, 1.0, 200).unwrap();
        let path = track_eigenpath(&gen, &grid, None).unwrap();
        let frame = adiabatic_frame(&path);
        let pulses = PulseSequence::regular(2.0, 2.0, 2.0, SignPolicy::Constant).unwrap();
        let spec = LeoSpec::new(path.state(0, 0), pulses.clone()).unwrap();
        for k in [0, 50, 123, 200] {
            let t = grid.time(k);
            let u = frame.unitary(t);
            let lab = u.adjoint() * rotating_leo(&spec, t) * &u;
            let e0 = path.state(k, 0);
            let expected = (&e0 * e0.adjoint() * re(2.0) - CMat::identity(2, 2)) * re(pulses.value(t));
            assert!((lab - expected).max_abs() < 1e-10);
        }
    }

    #[test]
    fn constant_hamiltonian_kernel_vanishes() {
        let gen = Generator::constant_hamiltonian(pauli::z() * re(0.5) + pauli::x() * re(0.2));
        let grid = TimeGrid::new(0.0, 3.0, 300).unwrap();
        let red = two_level_kernel(&track_eigenpath(&gen, &grid, None).unwrap()).unwrap();
        let p = solve_p(&red.kernel, &red.phase, &grid).unwrap();
        assert!(p.p().iter().all(|z| (z - 1.0).norm() < 1e-9));
    }

    #[test]
    fn slow_sweep_kernel_matches_lab_propagation() {
        let (v, w) = (0.01, 1.0);
        let gen = landau_zener(v, w);
        let grid = TimeGrid::with_step(-200.0, 200.0, 0.02).unwrap();
        let path = track_eigenpath(&gen, &grid, None).unwrap();
        let metric = path.max_adiabaticity();
        assert!(metric <= 1e-2);
        let red = two_level_kernel(&path).unwrap();
        let p = solve_p(&red.kernel, &red.phase, &grid).unwrap();
        let lab = propagate(&gen, &path.state(0, 0), &grid).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..grid.len() {
            let proj = path.state(k, 0).dotc(&lab[k]).norm();
            worst = worst.max((p.p()[k].norm() - proj).abs());
        }
        assert!(worst <= 1e-4, "{worst}");
        let end = p.p()[grid.n_steps()].norm();
        assert!(end >= 0.999);
        assert!(end >= 1.0 - 10.0 * metric * metric);
    }

    #[test]
    fn scaling_keeps_eigenvectors() {
        let gen = landau_zener(1.0, 0.5);
        let pulses = PulseSequence::regular(3.0, 0.01, 0.02, SignPolicy::Constant).unwrap();
        let scaled = scaled_control(&gen, &pulses);
        assert!(scaled.is_hermitian());
        for t in [0.005, 0.012, 0.015, 0.5, 0.59] {
            let c = pulses.value(t);
            let a = SymmetricEigen::new(gen.hamiltonian(t).unwrap());
            let b = SymmetricEigen::new(scaled.hamiltonian(t).unwrap());
            let (ia, ib) = (a.eigenvalues.imin(), b.eigenvalues.imin());
            let overlap = a.eigenvectors.column(ia).dotc(&b.eigenvectors.column(ib)).norm();
            assert!((overlap - 1.0).abs() < 1e-12);
            assert!((b.eigenvalues[ib] - (1.0 + c) * a.eigenvalues[ia]).abs() < 1e-9);
        }
        let none = scaled_control(&gen, &PulseSequence::none());
        assert_eq!(none.eval(0.3).unwrap(), gen.eval(0.3).unwrap());
    }

    #[test]
    fn scaling_pulses_accelerate_a_fast_sweep() {
        // v/w² = 1 with the gap chosen so one pulse advances the relative
        // dynamical phase by Φ·w = π at the crossing; zero-mean control
        let (v, w) = (0.0625, 0.25);
        let gen = landau_zener(v, w);
        let grid = TimeGrid::with_step(-40.0, 40.0, 1e-4).unwrap();
        let ground = |t: f64| {
            let e = SymmetricEigen::new(gen.hamiltonian(t).unwrap());
            e.eigenvectors.column(e.eigenvalues.imin()).into_owned()
        };
        let x0 = ground(grid.t0());
        let fidelity = |g: &Generator| {
            let out = propagate_with(g, &x0, &grid, Scheme::MidpointMagnus).unwrap();
            ground(grid.t1()).dotc(out.last().unwrap()).norm_sqr()
        };
        let pulses = PulseSequence::regular(4.0 * std::f64::consts::PI, 0.01, 0.02, SignPolicy::PeriodicFlip).unwrap();
        let free = fidelity(&gen);
        let driven = fidelity(&scaled_control(&gen, &pulses));
        assert!(driven >= free + 0.1);
    }
}
