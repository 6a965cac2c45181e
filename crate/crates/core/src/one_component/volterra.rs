use num_complex::Complex64;

use super::kernel::MemoryKernel;
use super::phase::PhaseAccumulator;
use crate::error::{Error, Result};
use crate::lindyn::TimeGrid;

/// Growth bound beyond which [`solve_p`] rejects the step.
const GROWTH_LIMIT: f64 = 1e3;

/// Reduced amplitude `p(t)` and target amplitude `P(t) = p(t)·e^{−iC(t)}`.
#[derive(Debug, Clone)]
pub struct AmplitudeSeries {
    grid: TimeGrid,
    p: Vec<Complex64>,
    big_p: Vec<Complex64>,
    leakage: Vec<Complex64>,
}

impl AmplitudeSeries {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn p(&self) -> &[Complex64] {
        &self.p
    }

    /// Amplitude of the target state itself.
    pub fn big_p(&self) -> &[Complex64] {
        &self.big_p
    }

    /// `I(t_k)` accumulated while solving; see [`leakage_integral`].
    pub fn leakage(&self) -> &[Complex64] {
        &self.leakage
    }
}

#[inline]
fn trapezoid_weight(j: usize, n: usize, dt: f64) -> f64 {
    if j == 0 || j == n {
        0.5 * dt
    } else {
        dt
    }
}

fn check_inputs(kernel: &MemoryKernel, phase: &PhaseAccumulator, grid: &TimeGrid) -> Result<()> {
    if kernel.grid() != grid || phase.grid() != grid {
        return Err(Error::InvalidGrid(
            "kernel, phase and solver grids differ".into(),
        ));
    }
    Ok(())
}

/// Solves `ṗ(t) = ∫₀ᵗ g′(t, s) p(s) ds − λ p(t)`, `p(0) = 1`, with
/// `g′(t, s) = e^{iC(t) − iC(s)} g(t, s)` and `λ` the kernel's Markov rate.
///
/// The memory integral uses trapezoid weights on the grid and time stepping
/// is the trapezoidal rule; the new value enters both linearly, so each step
/// solves for `p(t_{n+1})` in closed form (the fixed point of the
/// predictor–corrector iteration). Second order overall.
pub fn solve_p(kernel: &MemoryKernel, phase: &PhaseAccumulator, grid: &TimeGrid) -> Result<AmplitudeSeries> {
    check_inputs(kernel, phase, grid)?;
    let n_pts = grid.len();
    let dt = grid.dt();
    let lambda = kernel.markov_rate();
    let rot: Vec<Complex64> = (0..n_pts).map(|k| phase.rotation(k)).collect();
    let one = Complex64::new(1.0, 0.0);

    let mut p = Vec::with_capacity(n_pts);
    let mut leak = Vec::with_capacity(n_pts);
    // weighted history terms e^{−iC_j} p_j
    let mut hist: Vec<Complex64> = Vec::with_capacity(n_pts);

    p.push(one);
    hist.push(rot[0]);
    leak.push(Complex64::new(0.0, 0.0));
    let mut pdot = -lambda * one;

    for n in 0..grid.n_steps() {
        let m = n + 1;
        // row m without its diagonal entry
        let partial: Complex64 = (0..m)
            .map(|j| kernel.value(m, j) * hist[j] * trapezoid_weight(j, m, dt))
            .sum();
        let diag = kernel.value(m, m);
        let a = partial / rot[m];
        let b = diag * (0.5 * dt) - lambda;
        let denom = one - b * (0.5 * dt);
        let next = (p[n] + (pdot + a) * (0.5 * dt)) / denom;

        let t = grid.time(m);
        if !(next.re.is_finite() && next.im.is_finite()) {
            return Err(Error::NonFinite { what: "amplitude", t });
        }
        if next.norm() > GROWTH_LIMIT {
            return Err(Error::Unstable { t, magnitude: next.norm() });
        }
        p.push(next);
        hist.push(rot[m] * next);
        leak.push(partial + diag * rot[m] * next * (0.5 * dt));
        pdot = a + b * next;
    }

    let big_p = p.iter().zip(&rot).map(|(p, r)| p * r).collect();
    Ok(AmplitudeSeries { grid: *grid, p, big_p, leakage: leak })
}

/// `I(t) = ∫₀ᵗ e^{−iC(s)} g(t, s) p(s) ds` by the trapezoid rule on the grid.
///
/// With this, the one-component equation reads `ṗ(t) e^{−iC(t)} = I(t)`
/// (regular part of the kernel).
pub fn leakage_integral(
    kernel: &MemoryKernel,
    phase: &PhaseAccumulator,
    amplitude: &AmplitudeSeries,
    t: f64,
) -> Result<Complex64> {
    let grid = amplitude.grid();
    check_inputs(kernel, phase, grid)?;
    let n = grid.index_of(t)?;
    let dt = grid.dt();
    Ok((0..=n)
        .map(|j| phase.rotation(j) * kernel.value(n, j) * amplitude.p()[j] * trapezoid_weight(j, n, dt))
        .sum())
}

/// Closed-form amplitude of the two-state reduction with constant
/// `h′ = h − a` and scalar coupling `g = R·W`:
///
/// `p̈ + h′ṗ − g p = 0`, `p(0) = 1`, `ṗ(0) = 0`, so with `Δ = √(h′² + 4g)`
///
/// `p(t) = (Δ − h′)/(2Δ)·e^{−(h′+Δ)t/2} + (Δ + h′)/(2Δ)·e^{(Δ−h′)t/2}`
///
/// and `p(t) = (1 + h′t/2)·e^{−h′t/2}` in the confluent case `Δ = 0`.
pub fn closed_form_two_state(h_prime: Complex64, coupling: Complex64, t: f64) -> Complex64 {
    let disc = h_prime * h_prime + coupling * 4.0;
    let scale = h_prime.norm_sqr() + 4.0 * coupling.norm() + f64::MIN_POSITIVE;
    if disc.norm() <= 1e-24 * scale.max(1.0) {
        return (1.0 + h_prime * (0.5 * t)) * (-h_prime * (0.5 * t)).exp();
    }
    let delta = disc.sqrt();
    let lo = (delta - h_prime) / (delta * 2.0) * ((-h_prime - delta) * (0.5 * t)).exp();
    let hi = (delta + h_prime) / (delta * 2.0) * ((-h_prime + delta) * (0.5 * t)).exp();
    lo + hi
}

/// `P(t) = p(t)e^{h t}` for the same two-state model with `h = h′ + a`.
pub fn closed_form_two_state_target(h: Complex64, a: Complex64, coupling: Complex64, t: f64) -> Complex64 {
    closed_form_two_state(h - a, coupling, t) * (h * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindyn::{basis_vector, pauli, propagate, CMat, Generator};
    use crate::one_component::phase::phase_integral;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn solve_constant(g: f64, t1: f64, dt: f64) -> AmplitudeSeries {
        let grid = TimeGrid::with_step(0.0, t1, dt).unwrap();
        let k = MemoryKernel::from_fn(grid, move |_, _| c(g));
        solve_p(&k, &PhaseAccumulator::zero(&grid), &grid).unwrap()
    }

    #[test]
    fn constant_kernel_gives_cosine() {
        let amp = solve_constant(-4.0, 1.0, 1e-3);
        let k = amp.grid().index_of(0.785).unwrap();
        let at_quarter = amp.p()[k] + (amp.p()[k + 1] - amp.p()[k]) * ((PI / 4.0 - 0.785) / 1e-3);
        assert!(at_quarter.norm() < 1e-6, "{at_quarter}");
        for (i, p) in amp.p().iter().enumerate() {
            assert!((p - c((2.0 * amp.grid().time(i)).cos())).norm() < 1e-5);
        }
    }

    #[test]
    fn markov_delta_gives_exponential_decay() {
        let grid = TimeGrid::with_step(0.0, 2.0, 1e-3).unwrap();
        let k = MemoryKernel::markov(grid, 0.5);
        let amp = solve_p(&k, &PhaseAccumulator::zero(&grid), &grid).unwrap();
        let end = amp.p()[grid.n_steps()];
        assert!((end - c((-1.0f64).exp())).norm() < 1e-7);
        assert!((end.re - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn vanishing_kernel_keeps_amplitude() {
        let amp = solve_constant(0.0, 3.0, 1e-2);
        assert!(amp.p().iter().all(|p| *p == c(1.0)));
    }

    #[test]
    fn growth_is_reported_not_clipped() {
        let grid = TimeGrid::with_step(0.0, 10.0, 1e-2).unwrap();
        let k = MemoryKernel::from_fn(grid, |_, _| c(4.0));
        let r = solve_p(&k, &PhaseAccumulator::zero(&grid), &grid);
        assert!(matches!(r, Err(Error::Unstable { .. })));
    }

    #[test]
    fn leakage_integral_matches_derivative() {
        // rotating cosine kernel with h = −iη
        let grid = TimeGrid::with_step(0.0, 4.0, 1e-3).unwrap();
        let eta = 3.0;
        let k = MemoryKernel::from_fn(grid, |t, s| c(-1.0) * (-(t - s) * 0.3).exp());
        let ph = phase_integral(|_| Complex64::new(0.0, -eta), &grid, &[]).unwrap();
        let amp = solve_p(&k, &ph, &grid).unwrap();
        let dt = grid.dt();
        for n in (10..grid.n_steps() - 10).step_by(397) {
            let t = grid.time(n);
            let pdot = (amp.p()[n + 1] - amp.p()[n - 1]) / (2.0 * dt);
            let lhs = pdot * ph.rotation(n);
            let rhs = leakage_integral(&k, &ph, &amp, t).unwrap();
            assert!((lhs - rhs).norm() < 1e-4, "t = {t}: {lhs} vs {rhs}");
            assert!((rhs - amp.leakage()[n]).norm() < 1e-14);
        }
        assert_eq!(leakage_integral(&MemoryKernel::zero(grid), &ph, &amp, 2.0).unwrap(), c(0.0));
        assert!(matches!(leakage_integral(&k, &ph, &amp, 2.00031), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn strong_phase_suppresses_leakage_integral() {
        let grid = TimeGrid::with_step(0.0, 5.0, 1e-3).unwrap();
        let k = MemoryKernel::from_fn(grid, |_, _| c(-1.0));
        let mut last = f64::INFINITY;
        for eta in [1.0, 10.0, 100.0] {
            let ph = phase_integral(|_| Complex64::new(0.0, -eta), &grid, &[]).unwrap();
            let amp = solve_p(&k, &ph, &grid).unwrap();
            let worst = amp.leakage().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst < last, "eta = {eta}: {worst} !< {last}");
            last = worst;
        }
    }

    fn two_state_oracle(h: Complex64, a: Complex64, r: Complex64, w: Complex64, t: f64) -> Complex64 {
        let m = CMat::from_row_slice(2, 2, &[h, r, w, a]);
        (m * c(t)).exp()[(0, 0)]
    }

    #[test]
    fn closed_form_matches_direct_two_state_propagation() {
        let cases = [
            (Complex64::new(0.0, -0.7), c(0.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, -1.0)),
            (Complex64::new(0.0, -5.0), Complex64::new(0.0, 1.0), Complex64::new(0.3, -0.8), Complex64::new(-0.3, -0.8)),
            (Complex64::new(-0.2, 0.4), Complex64::new(0.1, 0.0), c(0.5), c(0.9)),
        ];
        for (h, a, r, w) in cases {
            for t in [0.0, 0.37, 1.0, 2.5, 6.0] {
                let closed = closed_form_two_state_target(h, a, r * w, t);
                let direct = two_state_oracle(h, a, r, w, t);
                assert!((closed - direct).norm() < 1e-10, "{closed} vs {direct}");
            }
        }
    }

    #[test]
    fn closed_form_special_cases() {
        for t in [0.0, 0.5, 2.0, 7.0] {
            assert!((closed_form_two_state(c(0.0), c(-1.0), t) - c(t.cos())).norm() < 1e-12);
            assert!((closed_form_two_state(Complex64::new(0.0, -3.0), c(0.0), t) - c(1.0)).norm() < 1e-12);
        }
        // confluent point h'² + 4g = 0
        let hp = c(2.0);
        let g = c(-1.0);
        for t in [0.1, 1.0, 3.0] {
            let closed = closed_form_two_state(hp, g, t);
            let direct = two_state_oracle(hp, c(0.0), c(1.0), g, t) * (-hp * t).exp();
            assert!((closed - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn fast_phase_keeps_amplitude_at_resonances() {
        let eta = 50.0;
        for k in 1..=10 {
            let t = 2.0 * PI * k as f64 / eta;
            let p = closed_form_two_state(Complex64::new(0.0, -eta), c(-1.0), t);
            assert!(p.norm() >= 0.99, "k = {k}: {}", p.norm());
        }
    }

    #[test]
    fn cosine_recovery_through_blocks() {
        // M = −iσx: h = 0, R = W = −i, D = 0
        let gen = Generator::constant_hamiltonian(pauli::x());
        let grid = TimeGrid::with_step(0.0, 3.0, 1e-3).unwrap();
        let blocks = crate::lindyn::pq_partition(&gen, &basis_vector(2, 0)).unwrap();
        let k = crate::one_component::kernel_from_blocks(&blocks, &grid).unwrap();
        let ph = PhaseAccumulator::from_blocks(&blocks, &grid, &[]).unwrap();
        let amp = solve_p(&k, &ph, &grid).unwrap();
        let full = propagate(&gen, &basis_vector(2, 0), &grid).unwrap();
        for n in (0..grid.len()).step_by(100) {
            assert!((amp.big_p()[n] - full[n][0]).norm() < 1e-6);
        }
    }
}
