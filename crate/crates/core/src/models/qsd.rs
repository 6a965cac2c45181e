use num_complex::Complex64;

use super::{constant_fn, TimeFn};
use crate::control::PulseSequence;
use crate::error::{Error, Result};
use crate::lindyn::{TimeGrid, I};
use crate::one_component::{phase_integral, ControlArea};

/// `n`-level atom `H = Σ E_j(t)|j⟩⟨j|` coupled through `S = Σ_{j≥1} κ_j|j⟩⟨0|`
/// to a bath with correlation `β(t, s) = (γ/2)e^{−γ|t−s|}`.
#[derive(Clone)]
pub struct QsdSpec {
    /// `E_0(t), …, E_{n−1}(t)`.
    pub energies: Vec<TimeFn>,
    /// `κ_1, …, κ_{n−1}`.
    pub couplings: Vec<Complex64>,
    pub gamma: f64,
    /// Target amplitudes `a_0, …, a_{n−1}`.
    pub target: Vec<Complex64>,
}

impl std::fmt::Debug for QsdSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QsdSpec")
            .field("n_levels", &self.n_levels())
            .field("couplings", &self.couplings)
            .field("gamma", &self.gamma)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

impl QsdSpec {
    /// Constant energies, uniform coupling and the uniform real target.
    pub fn uniform(n: usize, energies: &[f64], kappa: f64, gamma: f64) -> Self {
        let amp = Complex64::new((n as f64).recip().sqrt(), 0.0);
        Self {
            energies: energies.iter().copied().map(constant_fn).collect(),
            couplings: vec![Complex64::new(kappa, 0.0); n.saturating_sub(1)],
            gamma,
            target: vec![amp; n],
        }
    }

    /// Ten levels, `E_0 = ω`, `E_{j≠0} = 0`, `κ_j = 0.1ω`, `|a_j|² = 1/10`,
    /// in units `ω = 1`.
    pub fn ten_level(gamma: f64) -> Self {
        let mut e = vec![0.0; 10];
        e[0] = 1.0;
        Self::uniform(10, &e, 0.1, gamma)
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_levels();
        if n < 2 {
            return Err(Error::InvalidParameter("at least two levels are required".into()));
        }
        if self.couplings.len() != n - 1 {
            return Err(Error::DimensionMismatch { expected: n - 1, actual: self.couplings.len() });
        }
        if self.target.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: self.target.len() });
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        let norm: f64 = self.target.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { what: "target amplitudes", norm: norm.sqrt() });
        }
        Ok(())
    }

    /// `β(t, s)`.
    pub fn correlation(&self, t: f64, s: f64) -> f64 {
        0.5 * self.gamma * (-self.gamma * (t - s).abs()).exp()
    }
}

/// `Θ_0(t) − Θ_j(t)` for `j ≥ 1` on `grid`, where `Θ_j = ∫ E_j` and the
/// control adds `∫ c` to `Θ_0`. Pulse areas are exact.
pub(crate) fn relative_phases(spec: &QsdSpec, pulses: &PulseSequence, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let integrate = |e: &TimeFn| -> Result<Vec<f64>> {
        let e = e.clone();
        let acc = phase_integral(move |t| -I * e(t), grid, &[])?;
        Ok(acc.c().iter().map(|c| c.re).collect())
    };
    let mut theta0 = integrate(&spec.energies[0])?;
    let mut area = 0.0;
    for k in 1..grid.len() {
        area += pulses.area(grid.time(k - 1), grid.time(k));
        theta0[k] += area;
    }
    let mut out = vec![vec![0.0; spec.n_levels() - 1]; grid.len()];
    for j in 1..spec.n_levels() {
        let theta = integrate(&spec.energies[j])?;
        for k in 0..grid.len() {
            out[k][j - 1] = theta0[k] - theta[k];
        }
    }
    Ok(out)
}

/// `F_j(t)`, `F̄_j(t) = ∫₀ᵗ F_j` and the relative phases, for `j ≥ 1`.
#[derive(Debug, Clone)]
pub struct QsdCoefficients {
    grid: TimeGrid,
    f: Vec<Vec<Complex64>>,
    fbar: Vec<Vec<Complex64>>,
    phases: Vec<Vec<f64>>,
    couplings: Vec<Complex64>,
}

impl QsdCoefficients {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `F_j(t_k)` for `j = 1, …, n−1` (index `j − 1`).
    pub fn f(&self, k: usize) -> &[Complex64] {
        &self.f[k]
    }

    pub fn fbar(&self, k: usize) -> &[Complex64] {
        &self.fbar[k]
    }

    /// `Θ_0 − Θ_j` at `t_k`.
    pub fn relative_phases(&self, k: usize) -> &[f64] {
        &self.phases[k]
    }

    /// `Σ_j κ_j* F_j(t_k)`, the decay rate of the level-0 amplitude.
    pub fn damping(&self, k: usize) -> Complex64 {
        self.couplings.iter().zip(&self.f[k]).map(|(c, f)| c.conj() * f).sum()
    }

    /// `Σ_j κ_j* F̄_j(t_k)`.
    pub fn integrated_damping(&self, k: usize) -> Complex64 {
        self.couplings.iter().zip(&self.fbar[k]).map(|(c, f)| c.conj() * f).sum()
    }
}

/// Solves `Ḟ_j = (γ/2)κ_j − γF_j + [i(E_0 − E_j) + Σ_k κ_k* F_k] F_j`, `F_j(0) = 0`,
/// with `E_0 → E_0 + c(t)`.
///
/// The rotation `e^{i(Θ_0 − Θ_j)}` is factored out exactly, so the stepped
/// variables carry no pulse discontinuities; `F̄_j` is integrated alongside.
/// Classical RK4 on `grid`, with the phases sampled on the half-step grid.
pub fn qsd_coefficients(spec: &QsdSpec, pulses: &PulseSequence, grid: &TimeGrid) -> Result<QsdCoefficients> {
    spec.validate()?;
    let m = spec.n_levels() - 1;
    let fine = grid.refined(2);
    let phases = relative_phases(spec, pulses, &fine)?;
    let rot: Vec<Vec<Complex64>> = phases.iter().map(|p| p.iter().map(|x| (I * x).exp()).collect()).collect();
    let kappa = &spec.couplings;
    let gamma = spec.gamma;

    // state: F̃_j = e^{−i(Θ_0−Θ_j)} F_j, then F̄_j
    let rhs = |idx: usize, y: &[Complex64], out: &mut [Complex64]| {
        let r = &rot[idx];
        let damping: Complex64 = (0..m).map(|j| kappa[j].conj() * r[j] * y[j]).sum();
        for j in 0..m {
            out[j] = 0.5 * gamma * kappa[j] * r[j].conj() - gamma * y[j] + damping * y[j];
            out[m + j] = r[j] * y[j];
        }
    };

    let dt = grid.dt();
    let mut y = vec![Complex64::new(0.0, 0.0); 2 * m];
    let (mut k1, mut k2, mut k3, mut k4) = (y.clone(), y.clone(), y.clone(), y.clone());
    let mut tmp = y.clone();
    let mut f = Vec::with_capacity(grid.len());
    let mut fbar = Vec::with_capacity(grid.len());
    let mut coarse_phases = Vec::with_capacity(grid.len());
    let record = |y: &[Complex64], idx: usize, f: &mut Vec<Vec<Complex64>>, fbar: &mut Vec<Vec<Complex64>>| {
        f.push((0..m).map(|j| rot[idx][j] * y[j]).collect());
        fbar.push(y[m..].to_vec());
    };
    record(&y, 0, &mut f, &mut fbar);
    coarse_phases.push(phases[0].clone());
    for step in 0..grid.n_steps() {
        let i0 = 2 * step;
        rhs(i0, &y, &mut k1);
        for (t, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k1)) {
            *t = a + b * (0.5 * dt);
        }
        rhs(i0 + 1, &tmp, &mut k2);
        for (t, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k2)) {
            *t = a + b * (0.5 * dt);
        }
        rhs(i0 + 1, &tmp, &mut k3);
        for (t, (a, b)) in tmp.iter_mut().zip(y.iter().zip(&k3)) {
            *t = a + b * dt;
        }
        rhs(i0 + 2, &tmp, &mut k4);
        for i in 0..2 * m {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { what: "QSD coefficient", t: grid.time(step + 1) });
        }
        record(&y, i0 + 2, &mut f, &mut fbar);
        coarse_phases.push(phases[i0 + 2].clone());
    }
    Ok(QsdCoefficients { grid: *grid, f, fbar, phases: coarse_phases, couplings: kappa.clone() })
}

/// Brute-force two-time evaluation of `F_j(t) = ∫₀ᵗ β(t, s) f_j(t, s) ds` with
/// `f_j(t, s) = κ_j exp ∫ₛᵗ [i(E_0 − E_j) + Σ_k κ_k* F_k]`.
///
/// Every `F_j(t_m)` is a fresh trapezoid sum over the whole history
/// `s ∈ [0, t_m]`; the self-consistent `Σκ*F` at the new time is found by
/// fixed-point iteration. `O(N²)` work, meant as an independent check of
/// [`qsd_coefficients`].
pub fn qsd_coefficients_double_grid(spec: &QsdSpec, pulses: &PulseSequence, grid: &TimeGrid) -> Result<Vec<Vec<Complex64>>> {
    spec.validate()?;
    let m = spec.n_levels() - 1;
    let phases = relative_phases(spec, pulses, grid)?;
    let dt = grid.dt();
    let kappa = &spec.couplings;
    // history factors e^{−i(Θ_0−Θ_j)(s) − K(s)}, K = ∫ Σκ*F
    let mut hist: Vec<Vec<Complex64>> = Vec::with_capacity(grid.len());
    let mut big_k = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(grid.len());
    hist.push(phases[0].iter().map(|p| (-I * p).exp()).collect());
    out.push(vec![Complex64::new(0.0, 0.0); m]);
    let mut damping_prev = Complex64::new(0.0, 0.0);
    for step in 1..grid.len() {
        let t = grid.time(step);
        // trapezoid over s < t_step; the s = t_step end is added per iteration
        let mut partial = vec![Complex64::new(0.0, 0.0); m];
        for (s_idx, h) in hist.iter().enumerate() {
            let w = if s_idx == 0 { 0.5 * dt } else { dt } * spec.correlation(t, grid.time(s_idx));
            for j in 0..m {
                partial[j] += h[j] * w;
            }
        }
        let mut damping = damping_prev;
        let mut f = vec![Complex64::new(0.0, 0.0); m];
        for _ in 0..100 {
            let k_new = big_k + (damping_prev + damping) * (0.5 * dt);
            for j in 0..m {
                let rot = (I * phases[step][j] + k_new).exp();
                f[j] = kappa[j] * (rot * partial[j] + 0.5 * dt * spec.correlation(t, t));
            }
            let next: Complex64 = (0..m).map(|j| kappa[j].conj() * f[j]).sum();
            let converged = (next - damping).norm() <= 1e-15 * (1.0 + next.norm());
            damping = next;
            if converged {
                break;
            }
        }
        big_k += (damping_prev + damping) * (0.5 * dt);
        damping_prev = damping;
        hist.push(phases[step].iter().map(|p| (-I * p - big_k).exp()).collect());
        out.push(f);
    }
    Ok(out)
}

/// Fidelity samples on a time axis; `stderr` is present for ensemble estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelitySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

fn populations(spec: &QsdSpec) -> (f64, Vec<f64>) {
    let p: Vec<f64> = spec.target.iter().map(|a| a.norm_sqr()).collect();
    (p[0], p[1..].to_vec())
}

/// The four-term closed-form fidelity, term by term as written in the model
/// description: only the populations `|a_j|²` and the plain sums `Σ_j F̄_j`
/// enter. The last term's time integral is a trapezoid on the grid.
pub fn qsd_fidelity_closed(spec: &QsdSpec, coeffs: &QsdCoefficients) -> Result<FidelitySeries> {
    spec.validate()?;
    let (p0, p) = populations(spec);
    let sum_p: f64 = p.iter().sum();
    let sum_p2: f64 = p.iter().map(|x| x * x).sum();
    let grid = coeffs.grid();
    let dt = grid.dt();
    let mut integrals = vec![0.0; p.len()];
    let mut prev_integrand: Option<Vec<f64>> = None;
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let sbar: Complex64 = coeffs.fbar(k).iter().sum();
        let decay = (-2.0 * sbar.re).exp();
        let integrand: Vec<f64> = coeffs.f(k).iter().map(|f| 2.0 * f.re * decay).collect();
        if let Some(prev) = &prev_integrand {
            for j in 0..p.len() {
                integrals[j] += 0.5 * dt * (prev[j] + integrand[j]);
            }
        }
        prev_integrand = Some(integrand);
        let term1 = p0 * p0 * decay;
        let term2 = sum_p * sum_p - sum_p2;
        let term3 = p0 * sum_p * 2.0 * (-sbar).exp().re;
        let term4: f64 = p.iter().zip(&integrals).map(|(pj, ij)| pj * (pj + p0 * ij)).sum();
        values.push(term1 + term2 + term3 + term4);
    }
    Ok(FidelitySeries { times: grid.times().collect(), values, stderr: None })
}

/// Ensemble average `M[|⟨A|ψ_t⟩|²]` of the linear QSD state, in closed form.
///
/// Measured in the interaction picture of the (controlled) system
/// Hamiltonian. With `ψ_0` deterministic,
/// `𝓕 = |p_0 e^{−Σκ*F̄} + Σ_{j≥1} p_j|² + ∬ β(s, u) Y(s) Y*(u)`,
/// `Y(s) = a_0 e^{−Σκ*F̄(s)} Σ_j a_j* κ_j e^{−i(Θ_0−Θ_j)(s)}`. The double
/// integral is accumulated with the exponential-kernel recursion and the
/// trapezoid rule.
pub fn qsd_fidelity_exact(spec: &QsdSpec, coeffs: &QsdCoefficients) -> Result<FidelitySeries> {
    spec.validate()?;
    let (p0, p) = populations(spec);
    let sum_p: f64 = p.iter().sum();
    let grid = coeffs.grid();
    let dt = grid.dt();
    let gamma = spec.gamma;
    let decay = (-gamma * dt).exp();
    let a0 = spec.target[0];
    let weights: Vec<Complex64> = spec.target[1..].iter().zip(&spec.couplings).map(|(a, k)| a.conj() * k).collect();
    let y = |k: usize| -> Complex64 {
        let lead = a0 * (-coeffs.integrated_damping(k)).exp();
        lead * weights.iter().zip(coeffs.relative_phases(k)).map(|(w, th)| w * (-I * th).exp()).sum::<Complex64>()
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut q = Complex64::new(0.0, 0.0);
    let mut y_prev = y(0);
    let mut double = 0.0;
    for k in 0..grid.len() {
        let yk = y(k);
        if k > 0 {
            let q_next = decay * q + 0.25 * gamma * dt * (decay * y_prev.conj() + yk.conj());
            double += dt * (y_prev * q + yk * q_next).re;
            q = q_next;
        }
        y_prev = yk;
        let coherent = p0 * (-coeffs.integrated_damping(k)).exp() + sum_p;
        values.push(coherent.norm_sqr() + double);
    }
    Ok(FidelitySeries { times: grid.times().collect(), values, stderr: None })
}
