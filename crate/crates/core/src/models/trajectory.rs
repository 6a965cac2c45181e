use num_complex::Complex64;
use rayon::prelude::*;

use super::noise::{derive_seed, sample_colored_noise, NoisePath};
use super::qsd::{qsd_coefficients, FidelitySeries, QsdCoefficients, QsdSpec};
use crate::control::PulseSequence;
use crate::error::{Error, Result};
use crate::lindyn::{CVec, TimeGrid, I};

/// Everything shared by the trajectories of one ensemble: the coefficients
/// and relative phases on the half-step grid.
#[derive(Debug, Clone)]
pub struct QsdModel {
    spec: QsdSpec,
    grid: TimeGrid,
    fine: QsdCoefficients,
    rotations: Vec<Vec<Complex64>>,
}

impl QsdModel {
    pub fn new(spec: &QsdSpec, pulses: &PulseSequence, grid: &TimeGrid) -> Result<Self> {
        spec.validate()?;
        let fine_grid = grid.refined(2);
        let fine = qsd_coefficients(spec, pulses, &fine_grid)?;
        let rotations = (0..fine_grid.len())
            .map(|k| {
                fine.relative_phases(k)
                    .iter()
                    .zip(&spec.couplings)
                    .map(|(th, kappa)| kappa * (-I * th).exp())
                    .collect()
            })
            .collect();
        Ok(Self { spec: spec.clone(), grid: *grid, fine, rotations })
    }

    pub fn spec(&self) -> &QsdSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Grid on which noise paths must be sampled: the half-step refinement.
    pub fn noise_grid(&self) -> TimeGrid {
        self.grid.refined(2)
    }

    /// Coefficients on the noise grid.
    pub fn coefficients(&self) -> &QsdCoefficients {
        &self.fine
    }

    fn rhs(&self, idx: usize, z_star: Complex64, y: &CVec, out: &mut CVec) {
        let psi0 = y[0];
        out[0] = -self.fine.damping(idx) * psi0;
        let source = z_star * psi0;
        for (o, r) in out.iter_mut().skip(1).zip(&self.rotations[idx]) {
            *o = r * source;
        }
    }

    /// One linear QSD trajectory `∂ₜψ = [−iH + S z*_t − S†Ō(t)]ψ` from
    /// `ψ(0) = |A⟩`, returned in the interaction picture of `H` (including
    /// the control) on the model grid. RK4 with noise and coefficients taken
    /// at the exact half steps.
    pub fn trajectory(&self, noise: &NoisePath) -> Result<Vec<CVec>> {
        let fine = self.noise_grid();
        if noise.z_star.len() != fine.len() || (noise.grid.dt() - fine.dt()).abs() > 1e-12 * fine.dt() {
            return Err(Error::DimensionMismatch { expected: fine.len(), actual: noise.z_star.len() });
        }
        let n = self.spec.n_levels();
        let dt = self.grid.dt();
        let mut y = CVec::from_vec(self.spec.target.clone());
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(y.clone());
        let (mut k1, mut k2, mut k3, mut k4) = (CVec::zeros(n), CVec::zeros(n), CVec::zeros(n), CVec::zeros(n));
        let z = &noise.z_star;
        for step in 0..self.grid.n_steps() {
            let i0 = 2 * step;
            self.rhs(i0, z[i0], &y, &mut k1);
            self.rhs(i0 + 1, z[i0 + 1], &(&y + &k1 * Complex64::new(0.5 * dt, 0.0)), &mut k2);
            self.rhs(i0 + 1, z[i0 + 1], &(&y + &k2 * Complex64::new(0.5 * dt, 0.0)), &mut k3);
            self.rhs(i0 + 2, z[i0 + 2], &(&y + &k3 * Complex64::new(dt, 0.0)), &mut k4);
            y += (&k1 + (&k2 + &k3) * Complex64::new(2.0, 0.0) + &k4) * Complex64::new(dt / 6.0, 0.0);
            if y.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::NonFinite { what: "QSD state", t: self.grid.time(step + 1) });
            }
            out.push(y.clone());
        }
        Ok(out)
    }

    /// `|⟨A|ψ⟩|²` along a trajectory.
    pub fn overlaps(&self, states: &[CVec]) -> Vec<f64> {
        let target = CVec::from_vec(self.spec.target.clone());
        states.iter().map(|s| target.dotc(s).norm_sqr()).collect()
    }

    /// Monte Carlo estimate of `M[|⟨A|ψ⟩|²]` at every `stride`-th grid point.
    ///
    /// Trajectory `i` uses noise seeded by `derive_seed(seed, i)`; results are
    /// reduced in index order, so the output does not depend on the thread
    /// count.
    pub fn fidelity_mc(&self, n_traj: usize, seed: u64, stride: usize) -> Result<FidelitySeries> {
        if n_traj < 2 {
            return Err(Error::InvalidParameter("need at least two trajectories".into()));
        }
        let stride = stride.max(1);
        let picks: Vec<usize> = (0..self.grid.len()).step_by(stride).collect();
        let fine = self.noise_grid();
        let samples: Vec<Vec<f64>> = (0..n_traj)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let noise = sample_colored_noise(self.spec.gamma, &fine, derive_seed(seed, i as u64))?;
                let overlaps = self.overlaps(&self.trajectory(&noise)?);
                Ok(picks.iter().map(|&k| overlaps[k]).collect())
            })
            .collect::<Result<_>>()?;
        let n = n_traj as f64;
        let mut values = Vec::with_capacity(picks.len());
        let mut stderr = Vec::with_capacity(picks.len());
        for col in 0..picks.len() {
            let mean = samples.iter().map(|s| s[col]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[col] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            values.push(mean);
            stderr.push((var / n).sqrt());
        }
        Ok(FidelitySeries {
            times: picks.iter().map(|&k| self.grid.time(k)).collect(),
            values,
            stderr: Some(stderr),
        })
    }
}

/// A single trajectory on `grid`; `noise` must live on `grid.refined(2)`.
pub fn qsd_trajectory(spec: &QsdSpec, noise: &NoisePath, pulses: &PulseSequence, grid: &TimeGrid) -> Result<Vec<CVec>> {
    QsdModel::new(spec, pulses, grid)?.trajectory(noise)
}

/// Monte Carlo fidelity over `n_traj` trajectories, sampled every `stride`
/// grid points.
pub fn qsd_fidelity_mc(
    spec: &QsdSpec,
    pulses: &PulseSequence,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    stride: usize,
) -> Result<FidelitySeries> {
    QsdModel::new(spec, pulses, grid)?.fidelity_mc(n_traj, seed, stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::SignPolicy;
    use crate::models::qsd::qsd_fidelity_exact;

    #[test]
    fn uncoupled_trajectory_keeps_populations() {
        let mut spec = QsdSpec::ten_level(0.5);
        spec.couplings.iter_mut().for_each(|k| *k = Complex64::new(0.0, 0.0));
        let grid = TimeGrid::with_step(0.0, 3.0, 1e-2).unwrap();
        let noise = sample_colored_noise(0.5, &grid.refined(2), 1).unwrap();
        let states = qsd_trajectory(&spec, &noise, &PulseSequence::none(), &grid).unwrap();
        for s in &states {
            for (a, b) in s.iter().zip(&spec.target) {
                assert!((a.norm() - b.norm()).abs() < 1e-14);
            }
        }
        let series = qsd_fidelity_mc(&spec, &PulseSequence::none(), &grid, 8, 1, 10).unwrap();
        assert!(series.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(series.stderr.unwrap().iter().all(|s| *s < 1e-12));
    }

    #[test]
    fn noise_on_wrong_grid_rejected() {
        let spec = QsdSpec::ten_level(0.5);
        let grid = TimeGrid::with_step(0.0, 1.0, 1e-2).unwrap();
        let noise = sample_colored_noise(0.5, &grid, 1).unwrap();
        assert!(qsd_trajectory(&spec, &noise, &PulseSequence::none(), &grid).is_err());
    }

    #[test]
    fn markov_limit_decay_rate() {
        let spec = QsdSpec::ten_level(50.0);
        let grid = TimeGrid::with_step(0.0, 10.0, 2e-3).unwrap();
        let model = QsdModel::new(&spec, &PulseSequence::none(), &grid).unwrap();
        let n_traj = 50;
        let mut pop = vec![0.0; grid.len()];
        for i in 0..n_traj {
            let noise = sample_colored_noise(spec.gamma, &model.noise_grid(), derive_seed(5, i)).unwrap();
            for (acc, s) in pop.iter_mut().zip(model.trajectory(&noise).unwrap()) {
                *acc += s[0].norm_sqr() / n_traj as f64;
            }
        }
        let (a, b) = (grid.index_of(2.0).unwrap(), grid.index_of(10.0).unwrap());
        let rate = (pop[a] / pop[b]).ln() / 8.0;
        let golden: f64 = spec.couplings.iter().map(|k| k.norm_sqr()).sum();
        assert!((rate - golden).abs() <= 0.2 * golden, "{rate} vs {golden}");
    }

    #[test]
    fn ensemble_matches_exact_average() {
        for (gamma, pulses) in [
            (0.5, PulseSequence::none()),
            (0.5, PulseSequence::regular(2.0 * std::f64::consts::PI, 0.01, 0.02, SignPolicy::PeriodicFlip).unwrap()),
        ] {
            let spec = QsdSpec::ten_level(gamma);
            let grid = TimeGrid::with_step(0.0, 5.0, 1e-3).unwrap();
            let model = QsdModel::new(&spec, &pulses, &grid).unwrap();
            let mc = model.fidelity_mc(400, 77, 1000).unwrap();
            let exact = qsd_fidelity_exact(&spec, model.coefficients()).unwrap();
            let se = mc.stderr.as_ref().unwrap();
            for (i, t) in mc.times.iter().enumerate() {
                let k = model.coefficients().grid().index_of(*t).unwrap();
                let dev = (mc.values[i] - exact.values[k]).abs();
                assert!(dev <= 3.0 * se[i] + 1e-9, "t {t}: mc {} exact {} se {}", mc.values[i], exact.values[k], se[i]);
            }
        }
    }

    #[test]
    fn ensemble_is_deterministic() {
        let spec = QsdSpec::ten_level(0.5);
        let grid = TimeGrid::with_step(0.0, 1.0, 1e-2).unwrap();
        let a = qsd_fidelity_mc(&spec, &PulseSequence::none(), &grid, 16, 3, 10).unwrap();
        let b = qsd_fidelity_mc(&spec, &PulseSequence::none(), &grid, 16, 3, 10).unwrap();
        assert_eq!(a, b);
    }
    #[test]
    fn uncontrolled_fidelity_decays_monotonically() {
        let spec = QsdSpec::ten_level(0.5);
        let grid = TimeGrid::with_step(0.0, 10.0, 1e-3).unwrap();
        let model = QsdModel::new(&spec, &PulseSequence::none(), &grid).unwrap();
        let exact = qsd_fidelity_exact(&spec, model.coefficients()).unwrap();
        assert!(exact.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        // The total decay (~5e-3) is below the ensemble noise of a few hundred
        // trajectories, so the ensemble is only held to the bounds and to the
        // exact average.
        let mc = model.fidelity_mc(200, 11, 1000).unwrap();
        let se = mc.stderr.unwrap();
        assert!(mc.values.iter().zip(&se).all(|(v, s)| *v >= 0.0 && *v <= 1.0 + 3.0 * s));
        for (i, t) in mc.times.iter().enumerate() {
            let k = grid.index_of(*t).unwrap();
            assert!((mc.values[i] - exact.values[2 * k]).abs() <= 3.0 * se[i] + 1e-9);
        }
    }

    #[test]
    fn noisy_pulses_track_regular_ones() {
        let phi = 4.0 * std::f64::consts::PI;
        let spec = QsdSpec::ten_level(0.5);
        let grid = TimeGrid::with_step(0.0, 10.0, 1e-3).unwrap();
        let regular = PulseSequence::regular(phi, 0.01, 0.02, SignPolicy::PeriodicFlip).unwrap();
        let noisy = PulseSequence::noisy(phi, 0.01, 0.02, 0.5, SignPolicy::PeriodicFlip, 4).unwrap();
        let end = |p: &PulseSequence| {
            let mc = qsd_fidelity_mc(&spec, p, &grid, 200, 21, 10_000).unwrap();
            *mc.values.last().unwrap()
        };
        let (a, b) = (end(&regular), end(&noisy));
        assert!((a - b).abs() <= 0.05, "{a} vs {b}");
    }
}
