use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lindyn::{CMat, CVec, Generator, TimeGrid};

/// Relative gap below which tracking refuses, as a fraction of `max|E|`.
pub const DEFAULT_GAP_FRACTION: f64 = 1e-6;

/// Instantaneous eigen-decomposition of a Hamiltonian along a grid.
///
/// Levels are sorted by energy at the first grid point and followed by
/// maximal overlap afterwards. Each eigenvector is parallel transported:
/// `⟨E_n(t_k)|E_n(t_{k+1})⟩` is real and positive. Dynamical phases are
/// integrated with Simpson's rule using the energies at step midpoints.
#[derive(Clone)]
pub struct EigenPath {
    gen: Generator,
    grid: TimeGrid,
    energies: Vec<DVector<f64>>,
    states: Vec<CMat>,
    derivatives: Vec<CMat>,
    phases: Vec<DVector<f64>>,
}

impl std::fmt::Debug for EigenPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EigenPath")
            .field("dim", &self.dim())
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

fn sorted_eigen(h: CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let v = CMat::from_columns(&order.iter().map(|&k| eig.eigenvectors.column(k)).collect::<Vec<_>>());
    (e, v)
}

/// Fixes the free phase of each column: largest component real and positive.
fn canonical_gauge(v: &mut CMat) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > col[best].norm() + 1e-12 {
                best = i;
            }
        }
        let phase = col[best].conj() / col[best].norm();
        col *= phase;
    }
}

/// Reorders and rephases `(e, v)` to follow `reference` continuously.
fn match_to(reference: &CMat, e: DVector<f64>, v: CMat) -> (DVector<f64>, CMat) {
    let n = e.len();
    let overlaps = reference.adjoint() * &v;
    let mut used = vec![false; n];
    let mut e_out = DVector::zeros(n);
    let mut v_out = CMat::zeros(n, n);
    for m in 0..n {
        let j = (0..n)
            .filter(|&j| !used[j])
            .max_by(|&a, &b| overlaps[(m, a)].norm().total_cmp(&overlaps[(m, b)].norm()))
            .expect("one unused column per level");
        used[j] = true;
        let o = overlaps[(m, j)];
        let phase = if o.norm() > 0.0 { o.conj() / o.norm() } else { Complex64::new(1.0, 0.0) };
        e_out[m] = e[j];
        v_out.set_column(m, &(v.column(j) * phase));
    }
    (e_out, v_out)
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn min_gap(e: &DVector<f64>) -> f64 {
    let mut sorted: Vec<f64> = e.iter().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Tracks the eigenbasis of a Hermitian generator over `grid`.
///
/// `gap_threshold` defaults to `1e-6 · max|E|` over the path; any grid point
/// with a smaller level spacing is reported as a crossing.
pub fn track_eigenpath(gen: &Generator, grid: &TimeGrid, gap_threshold: Option<f64>) -> Result<EigenPath> {
    if !gen.is_hermitian() {
        return Err(Error::InvalidParameter("eigen-tracking needs a Hamiltonian generator".into()));
    }
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("eigen-tracking needs at least three grid points".into()));
    }
    let mut energies = Vec::with_capacity(grid.len());
    let mut midpoints: Vec<DVector<f64>> = Vec::with_capacity(grid.n_steps());
    let mut states: Vec<CMat> = Vec::with_capacity(grid.len());
    for (k, t) in grid.times().enumerate() {
        gen.check_hermitian(t, 1e-10)?;
        let (e, v) = sorted_eigen(gen.hamiltonian(t)?);
        let (e, v) = match states.last() {
            None => {
                let mut v = v;
                canonical_gauge(&mut v);
                (e, v)
            }
            Some(prev) => {
                let mid = t - 0.5 * grid.dt();
                let (em, vm) = sorted_eigen(gen.hamiltonian(mid)?);
                let (em, vm) = match_to(prev, em, vm);
                midpoints.push(em);
                match_to(&vm, e, v)
            }
        };
        debug_assert_eq!(k, states.len());
        energies.push(e);
        states.push(v);
    }

    let scale = energies.iter().map(|e| e.amax()).fold(0.0, f64::max);
    let threshold = gap_threshold.unwrap_or(DEFAULT_GAP_FRACTION * scale);
    for (k, e) in energies.iter().enumerate() {
        let gap = min_gap(e);
        if gap <= threshold {
            return Err(Error::LevelCrossing { t: grid.time(k), gap, threshold });
        }
    }

    let dt = grid.dt();
    let last = grid.n_steps();
    let derivatives = (0..grid.len())
        .map(|k| match k {
            0 => (&states[1] * re(4.0) - &states[0] * re(3.0) - &states[2]) / Complex64::new(2.0 * dt, 0.0),
            k if k == last => {
                (&states[last] * re(3.0) - &states[last - 1] * re(4.0) + &states[last - 2])
                    / Complex64::new(2.0 * dt, 0.0)
            }
            k => (&states[k + 1] - &states[k - 1]) / Complex64::new(2.0 * dt, 0.0),
        })
        .collect();

    let mut phases = Vec::with_capacity(grid.len());
    let mut theta = DVector::zeros(energies[0].len());
    phases.push(theta.clone());
    for k in 1..grid.len() {
        theta += (&energies[k - 1] + &midpoints[k - 1] * 4.0 + &energies[k]) * (dt / 6.0);
        phases.push(theta.clone());
    }

    Ok(EigenPath { gen: gen.clone(), grid: *grid, energies, states, derivatives, phases })
}

impl EigenPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.energies[0].len()
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn energies(&self, k: usize) -> &DVector<f64> {
        &self.energies[k]
    }

    /// Eigenvectors at grid point `k` as columns, ordered by level.
    pub fn states(&self, k: usize) -> &CMat {
        &self.states[k]
    }

    pub fn state(&self, k: usize, level: usize) -> CVec {
        self.states[k].column(level).into_owned()
    }

    /// `|Ė_n⟩` as columns.
    pub fn derivatives(&self, k: usize) -> &CMat {
        &self.derivatives[k]
    }

    /// `θ_n(t_k) = ∫ E_n` from the first grid point.
    pub fn phases(&self, k: usize) -> &DVector<f64> {
        &self.phases[k]
    }

    /// `⟨E_m|Ė_n⟩` at grid point `k`.
    pub fn coupling(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.states[k].column(m).dotc(&self.derivatives[k].column(n))
    }

    /// Smallest level spacing at grid point `k`.
    pub fn gap(&self, k: usize) -> f64 {
        min_gap(&self.energies[k])
    }

    /// `max_{m≠n} |⟨E_m|Ė_n⟩| / |E_n − E_m|` at grid point `k`.
    pub fn adiabaticity(&self, k: usize) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let gap = (self.energies[k][b] - self.energies[k][a]).abs();
                    worst = worst.max(self.coupling(k, a, b).norm() / gap);
                }
            }
        }
        worst
    }

    /// Largest [`adiabaticity`](Self::adiabaticity) along the path.
    pub fn max_adiabaticity(&self) -> f64 {
        (0..self.grid.len()).map(|k| self.adiabaticity(k)).fold(0.0, f64::max)
    }

    fn nearest(&self, t: f64) -> usize {
        let x = ((t - self.grid.t0()) / self.grid.dt()).round();
        (x.max(0.0) as usize).min(self.grid.n_steps())
    }

    /// Eigen-decomposition at an arbitrary `t`, ordered and rephased against
    /// the nearest grid point.
    pub fn eigen_at(&self, t: f64) -> Result<(DVector<f64>, CMat)> {
        let (e, v) = sorted_eigen(self.gen.hamiltonian(t)?);
        Ok(match_to(&self.states[self.nearest(t)], e, v))
    }

    /// `θ_n(t)`, extended off the grid by one Simpson step from the nearest
    /// grid point.
    pub fn phases_at(&self, t: f64) -> Result<DVector<f64>> {
        let k = self.nearest(t);
        let tk = self.grid.time(k);
        if t == tk {
            return Ok(self.phases[k].clone());
        }
        let (em, _) = self.eigen_at(0.5 * (tk + t))?;
        let (e, _) = self.eigen_at(t)?;
        Ok(&self.phases[k] + (&self.energies[k] + em * 4.0 + e) * ((t - tk) / 6.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindyn::{pauli, MaxAbs};

    pub(crate) fn landau_zener(v: f64, w: f64) -> Generator {
        Generator::from_hamiltonian(2, move |t| {
            (pauli::z() * Complex64::new(v * t, 0.0) + pauli::x() * Complex64::new(w, 0.0)) * Complex64::new(0.5, 0.0)
        })
    }

    #[test]
    fn static_hamiltonian() {
        let gen = Generator::constant_hamiltonian(pauli::z() * Complex64::new(0.5, 0.0));
        let grid = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let path = track_eigenpath(&gen, &grid, None).unwrap();
        for k in [0, 57, 200] {
            let t = grid.time(k);
            assert!((path.energies(k)[0] + 0.5).abs() < 1e-15);
            assert!((path.energies(k)[1] - 0.5).abs() < 1e-15);
            assert!((path.states(k) - path.states(0)).max_abs() < 1e-15);
            assert!(path.derivatives(k).max_abs() < 1e-12);
            assert!((path.phases(k)[0] + 0.5 * t).abs() < 1e-12);
            assert!((path.phases(k)[1] - 0.5 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn landau_zener_gap_and_gauge() {
        let (v, w) = (2.0, 0.7);
        let grid = TimeGrid::new(-3.0, 3.0, 600).unwrap();
        let path = track_eigenpath(&landau_zener(v, w), &grid, None).unwrap();
        let mut smallest = (f64::INFINITY, 0.0);
        for k in 0..grid.len() {
            let t = grid.time(k);
            let gap = path.energies(k)[1] - path.energies(k)[0];
            assert!((gap - (v * v * t * t + w * w).sqrt()).abs() < 1e-12);
            if gap < smallest.0 {
                smallest = (gap, t);
            }
            let s = path.states(k);
            assert!((s.adjoint() * s - CMat::identity(2, 2)).max_abs() < 1e-10);
            if k > 0 {
                for n in 0..2 {
                    let o = path.states(k - 1).column(n).dotc(&s.column(n));
                    assert!(o.re > 0.0 && o.im.abs() < 1e-12);
                }
            }
        }
        assert!((smallest.0 - w).abs() < 1e-12 && smallest.1.abs() < 1e-12);
    }

    #[test]
    fn crossing_is_refused() {
        let grid = TimeGrid::new(-1.0, 1.0, 100).unwrap();
        match track_eigenpath(&landau_zener(1.0, 0.0), &grid, None) {
            Err(Error::LevelCrossing { t, .. }) => assert!(t.abs() < 1e-12),
            other => panic!("expected crossing, got {other:?}"),
        }
    }

    #[test]
    fn off_grid_eigenbasis_is_continuous() {
        let grid = TimeGrid::new(-2.0, 2.0, 400).unwrap();
        let path = track_eigenpath(&landau_zener(1.0, 0.5), &grid, None).unwrap();
        let (e, v) = path.eigen_at(grid.time(123)).unwrap();
        assert!((&e - path.energies(123)).amax() < 1e-14);
        assert!((&v - path.states(123)).max_abs() < 1e-14);
        let (_, mid) = path.eigen_at(grid.time(123) + 0.3 * grid.dt()).unwrap();
        assert!((&mid - path.states(123)).max_abs() < 10.0 * grid.dt());
    }
}
