use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindyn::{rk4_step_matrix, split, PQBlocks, TimeGrid};

/// Largest grid (number of points) for which a full kernel table is stored.
pub const MAX_TABLE_POINTS: usize = 20_000;

type KernelFn = dyn Fn(f64, f64) -> Complex64 + Send + Sync;

#[derive(Clone)]
pub enum KernelRepr {
    /// Lower-triangular table, row-major: entry `(i, j)`, `j ≤ i`, at
    /// `i(i+1)/2 + j`.
    Table(Arc<Vec<Complex64>>),
    /// `g(t_i, s_j) = Σ_r left_r[i]·right_r[j]`.
    Separable(Arc<Vec<(Vec<Complex64>, Vec<Complex64>)>>),
    /// Evaluated on demand.
    Function(Arc<KernelFn>),
}

impl fmt::Debug for KernelRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelRepr::Table(t) => write!(f, "Table({} entries)", t.len()),
            KernelRepr::Separable(s) => write!(f, "Separable(rank {})", s.len()),
            KernelRepr::Function(_) => write!(f, "Function"),
        }
    }
}

/// Memory kernel `g(t, s)`, `s ≤ t`, on a time grid, optionally with a
/// Markovian part `−2λ δ(t − s)`.
///
/// The phase factor `exp(−∫ₛᵗ h)` is not part of the kernel; it is supplied
/// separately by a [`super::PhaseAccumulator`].
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    grid: TimeGrid,
    repr: KernelRepr,
    markov_rate: f64,
}

#[inline]
pub(crate) fn tri_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl MemoryKernel {
    /// Kernel given by a callback of `(t, s)`.
    pub fn from_fn<F>(grid: TimeGrid, g: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            grid,
            repr: KernelRepr::Function(Arc::new(g)),
            markov_rate: 0.0,
        }
    }

    /// Sum of rank-one terms, each a pair of grid series `(left(t), right(s))`.
    pub fn separable(grid: TimeGrid, terms: Vec<(Vec<Complex64>, Vec<Complex64>)>) -> Result<Self> {
        for (l, r) in &terms {
            if l.len() != grid.len() || r.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    actual: l.len().min(r.len()),
                });
            }
        }
        Ok(Self {
            grid,
            repr: KernelRepr::Separable(Arc::new(terms)),
            markov_rate: 0.0,
        })
    }

    /// Lower-triangular table in row-major order.
    pub fn from_table(grid: TimeGrid, table: Vec<Complex64>) -> Result<Self> {
        let n = grid.len();
        if table.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                actual: table.len(),
            });
        }
        Ok(Self {
            grid,
            repr: KernelRepr::Table(Arc::new(table)),
            markov_rate: 0.0,
        })
    }

    /// Kernel that vanishes identically.
    pub fn zero(grid: TimeGrid) -> Self {
        Self::from_fn(grid, |_, _| Complex64::new(0.0, 0.0))
    }

    /// Pure Markovian kernel `−2λ δ(t − s)`.
    pub fn markov(grid: TimeGrid, rate: f64) -> Self {
        Self::zero(grid).with_markov_rate(rate)
    }

    /// Adds `−2λ δ(t − s)`; the delta contributes `−λ p(t)` to `ṗ(t)`.
    pub fn with_markov_rate(mut self, rate: f64) -> Self {
        self.markov_rate = rate;
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn repr(&self) -> &KernelRepr {
        &self.repr
    }

    pub fn markov_rate(&self) -> f64 {
        self.markov_rate
    }

    /// `g(t_i, s_j)` for `j ≤ i` (regular part only).
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(j <= i);
        match &self.repr {
            KernelRepr::Table(t) => t[tri_index(i, j)],
            KernelRepr::Separable(terms) => terms.iter().map(|(l, r)| l[i] * r[j]).sum(),
            KernelRepr::Function(f) => f(self.grid.time(i), self.grid.time(j)),
        }
    }

    /// Materializes the regular part as a table.
    pub fn tabulate(&self) -> Result<Self> {
        let n = self.grid.len();
        if n > MAX_TABLE_POINTS {
            return Err(Error::KernelTooLarge { points: n, limit: MAX_TABLE_POINTS });
        }
        let table: Vec<Complex64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| self.value(i, j))
            .collect();
        Ok(Self {
            grid: self.grid,
            repr: KernelRepr::Table(Arc::new(table)),
            markov_rate: self.markov_rate,
        })
    }
}

/// Builds `g(t_i, s_j) = R(t_i) G(t_i, s_j) W(s_j)` on the grid.
///
/// The columns `v_j(t) = G(t, s_j) W(s_j)` are advanced together one RK4 step
/// per row, so each column costs `O(n²)` per step.
pub fn kernel_from_blocks(blocks: &PQBlocks, grid: &TimeGrid) -> Result<MemoryKernel> {
    let npts = grid.len();
    if npts > MAX_TABLE_POINTS {
        return Err(Error::KernelTooLarge { points: npts, limit: MAX_TABLE_POINTS });
    }
    let m = blocks.dim() - 1;
    let dt = grid.dt();
    let mut table = vec![Complex64::new(0.0, 0.0); npts * (npts + 1) / 2];
    // column-major store of the v_j, one block of m entries per column
    let mut cols: Vec<Complex64> = Vec::with_capacity(npts * m);

    let mut here = split(&blocks.conjugated(grid.t0())?);
    cols.extend(here.w.iter().copied());
    table[0] = here.r.dot(&here.w);

    for i in 0..grid.n_steps() {
        let t = grid.time(i);
        let mid = split(&blocks.conjugated(t + 0.5 * dt)?);
        let next = split(&blocks.conjugated(grid.time(i + 1))?);
        let step = rk4_step_matrix(&[here.d.clone(), mid.d, next.d.clone()], dt);
        let r_next = next.r.clone();

        let row = &mut table[tri_index(i + 1, 0)..tri_index(i + 1, 0) + i + 2];
        let (old_row, new_entry) = row.split_at_mut(i + 1);
        cols.par_chunks_mut(m)
            .zip(old_row.par_iter_mut())
            .with_min_len(64)
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); m],
                |buf, (v, g)| {
                    for (a, o) in buf.iter_mut().enumerate() {
                        *o = (0..m).map(|b| step[(a, b)] * v[b]).sum();
                    }
                    v.copy_from_slice(buf);
                    *g = (0..m).map(|a| r_next[a] * v[a]).sum();
                },
            );
        cols.extend(next.w.iter().copied());
        new_entry[0] = next.r.dot(&next.w);
        here = next;
    }
    MemoryKernel::from_table(*grid, table)
}
