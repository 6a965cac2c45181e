use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lindyn::{PQBlocks, TimeGrid, I};

/// Something with an exactly known time integral, such as a pulse train `c(t)`.
pub trait ControlArea {
    /// `∫ₐᵇ c(t) dt`.
    fn area(&self, a: f64, b: f64) -> f64;

    /// Points in `[a, b]` where `c` is discontinuous.
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64>;
}

/// The diagonal block `h(t)` sampled on a grid together with
/// `C(t) = i∫₀ᵗ h(s) ds`.
#[derive(Debug, Clone)]
pub struct PhaseAccumulator {
    grid: TimeGrid,
    h: Vec<Complex64>,
    c: Vec<Complex64>,
}

// two-point Gauss–Legendre nodes on [0, 1]
const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;

fn gauss2<F: Fn(f64) -> Complex64>(h: &F, a: f64, b: f64) -> Complex64 {
    let w = b - a;
    (h(a + GAUSS_LO * w) + h(a + GAUSS_HI * w)) * (0.5 * w)
}

/// Accumulates `C(t) = i∫₀ᵗ h` on `grid`.
///
/// Each grid step is split at any of `breakpoints` that fall inside it and
/// integrated with two-point Gauss–Legendre on every piece, so piecewise-linear
/// integrands (rectangular pulses in particular) are integrated exactly and
/// `h` is never sampled on a discontinuity.
pub fn phase_integral<F>(h: F, grid: &TimeGrid, breakpoints: &[f64]) -> Result<PhaseAccumulator>
where
    F: Fn(f64) -> Complex64,
{
    let mut bps: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| *b > grid.t0() && *b < grid.t1())
        .collect();
    bps.sort_by(|a, b| a.total_cmp(b));

    let mut hs = Vec::with_capacity(grid.len());
    let mut cs = Vec::with_capacity(grid.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut next_bp = 0;
    let check = |z: Complex64, t: f64| -> Result<Complex64> {
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(Error::NonFinite { what: "h", t })
        }
    };
    hs.push(check(h(grid.t0()), grid.t0())?);
    cs.push(acc);
    for k in 0..grid.n_steps() {
        let (a, b) = (grid.time(k), grid.time(k + 1));
        let mut left = a;
        while next_bp < bps.len() && bps[next_bp] <= a {
            next_bp += 1;
        }
        while next_bp < bps.len() && bps[next_bp] < b {
            let bp = bps[next_bp];
            if bp - left > 1e-14 * grid.dt() {
                acc += gauss2(&h, left, bp);
            }
            left = bp;
            next_bp += 1;
        }
        acc += gauss2(&h, left, b);
        let acc_c = check(acc, b)?;
        hs.push(check(h(b), b)?);
        cs.push(acc_c * I);
    }
    Ok(PhaseAccumulator { grid: *grid, h: hs, c: cs })
}

impl PhaseAccumulator {
    /// `h ≡ 0`, `C ≡ 0`.
    pub fn zero(grid: &TimeGrid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid: *grid, h: z.clone(), c: z }
    }

    /// Phase of the target diagonal block of a partitioned generator.
    pub fn from_blocks(blocks: &PQBlocks, grid: &TimeGrid, breakpoints: &[f64]) -> Result<Self> {
        blocks.h(grid.t0())?;
        phase_integral(|t| blocks.conjugated_unchecked(t)[(0, 0)], grid, breakpoints)
    }

    /// From grid samples of `h`, integrated by the trapezoid rule.
    pub fn from_samples(grid: &TimeGrid, h: Vec<Complex64>) -> Result<Self> {
        if h.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: h.len() });
        }
        let mut c = Vec::with_capacity(h.len());
        let mut acc = Complex64::new(0.0, 0.0);
        c.push(acc);
        for k in 1..h.len() {
            acc += (h[k - 1] + h[k]) * (0.5 * grid.dt());
            if !(acc.re.is_finite() && acc.im.is_finite()) {
                return Err(Error::NonFinite { what: "h", t: grid.time(k) });
            }
            c.push(acc * I);
        }
        Ok(Self { grid: *grid, h, c })
    }

    /// Adds `contrast · ∫₀ᵗ c` to `C(t)` and `−i·contrast·c(t)` to `h`.
    ///
    /// `contrast = 1` is a plain shift `h → h − i c`; the rotating LEO shifts
    /// `h` and the complement diagonal in opposite directions and acts with
    /// `contrast = 2`.
    pub fn with_control<A: ControlArea + ?Sized>(
        &self,
        control: &A,
        contrast: f64,
        sample: impl Fn(f64) -> f64,
    ) -> Self {
        let mut out = self.clone();
        let mut area = 0.0;
        for k in 0..self.grid.len() {
            if k > 0 {
                area += control.area(self.grid.time(k - 1), self.grid.time(k));
            }
            out.c[k] += Complex64::new(contrast * area, 0.0);
            out.h[k] += Complex64::new(0.0, -contrast * sample(self.grid.time(k)));
        }
        out
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn c(&self) -> &[Complex64] {
        &self.c
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    /// `e^{−iC(t_k)}`.
    pub fn rotation(&self, k: usize) -> Complex64 {
        (-I * self.c[k]).exp()
    }
}
