use num_complex::Complex64;

use super::generator::{CMat, CVec, Generator};
use super::grid::TimeGrid;
use crate::error::{Error, Result};

/// One-step scheme for linear time-dependent systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Classical fourth-order Runge–Kutta, `M` sampled at both ends and the
    /// midpoint of each step.
    #[default]
    Rk4,
    /// Second-order exponential midpoint rule, `exp(M(t + dt/2)·dt)`.
    MidpointMagnus,
}

fn check_finite(m: &CMat, t: f64) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { what: "generator entry", t });
    }
    Ok(())
}

/// Samples `M` at the three RK4 nodes of the step starting at `t`.
fn nodes<F: Fn(f64) -> CMat>(m: &F, t: f64, dt: f64) -> Result<[CMat; 3]> {
    let a = m(t);
    let b = m(t + 0.5 * dt);
    let c = m(t + dt);
    check_finite(&a, t)?;
    check_finite(&b, t + 0.5 * dt)?;
    check_finite(&c, t + dt)?;
    Ok([a, b, c])
}

fn rk4_apply(ms: &[CMat; 3], x: &CVec, dt: f64) -> CVec {
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let k1 = &ms[0] * x;
    let k2 = &ms[1] * (x + &k1 * half);
    let k3 = &ms[1] * (x + &k2 * half);
    let k4 = &ms[2] * (x + &k3 * h);
    x + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0)
}

/// The linear map taken by one RK4 step of `∂ₜX = M X` from `t` to `t + dt`.
pub(crate) fn rk4_step_matrix(ms: &[CMat; 3], dt: f64) -> CMat {
    let n = ms[0].nrows();
    let id = CMat::identity(n, n);
    let half = Complex64::new(0.5 * dt, 0.0);
    let k1 = ms[0].clone();
    let k2 = &ms[1] * (&id + &k1 * half);
    let k3 = &ms[1] * (&id + &k2 * half);
    let k4 = &ms[2] * (&id + &k3 * Complex64::new(dt, 0.0));
    id + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0)
}

/// Step map for an arbitrary matrix function under `scheme`.
pub(crate) fn step_matrix<F: Fn(f64) -> CMat>(
    m: &F,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<CMat> {
    match scheme {
        Scheme::Rk4 => Ok(rk4_step_matrix(&nodes(m, t, dt)?, dt)),
        Scheme::MidpointMagnus => {
            let mid = m(t + 0.5 * dt);
            check_finite(&mid, t + 0.5 * dt)?;
            Ok((mid * Complex64::new(dt, 0.0)).exp())
        }
    }
}

/// Propagates `x0` across `grid` with the RK4 scheme; element `k` of the
/// result is `X(t_k)`.
pub fn propagate(gen: &Generator, x0: &CVec, grid: &TimeGrid) -> Result<Vec<CVec>> {
    propagate_with(gen, x0, grid, Scheme::Rk4)
}

pub fn propagate_with(
    gen: &Generator,
    x0: &CVec,
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<Vec<CVec>> {
    if x0.len() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            actual: x0.len(),
        });
    }
    gen.eval(grid.t0())?;
    let dt = grid.dt();
    let m = |t: f64| gen.eval_unchecked(t);
    let mut out = Vec::with_capacity(grid.len());
    out.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..grid.n_steps() {
        let t = grid.time(k);
        x = match scheme {
            Scheme::Rk4 => rk4_apply(&nodes(&m, t, dt)?, &x, dt),
            Scheme::MidpointMagnus => step_matrix(&m, t, dt, scheme)? * &x,
        };
        out.push(x.clone());
    }
    Ok(out)
}

/// Time-ordered exponential `G(t, s) = 𝒯 exp ∫ₛᵗ D`, built as the ordered
/// product of one-step maps on `grid`. Both `s` and `t` must be grid points.
pub fn time_ordered_propagator<F>(
    d: F,
    s: f64,
    t: f64,
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<CMat>
where
    F: Fn(f64) -> CMat,
{
    if s > t {
        return Err(Error::BackwardsInterval { s, t });
    }
    let i = grid.index_of(s)?;
    let j = grid.index_of(t)?;
    let first = d(s);
    check_finite(&first, s)?;
    let n = first.nrows();
    let mut g = CMat::identity(n, n);
    for k in i..j {
        g = step_matrix(&d, grid.time(k), grid.dt(), scheme)? * g;
    }
    Ok(g)
}
