use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lindyn::{check_normalized, propagate, CVec, Generator, TimeGrid};

/// Survival below which a projection counts as absorbing the state.
const ABSORBED: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct ZenoOutcome {
    /// Renormalized post-measurement state (zero when absorbed).
    pub state: CVec,
    pub survival: f64,
    pub absorbed: bool,
}

/// Projects `state` onto `target` and renormalizes.
pub fn zeno_step(state: &CVec, target: &CVec) -> Result<ZenoOutcome> {
    if state.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), actual: state.len() });
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { what: "state", norm });
    }
    check_normalized(target, "projection target")?;
    let overlap = target.dotc(state);
    let survival = overlap.norm_sqr();
    if survival < ABSORBED {
        return Ok(ZenoOutcome { state: CVec::zeros(state.len()), survival, absorbed: true });
    }
    let phase = overlap / overlap.norm();
    Ok(ZenoOutcome { state: target * phase, survival, absorbed: false })
}

#[derive(Debug, Clone)]
pub struct ZenoRun {
    /// Survival probability of each projection.
    pub survivals: Vec<f64>,
    /// Product of all survivals (zero once absorbed).
    pub total_survival: f64,
    pub absorbed: bool,
}

/// Evolves `x0` under `gen` across `grid`, projecting onto `target(t_j)`
/// at `n_projections` equally spaced times (the last one at the grid end).
pub fn zeno_evolution<T>(gen: &Generator, x0: &CVec, grid: &TimeGrid, n_projections: usize, target: T) -> Result<ZenoRun>
where
    T: Fn(f64) -> CVec,
{
    if n_projections == 0 || grid.n_steps() % n_projections != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} steps cannot be split into {n_projections} equal projection intervals",
            grid.n_steps()
        )));
    }
    let per = grid.n_steps() / n_projections;
    let mut state = x0.clone();
    let mut survivals = Vec::with_capacity(n_projections);
    let mut total = 1.0;
    for j in 0..n_projections {
        let leg = TimeGrid::new(grid.time(j * per), grid.time((j + 1) * per), per)?;
        let out = propagate(gen, &state, &leg)?;
        let end = out.last().expect("non-empty propagation");
        let step = zeno_step(&(end / Complex64::new(end.norm(), 0.0)), &target(leg.t1()))?;
        survivals.push(step.survival);
        total *= step.survival;
        if step.absorbed {
            return Ok(ZenoRun { survivals, total_survival: 0.0, absorbed: true });
        }
        state = step.state;
    }
    Ok(ZenoRun { survivals, total_survival: total, absorbed: false })
}
