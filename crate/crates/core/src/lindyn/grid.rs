use crate::error::{Error, Result};

/// Uniform time grid `t0 + k·dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid on `[t0, t1]` with `n_steps` equal steps.
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidGrid(format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be positive".into()));
        }
        Ok(Self {
            t0,
            dt: (t1 - t0) / n_steps as f64,
            n_steps,
        })
    }

    /// Grid on `[t0, t1]` with step `dt`; `(t1 - t0) / dt` must be an integer
    /// to one part in 10⁹.
    pub fn with_step(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        let ratio = (t1 - t0) / dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "dt = {dt} does not divide [{t0}, {t1}]"
            )));
        }
        Self::new(t0, t1, n as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.time(k))
    }

    /// Index of `t` if it lies on the grid (relative tolerance 10⁻⁹ of a step).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if k < 0.0 || k > self.n_steps as f64 || (x - k).abs() > 1e-6 {
            return Err(Error::OffGrid { t });
        }
        Ok(k as usize)
    }

    /// Same span with every step split into `factor` substeps.
    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        Self {
            t0: self.t0,
            dt: self.dt / factor as f64,
            n_steps: self.n_steps * factor,
        }
    }

    /// Prefix of this grid ending at step `k`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_steps {
            return Err(Error::InvalidGrid(format!("cannot truncate to {k} steps")));
        }
        Ok(Self { n_steps: k, ..*self })
    }
}
