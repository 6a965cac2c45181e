use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::one_component::ControlArea;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    RegularRect,
    /// Rectangular pulses whose height is scaled by `1 + G·𝒩`, `𝒩 ~ U(−1, 1)`
    /// drawn once per window.
    NoisyRect,
    /// Instantaneous kicks `Φ δ(t − mτ)`.
    IdealDelta,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPolicy {
    /// `+, −, +, −, …` by window index.
    PeriodicFlip,
    /// Independent `±1` per window with equal probability.
    RandomFlip,
    Constant,
}

/// Train of pulses `c(t)`; window `m ≥ 1` occupies `[mτ − Δ, mτ)`.
///
/// Per-window randomness (sign and noise) is a pure function of
/// `(seed, m)`, so evaluation order does not matter.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub kind: PulseKind,
    /// Phase area `Φ` of one pulse.
    pub strength: f64,
    /// Pulse width `Δ`.
    pub duration: f64,
    /// Period `τ`.
    pub period: f64,
    /// Relative noise level `G ∈ [0, 1]`.
    pub noise: f64,
    pub sign_policy: SignPolicy,
    pub seed: u64,
}

impl PulseSequence {
    pub fn none() -> Self {
        Self {
            kind: PulseKind::None,
            strength: 0.0,
            duration: 1.0,
            period: 1.0,
            noise: 0.0,
            sign_policy: SignPolicy::Constant,
            seed: 0,
        }
    }

    pub fn regular(strength: f64, duration: f64, period: f64, sign_policy: SignPolicy) -> Result<Self> {
        Self {
            kind: PulseKind::RegularRect,
            strength,
            duration,
            period,
            noise: 0.0,
            sign_policy,
            seed: 0,
        }
        .validated()
    }

    pub fn noisy(
        strength: f64,
        duration: f64,
        period: f64,
        noise: f64,
        sign_policy: SignPolicy,
        seed: u64,
    ) -> Result<Self> {
        Self {
            kind: PulseKind::NoisyRect,
            strength,
            duration,
            period,
            noise,
            sign_policy,
            seed,
        }
        .validated()
    }

    pub fn ideal(strength: f64, period: f64, sign_policy: SignPolicy) -> Result<Self> {
        Self {
            kind: PulseKind::IdealDelta,
            strength,
            duration: 0.0,
            period,
            noise: 0.0,
            sign_policy,
            seed: 0,
        }
        .validated()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if self.kind == PulseKind::None {
            return Ok(self);
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::InvalidParameter(format!("pulse period must be positive, got {}", self.period)));
        }
        if !self.strength.is_finite() {
            return Err(Error::InvalidParameter("pulse strength must be finite".into()));
        }
        let rect = matches!(self.kind, PulseKind::RegularRect | PulseKind::NoisyRect);
        if rect && !(self.duration > 0.0 && self.duration <= self.period) {
            return Err(Error::InvalidParameter(format!(
                "pulse duration must satisfy 0 < duration <= period, got {} with period {}",
                self.duration, self.period
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter(format!("noise level must lie in [0, 1], got {}", self.noise)));
        }
        Ok(self)
    }

    pub fn is_active(&self) -> bool {
        self.kind != PulseKind::None && self.strength != 0.0
    }

    fn window_rng(&self, m: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(m);
        rng
    }

    /// Sign of window `m`.
    pub fn sign(&self, m: u64) -> f64 {
        match self.sign_policy {
            SignPolicy::Constant => 1.0,
            SignPolicy::PeriodicFlip => {
                if m % 2 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            SignPolicy::RandomFlip => {
                if self.window_rng(m).random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// The noise sample `𝒩_m ∈ (−1, 1)` of window `m` (zero unless noisy).
    pub fn noise_sample(&self, m: u64) -> f64 {
        if self.kind != PulseKind::NoisyRect || self.noise == 0.0 {
            return 0.0;
        }
        let mut rng = self.window_rng(m);
        let _sign_draw: bool = rng.random();
        loop {
            let x: f64 = rng.random_range(-1.0..1.0);
            if x > -1.0 {
                return x;
            }
        }
    }

    /// Signed phase area of window `m`.
    pub fn window_area(&self, m: u64) -> f64 {
        match self.kind {
            PulseKind::None => 0.0,
            _ => self.sign(m) * self.strength * (1.0 + self.noise * self.noise_sample(m)),
        }
    }

    /// Index of the window containing `t`, if any.
    pub fn window_of(&self, t: f64) -> Option<u64> {
        if !matches!(self.kind, PulseKind::RegularRect | PulseKind::NoisyRect) || t < 0.0 {
            return None;
        }
        let mut m = (t / self.period).floor() as u64 + 1;
        if t >= m as f64 * self.period {
            m += 1;
        }
        let start = m as f64 * self.period - self.duration;
        (t >= start).then_some(m)
    }

    /// `c(t)`; zero between windows and for ideal kicks.
    pub fn value(&self, t: f64) -> f64 {
        match self.window_of(t) {
            Some(m) => self.window_area(m) / self.duration,
            None => 0.0,
        }
    }

    /// Kick times `mτ` in `(a, b]` for ideal pulses.
    pub fn kick_times(&self, a: f64, b: f64) -> Vec<(u64, f64)> {
        if self.kind != PulseKind::IdealDelta {
            return Vec::new();
        }
        let first = ((a / self.period).floor().max(0.0)) as u64 + 1;
        (first..)
            .map(|m| (m, m as f64 * self.period))
            .skip_while(|(_, t)| *t <= a)
            .take_while(|(_, t)| *t <= b)
            .collect()
    }

    /// Window edges lying in `[a, b]`.
    pub fn edges(&self, a: f64, b: f64) -> Vec<f64> {
        match self.kind {
            PulseKind::None => Vec::new(),
            PulseKind::IdealDelta => self.kick_times(a, b).into_iter().map(|(_, t)| t).collect(),
            _ => {
                let first = ((a / self.period).floor().max(0.0)) as u64 + 1;
                let mut out = Vec::new();
                let mut m = first;
                loop {
                    let end = m as f64 * self.period;
                    let start = end - self.duration;
                    if start > b {
                        break;
                    }
                    for e in [start, end] {
                        if e >= a && e <= b {
                            out.push(e);
                        }
                    }
                    m += 1;
                }
                out
            }
        }
    }
}

impl ControlArea for PulseSequence {
    fn area(&self, a: f64, b: f64) -> f64 {
        if b <= a || !self.is_active() {
            return 0.0;
        }
        match self.kind {
            PulseKind::None => 0.0,
            PulseKind::IdealDelta => self.kick_times(a, b).iter().map(|(m, _)| self.window_area(*m)).sum(),
            _ => {
                let first = ((a.max(0.0) / self.period).floor()) as u64 + 1;
                let mut total = 0.0;
                let mut m = first;
                loop {
                    let end = m as f64 * self.period;
                    let start = end - self.duration;
                    if start >= b {
                        break;
                    }
                    let overlap = end.min(b) - start.max(a);
                    if overlap > 0.0 {
                        total += overlap * self.window_area(m) / self.duration;
                    }
                    m += 1;
                }
                total
            }
        }
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.edges(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rectangular_window_membership() {
        let seq = PulseSequence::regular(PI, 0.01, 0.02, SignPolicy::Constant).unwrap();
        assert!((seq.value(0.015) - 100.0 * PI).abs() < 1e-9);
        assert_eq!(seq.value(0.005), 0.0);
        // half-open windows
        assert_eq!(seq.value(0.02), 0.0);
        assert!((seq.value(0.03) - 100.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn zero_noise_equals_regular() {
        let reg = PulseSequence::regular(2.0, 0.01, 0.02, SignPolicy::RandomFlip).unwrap().with_seed(5);
        let noisy = PulseSequence::noisy(2.0, 0.01, 0.02, 0.0, SignPolicy::RandomFlip, 5).unwrap();
        for k in 0..2000 {
            let t = k as f64 * 0.000_731;
            assert_eq!(reg.value(t), noisy.value(t));
        }
    }

    #[test]
    fn noise_is_bounded_constant_per_window_and_seeded() {
        let seq = PulseSequence::noisy(1.0, 0.01, 0.02, 0.5, SignPolicy::Constant, 11).unwrap();
        for m in 1..500u64 {
            let start = m as f64 * 0.02 - 0.01;
            let a = seq.value(start + 0.001);
            let b = seq.value(start + 0.009);
            assert_eq!(a, b);
            assert!(a > 0.5 * 100.0 && a < 1.5 * 100.0);
        }
        let again = PulseSequence::noisy(1.0, 0.01, 0.02, 0.5, SignPolicy::Constant, 11).unwrap();
        assert_eq!(seq.value(3.215), again.value(3.215));
        let other = PulseSequence::noisy(1.0, 0.01, 0.02, 0.5, SignPolicy::Constant, 12).unwrap();
        assert_ne!(seq.value(3.215), other.value(3.215));
    }

    #[test]
    fn areas_are_exact() {
        let seq = PulseSequence::regular(2.0 * PI, 0.01, 0.02, SignPolicy::Constant).unwrap();
        assert!((seq.area(0.0, 1.0) - 50.0 * 2.0 * PI).abs() < 1e-9);
        assert!((seq.area(0.0, 0.015) - PI).abs() < 1e-9);
        assert!((seq.area(0.013, 0.017) - 0.4 * 2.0 * PI).abs() < 1e-9);
        let kicks = PulseSequence::ideal(1.5, 0.1, SignPolicy::Constant).unwrap();
        assert!((kicks.area(0.0, 1.0) - 15.0).abs() < 1e-12);
        assert_eq!(kicks.value(0.1), 0.0);
    }

    #[test]
    fn sign_flips_average_out() {
        let full = PI / 0.02;
        for policy in [SignPolicy::PeriodicFlip, SignPolicy::RandomFlip] {
            let seq = PulseSequence::regular(PI, 0.01, 0.02, policy).unwrap().with_seed(3);
            for t in [100.0, 500.0, 2000.0] {
                let mean = seq.area(0.0, t) / t;
                // random-walk bound on the partial sums of ±Φ
                let bound = 4.0 * PI * (t / 0.02f64).sqrt() / t;
                assert!(mean.abs() <= bound, "{policy:?} at {t}: {mean}");
            }
            assert!((seq.area(0.0, 2000.0) / 2000.0).abs() < 0.01 * full);
        }
        let constant = PulseSequence::regular(PI, 0.01, 0.02, SignPolicy::Constant).unwrap();
        assert!((constant.area(0.0, 400.0) / 400.0 - full).abs() < 1e-6);
    }

    #[test]
    fn invalid_sequences_rejected() {
        assert!(PulseSequence::regular(1.0, 0.03, 0.02, SignPolicy::Constant).is_err());
        assert!(PulseSequence::regular(1.0, 0.0, 0.02, SignPolicy::Constant).is_err());
        assert!(PulseSequence::noisy(1.0, 0.01, 0.02, 1.5, SignPolicy::Constant, 0).is_err());
        assert!(PulseSequence::ideal(1.0, 0.0, SignPolicy::Constant).is_err());
    }
}
