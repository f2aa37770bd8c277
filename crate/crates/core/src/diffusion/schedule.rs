use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Cosine,
    Linear,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(Error::Config(format!("unknown schedule kind '{other}'"))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::Linear => "linear",
        })
    }
}

const COSINE_OFFSET: f64 = 0.008;
const LINEAR_BETA_START: f64 = 1e-4;
const LINEAR_BETA_END: f64 = 0.02;

/// Per-step noise tables. Index 0 of `alpha_bar` is the clean state;
/// `beta`/`alpha` are indexed 1..=T (slot 0 is unused and set to 0/1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    steps: usize,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(steps: usize, kind: ScheduleKind) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Config(format!("need at least 2 diffusion steps, got {steps}")));
        }
        let mut beta = vec![0.0; steps + 1];
        match kind {
            ScheduleKind::Cosine => {
                let f = |t: usize| {
                    let x = (t as f64 / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
                    (x * FRAC_PI_2).cos().powi(2)
                };
                let f0 = f(0);
                for (t, b) in beta.iter_mut().enumerate().skip(1) {
                    let ratio = (f(t) / f0) / (f(t - 1) / f0);
                    *b = (1.0 - ratio).clamp(1e-8, 0.999);
                }
            }
            ScheduleKind::Linear => {
                // endpoints are quoted for T = 1000; other lengths rescale them by
                // 1000 / T so the cumulative noise level stays comparable
                let rescale = 1000.0 / steps as f64;
                for (t, b) in beta.iter_mut().enumerate().skip(1) {
                    let frac = (t - 1) as f64 / (steps - 1) as f64;
                    let raw = LINEAR_BETA_START + frac * (LINEAR_BETA_END - LINEAR_BETA_START);
                    *b = (raw * rescale).clamp(1e-8, 0.999);
                }
            }
        }
        Self::from_betas(kind, beta)
    }

    fn from_betas(kind: ScheduleKind, beta: Vec<f64>) -> Result<Self> {
        let steps = beta.len() - 1;
        let mut alpha = vec![1.0; steps + 1];
        let mut alpha_bar = vec![1.0; steps + 1];
        for t in 1..=steps {
            if !(beta[t] > 0.0 && beta[t] < 1.0) {
                return Err(Error::Config(format!("beta[{t}] = {} not in (0, 1)", beta[t])));
            }
            alpha[t] = 1.0 - beta[t];
            alpha_bar[t] = alpha_bar[t - 1] * alpha[t];
        }
        if alpha_bar[steps] >= 0.01 {
            return Err(Error::Config(format!(
                "terminal alpha_bar {} is not below 0.01",
                alpha_bar[steps]
            )));
        }
        Ok(Self {
            kind,
            steps,
            beta,
            alpha,
            alpha_bar,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// T.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps {
            return Err(Error::Step { t, max: self.steps });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_schedules() {
        assert!(matches!(
            NoiseSchedule::new(1, ScheduleKind::Cosine),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn alpha_bar_starts_at_one() {
        for kind in [ScheduleKind::Cosine, ScheduleKind::Linear] {
            let s = NoiseSchedule::new(10, kind).unwrap();
            assert_eq!(s.alpha_bar(0), 1.0);
        }
    }

    #[test]
    fn cosine_terminal_marginal_is_near_uniform() {
        // closed form: alpha_bar(T) = cos^2(pi/2) / cos^2(0.008/1.008 * pi/2) ~ 0, and
        // beta clipping at 0.999 only keeps a factor of 1e-3 on the last step
        let s = NoiseSchedule::new(100, ScheduleKind::Cosine).unwrap();
        assert!(s.alpha_bar(100) < 0.01, "{}", s.alpha_bar(100));
        let f = |t: f64| ((t / 100.0 + 0.008) / 1.008 * FRAC_PI_2).cos().powi(2);
        for t in [1usize, 10, 50, 90] {
            let closed = f(t as f64) / f(0.0);
            assert!((s.alpha_bar(t) - closed).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn linear_is_strictly_decreasing() {
        let s = NoiseSchedule::new(1000, ScheduleKind::Linear).unwrap();
        assert!((s.beta(1) - 1e-4).abs() < 1e-15);
        assert!((s.beta(1000) - 0.02).abs() < 1e-15);
        for t in 1..=1000 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        assert!(s.alpha_bar(1000) < 0.01);
    }

    #[test]
    fn linear_rescales_for_short_chains() {
        let s = NoiseSchedule::new(100, ScheduleKind::Linear).unwrap();
        assert!((s.beta(1) - 1e-3).abs() < 1e-15);
        assert!(s.alpha_bar(100) < 0.01);
    }

    #[test]
    fn cosine_strictly_decreasing_for_many_lengths() {
        for steps in [2usize, 5, 37, 100, 4000] {
            let s = NoiseSchedule::new(steps, ScheduleKind::Cosine).unwrap();
            for t in 1..=steps {
                assert!(s.beta(t) > 0.0 && s.beta(t) < 1.0);
                assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            }
            assert!(s.alpha_bar(steps) < 0.01);
        }
    }

    #[test]
    fn step_range() {
        let s = NoiseSchedule::new(5, ScheduleKind::Cosine).unwrap();
        assert!(s.check_step(0).is_err());
        assert!(s.check_step(6).is_err());
        assert!(s.check_step(5).is_ok());
    }
}
