use serde::{Deserialize, Serialize};

use crate::error::{RbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Osbgd,
    Msbgd,
    Reference,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgd => "SGD",
            Method::Osbgd => "OSBGD",
            Method::Msbgd => "MSBGD",
            Method::Reference => "Reference",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// SGD learning rate `base * (1 + k)^-exponent` in preconditioned coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { base: f64 },
    Polynomial { base: f64, exponent: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Polynomial {
            base: 0.3,
            exponent: 0.75,
        }
    }
}

impl StepSchedule {
    pub fn rate(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant { base } => base,
            StepSchedule::Polynomial { base, exponent } => base * (1.0 + k as f64).powf(-exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub batch_size: usize,
    pub epochs: usize,
    pub step_schedule: StepSchedule,
    /// Fraction of the final SGD iterates entering the Polyak-Ruppert average.
    pub averaging_fraction: f64,
    /// Number of final MSBGD iterates averaged.
    pub last_k: usize,
    /// Relative finite-difference step of the sample-based descents.
    pub fd_step: f64,
    /// Objective-change threshold (OSBGD) or gradient sup-norm threshold (reference).
    pub stop_tol: f64,
    /// Iteration cap; `None` picks the method default (OSBGD 500, MSBGD 60, reference 10000).
    pub max_iters: Option<usize>,
    pub resample_size: usize,
    pub seed: u64,
    /// Starting allocation direction; rescaled along its ray before solving.
    pub initial_point: Option<Vec<f64>>,
    /// Maximum number of points kept in the SGD objective trace.
    pub trace_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Sgd,
            batch_size: 128,
            epochs: 10,
            step_schedule: StepSchedule::default(),
            averaging_fraction: 0.2,
            last_k: 5,
            fd_step: 1e-4,
            stop_tol: 1e-6,
            max_iters: None,
            resample_size: 100_000,
            seed: 0,
            initial_point: None,
            trace_points: 1000,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iters.unwrap_or(match self.method {
            Method::Osbgd => 500,
            Method::Msbgd => 60,
            Method::Reference => 10_000,
            Method::Sgd => usize::MAX,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RbError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad(format!("fd_step must be positive, got {}", self.fd_step));
        }
        if !(self.averaging_fraction > 0.0 && self.averaging_fraction <= 1.0) {
            return bad(format!(
                "averaging_fraction must lie in (0,1], got {}",
                self.averaging_fraction
            ));
        }
        if self.last_k == 0 {
            return bad("last_k must be >= 1".into());
        }
        if !(self.stop_tol > 0.0) {
            return bad(format!("stop_tol must be positive, got {}", self.stop_tol));
        }
        if self.resample_size < 2 {
            return bad("resample_size must be >= 2".into());
        }
        if self.max_iters == Some(0) {
            return bad("max_iters must be >= 1".into());
        }
        match self.step_schedule {
            StepSchedule::Constant { base } | StepSchedule::Polynomial { base, .. }
                if !(base > 0.0) =>
            {
                return bad(format!("step base must be positive, got {base}"));
            }
            _ => {}
        }
        if let Some(p) = &self.initial_point {
            if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("initial_point must be strictly positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_json() {
        let c: SolverConfig = serde_json::from_str(r#"{"method":"osbgd","seed":7}"#).unwrap();
        assert_eq!(c.method, Method::Osbgd);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.fd_step, 1e-4);
        assert_eq!(c.iteration_cap(), 500);
        assert_eq!(c.seed, 7);
        let c: SolverConfig =
            serde_json::from_str(r#"{"step_schedule":{"kind":"constant","base":2.0}}"#).unwrap();
        assert_eq!(c.step_schedule.rate(100), 2.0);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"batch":3}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let c = SolverConfig {
            averaging_fraction: 0.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            fd_step: -1.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn polynomial_schedule_decays() {
        let s = StepSchedule::Polynomial {
            base: 1.0,
            exponent: 0.6,
        };
        assert_eq!(s.rate(0), 1.0);
        assert!((s.rate(31) - 32f64.powf(-0.6)).abs() < 1e-15);
    }
}
