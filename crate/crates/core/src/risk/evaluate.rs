//! Full-sample risk evaluation and the long-only positivity check.

use super::empirical::{empirical_es, sample_mean};
use super::objective::LossObjective;
use super::spec::RiskMeasureSpec;
use crate::error::Result;

/// Evaluates a measure on a fixed loss sample, with the inner `zeta` minimised exactly.
#[derive(Debug, Clone)]
pub struct SampleRisk {
    spec: RiskMeasureSpec,
    objective: LossObjective,
}

impl SampleRisk {
    pub fn new(spec: &RiskMeasureSpec) -> Result<Self> {
        Ok(Self {
            spec: spec.clone(),
            objective: LossObjective::from_spec(spec)?,
        })
    }

    pub fn spec(&self) -> &RiskMeasureSpec {
        &self.spec
    }

    pub fn objective(&self) -> &LossObjective {
        &self.objective
    }

    /// `g(R)` on the sample: the quantity a sample-based descent minimises
    /// (plus the log barrier). ES terms use the method-7 tail mean.
    pub fn g_value(&self, losses: &[f64]) -> Result<f64> {
        match self.spec {
            RiskMeasureSpec::ExpectedShortfall { alpha } => empirical_es(losses, alpha),
            RiskMeasureSpec::EsMeanMixture { beta, delta, alpha } => {
                Ok(beta * empirical_es(losses, alpha)? + delta * sample_mean(losses))
            }
            _ => Ok(self.objective.minimize_zeta(losses)?.1),
        }
    }

    /// `R` on the sample.
    pub fn risk(&self, losses: &[f64]) -> Result<f64> {
        let v = self.g_value(losses)?;
        self.objective.risk_from_value(v)
    }
}

/// Measure value on a loss sample.
pub fn sample_risk(spec: &RiskMeasureSpec, losses: &[f64]) -> Result<f64> {
    SampleRisk::new(spec)?.risk(losses)
}

/// Probe portfolios for the positivity check: equal weights, then 0.9 on each asset in turn.
pub fn positivity_probes(d: usize) -> Vec<Vec<f64>> {
    let mut probes = vec![vec![1.0 / d as f64; d]];
    if d > 1 {
        let rest = 0.1 / (d - 1) as f64;
        for i in 0..d {
            let mut w = vec![rest; d];
            w[i] = 0.9;
            probes.push(w);
        }
    }
    probes
}

/// Warnings for long-only probe portfolios whose risk is not positive.
///
/// Only measures whose value can turn negative (those carrying expected
/// returns) are checked; everything else returns no warnings.
pub fn positivity_warnings<F>(spec: &RiskMeasureSpec, d: usize, risk: F) -> Result<Vec<String>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let checked = spec.is_es_family() || matches!(spec, RiskMeasureSpec::DeviationPlusMean { .. });
    if !checked {
        return Ok(Vec::new());
    }
    let mut warnings = Vec::new();
    for w in positivity_probes(d) {
        let r = risk(&w)?;
        if r <= 0.0 {
            let msg = format!(
                "{}: risk {r:.3e} <= 0 at long-only portfolio {:?}; risk budgeting assumes positive risk",
                spec.label(),
                w
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_risk_forms() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((sample_risk(&RiskMeasureSpec::es(0.8), &x).unwrap() - 9.5).abs() < 1e-12);
        assert!(
            (sample_risk(&RiskMeasureSpec::es_minus_mean(0.8), &x).unwrap() - 4.0).abs() < 1e-12
        );
        assert!((sample_risk(&RiskMeasureSpec::mad(), &x).unwrap() - 2.5).abs() < 1e-12);
        assert!(
            (sample_risk(&RiskMeasureSpec::Volatility, &x).unwrap() - 8.25f64.sqrt()).abs() < 1e-12
        );
    }

    #[test]
    fn positivity_flags_negative_risk() {
        let spec = RiskMeasureSpec::es(0.9);
        let w = positivity_warnings(&spec, 3, |w| Ok(w[0] - 0.5)).unwrap();
        // equal weights and the two probes light on asset 0
        assert_eq!(w.len(), 3);
        assert!(
            positivity_warnings(&RiskMeasureSpec::mad(), 3, |_| Ok(-1.0))
                .unwrap()
                .is_empty()
        );
        assert_eq!(positivity_probes(4).len(), 5);
    }
}
