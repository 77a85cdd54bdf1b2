use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{RbError, Result};
use crate::models::{DgpSpec, EmConfig};
use crate::solver::{Method, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Reference,
    SgdConvergence,
    AccuracyStudy,
    MeasureComparison,
}

/// How the model behind the model-based methods is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimation {
    /// The true data-generating model.
    TrueParams,
    /// Two-component Student-t mixture fitted by EM, dofs fixed to the true ones.
    TmixEm,
    /// Two-component Gaussian mixture fitted by EM.
    GmixEm,
}

impl Estimation {
    pub fn name(&self) -> &'static str {
        match self {
            Estimation::TrueParams => "true_params",
            Estimation::TmixEm => "tmix_em",
            Estimation::GmixEm => "gmix_em",
        }
    }
}

/// The data a method works from in the accuracy study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Directly on the historical sample.
    ModelFree,
    /// On a model obtained from the historical sample.
    ModelBased(Estimation),
}

impl Setting {
    pub fn name(&self) -> &'static str {
        match self {
            Setting::ModelFree => "model_free",
            Setting::ModelBased(e) => e.name(),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub dims: Vec<usize>,
    pub repetitions: usize,
    pub alpha: f64,
    pub dgp: DgpSpec,
    /// Explicit model for the single-model experiments; a path or `bundled:<name>`.
    pub model_file: Option<String>,
    pub estimation: Vec<Estimation>,
    /// Whether the model-free setting runs.
    pub model_free: bool,
    /// Rows of the historical sample.
    pub hist_size: usize,
    /// Rows simulated from a model for the sample-based methods.
    pub sim_size: usize,
    /// SGD epochs on the historical sample and on simulated samples.
    pub model_free_epochs: usize,
    pub model_based_epochs: usize,
    /// One configuration per method; MSBGD runs only in model-based settings.
    pub solver_configs: Vec<SolverConfig>,
    pub em: EmConfig,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            experiment: Experiment::AccuracyStudy,
            dims: vec![10],
            repetitions: 10,
            alpha: 0.95,
            dgp: DgpSpec::default(),
            model_file: None,
            estimation: vec![Estimation::TrueParams],
            model_free: true,
            hist_size: 3500,
            sim_size: 1_000_000,
            model_free_epochs: 100,
            model_based_epochs: 4,
            solver_configs: vec![
                SolverConfig::with_method(Method::Sgd),
                SolverConfig::with_method(Method::Osbgd),
                SolverConfig::with_method(Method::Msbgd),
            ],
            em: EmConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| {
            RbError::Parse(format!(
                "experiment JSON, line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// The settings in output order.
    pub fn settings(&self) -> Vec<Setting> {
        let mut s = Vec::new();
        if self.model_free {
            s.push(Setting::ModelFree);
        }
        s.extend(self.estimation.iter().map(|e| Setting::ModelBased(*e)));
        s
    }

    /// Methods that run in `setting`, in configuration order.
    pub fn methods(&self, setting: Setting) -> Vec<&SolverConfig> {
        self.solver_configs
            .iter()
            .filter(|c| setting != Setting::ModelFree || c.method != Method::Msbgd)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RbError::InvalidConfig(m));
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.dims.is_empty() {
            return bad("dims must not be empty".into());
        }
        if let Some(d) = self.dims.iter().find(|&&d| d < 2) {
            return bad(format!("dimensions must be >= 2, got {d}"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if self.hist_size < 2 || self.sim_size < 2 {
            return bad("sample sizes must be >= 2".into());
        }
        if self.model_free_epochs == 0 || self.model_based_epochs == 0 {
            return bad("epoch counts must be >= 1".into());
        }
        let mut seen = Vec::new();
        for c in &self.solver_configs {
            c.validate()?;
            if c.method == Method::Reference {
                return bad("the reference solve is not a study method".into());
            }
            if seen.contains(&c.method) {
                return bad(format!("{} configured twice", c.method));
            }
            seen.push(c.method);
        }
        if self.settings().is_empty() {
            return bad("no setting enabled".into());
        }
        Ok(())
    }
}
