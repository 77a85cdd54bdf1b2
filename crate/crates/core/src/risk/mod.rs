//! Risk measure specifications, exact and empirical evaluators, and the
//! stochastic objectives minimised by the solvers.

pub mod empirical;
pub mod evaluate;
pub mod objective;
pub mod parametric;
pub mod spec;
pub mod spectral;

pub use empirical::{empirical_es, empirical_var_method7, sample_mean};
pub use evaluate::{positivity_probes, positivity_warnings, sample_risk, SampleRisk};
pub use objective::{
    deviation_objective, deviation_subgradient, ru_objective, ru_subgradient, spectral_objective,
    spectral_subgradient, stochastic_objective, stochastic_subgradient, LossObjective, ZetaState,
};
pub use parametric::{
    es_gmix, es_mixture, es_tmix, var_gmix, var_mixture, var_tmix, volatility_value_and_gradient,
    Volatility,
};
pub use spec::RiskMeasureSpec;
pub use spectral::{spectral_grid, SpectralGrid, SPECTRAL_S_MAX};
