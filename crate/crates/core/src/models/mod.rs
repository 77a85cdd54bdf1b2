//! Parametric return models, seeded samplers, EM fitting and synthetic data generation.

pub mod dgp;
pub mod em;
pub mod kernel;
pub mod loss;
pub mod mixture;
pub mod sample;

pub use dgp::{synth_dgp, DgpSpec};
pub use em::{em_fit_gmix, em_fit_tmix, EmConfig, EmFit};
pub use kernel::Kernel;
pub use loss::{LossDistribution, LossPart};
pub use mixture::{
    Family, GaussianMixture, Mixture, MixtureComponent, ModelFile, ReturnModel, StudentTMixture,
};
pub use sample::{
    portfolio_losses, sample_gmix, sample_model, sample_tmix, Provenance, ReturnSample, RowSource,
    Subset,
};

use crate::allocation::RawAllocation;

/// `F_{-y'X}(z)` for a Student-t mixture.
pub fn loss_cdf_tmix(model: &StudentTMixture, y: &RawAllocation, z: f64) -> f64 {
    model.loss_distribution(y.as_slice()).cdf(z)
}

/// `f_{-y'X}(z)` for a Student-t mixture.
pub fn loss_pdf_tmix(model: &StudentTMixture, y: &RawAllocation, z: f64) -> f64 {
    model.loss_distribution(y.as_slice()).pdf(z)
}
