//! Loss function, nested forward-variance fit and outer parameter search.

mod calibrate;
mod config;
mod engine;
mod loss;
mod optimize;
#[cfg(test)]
mod tests;

pub use calibrate::{
    atm_level_sweep, calibrate, calibrate_rho_curve, evaluate_theta, fit_xi0, parameter_names, reprice, surface_vols,
    synthetic_surface,
    CalibrationResult,
};
pub use config::{CalibrationConfig, MeshConfig, ModelFamily, RhoMode};
pub use engine::{Candidate, XiFit};
pub use loss::{loss, loss_flagged, quote_weight, LossBreakdown, QuoteVol, DEFAULT_CUTOFF};
pub use optimize::{differential_evolution, nelder_mead, Minimum};
