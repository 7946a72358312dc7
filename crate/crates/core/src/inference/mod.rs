//! Posterior summaries: forecasting, circular HPD regions, density grids,
//! leave-one-out cross-validation and convergence diagnostics.

pub mod cv;
pub mod density;
pub mod diagnostics;
pub mod forecast;
pub mod hpd;
pub mod samples;

pub use cv::{loo_cv, CvConfig, CvReport};
pub use density::{density_grid, latent_density_grid, DensityGrid};
pub use diagnostics::{diagnostics, effective_sample_size, geweke_z, DiagnosticsReport};
pub use forecast::forecast_y_next;
pub use hpd::{hpd_circular, Arc, HpdRegion};
pub use samples::{PosteriorSamples, SampleMeta};
