//! Bayesian nonparametric state-space modelling of circular time series.

pub mod circ;
pub mod cli;
pub mod error;
pub mod gp;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod mcmc;
pub mod mle;
pub mod model;
pub mod par;
pub mod simgen;

pub use error::{Error, Result};
