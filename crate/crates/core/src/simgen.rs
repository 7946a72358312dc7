//! Synthetic data from the nonlinear benchmark state-space model
//! `x_t = αx + βx/(1+x²) + γcos(1.2(t−2)) + u_t`,
//! `y_t = −tan x_t + tan² x_t / 20 + v_t`, both wrapped onto the circle.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circ::{von_mises_sample, wrap, Angle};
use crate::error::{Error, Result};

const POLE_TOL: f64 = 1e-8;
const MAX_RESAMPLE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_eta: f64,
    pub sigma_eps: f64,
    /// `x_0`; drawn from `vM(π, 3)` when absent.
    pub x_init: Option<Angle>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 101,
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.2,
            sigma_eta: 0.1,
            sigma_eps: 0.1,
            x_init: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulated {
    /// `y_1..y_T`.
    pub observed: Vec<Angle>,
    /// `x_0..x_T`.
    pub latent: Vec<Angle>,
}

fn near_pole(x: f64) -> bool {
    (x - FRAC_PI_2).abs() < POLE_TOL || (x - 3.0 * FRAC_PI_2).abs() < POLE_TOL
}

/// Drift of the latent evolution at time `t` from the canonical value `x`.
pub fn drift(cfg: &SimConfig, x: f64, t: usize) -> f64 {
    cfg.alpha * x + cfg.beta * x / (1.0 + x * x) + cfg.gamma * (1.2 * (t as f64 - 2.0)).cos()
}

/// Observation map before noise.
pub fn observation_mean(x: f64) -> f64 {
    let tn = x.tan();
    -tn + tn * tn / 20.0
}

pub fn generate(cfg: &SimConfig) -> Result<Simulated> {
    if cfg.horizon == 0 {
        return Err(Error::invalid("simulation horizon must be at least 1"));
    }
    for (name, v) in [("sigma_eta", cfg.sigma_eta), ("sigma_eps", cfg.sigma_eps)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = match cfg.x_init {
        Some(a) => a,
        None => von_mises_sample(&mut rng, Angle::new(PI)?, 3.0)?,
    };
    let mut latent = vec![x0];
    let mut observed = Vec::with_capacity(cfg.horizon);
    for t in 1..=cfg.horizon {
        let prev = latent[t - 1].radians();
        let m = drift(cfg, prev, t);
        let mut x = None;
        for _ in 0..MAX_RESAMPLE {
            let u: f64 = rng.sample(StandardNormal);
            let cand = wrap(m + cfg.sigma_eta * u)?;
            if !near_pole(cand.radians()) {
                x = Some(cand);
                break;
            }
            if cfg.sigma_eta == 0.0 {
                break;
            }
        }
        let x = x.ok_or_else(|| {
            Error::invalid(format!("latent state at t={t} stays on a pole of tan after resampling"))
        })?;
        let v: f64 = rng.sample(StandardNormal);
        observed.push(wrap(observation_mean(x.radians()) + cfg.sigma_eps * v)?);
        latent.push(x);
    }
    Ok(Simulated { observed, latent })
}
