use rand::Rng;

use super::samples::{self as names, PosteriorSamples};
use crate::circ::{wrap, wrapped_normal_sample, Angle};
use crate::error::{Error, Result};

/// One draw of `y_{T+1}` per retained posterior draw: wrapped normal with
/// mean `f*(T+1, x_{T+1})` and variance `σ²_ε` of that draw.
pub fn forecast_y_next<R: Rng + ?Sized>(samples: &PosteriorSamples, rng: &mut R) -> Result<Vec<Angle>> {
    let f = samples.require(names::FSTAR_NEXT)?;
    let s = samples.require(names::SIGMA_EPS)?;
    predictive_draws(f, s, rng)
}

/// Wrapped-normal draws with per-draw means `f` and standard deviations `sd`.
pub fn predictive_draws<R: Rng + ?Sized>(f: &[f64], sd: &[f64], rng: &mut R) -> Result<Vec<Angle>> {
    if f.len() != sd.len() {
        return Err(Error::invalid("mean and scale columns differ in length"));
    }
    f.iter()
        .zip(sd)
        .map(|(&m, &s)| {
            if s == 0.0 {
                wrap(m)
            } else {
                wrapped_normal_sample(rng, m, s * s).map(|(a, _)| a)
            }
        })
        .collect()
}
