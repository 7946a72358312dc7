//! Leave-one-out cross-validation: each fold hides one observation (its
//! wrap count and likelihood term are dropped while `x_t` stays in the
//! model) and predicts it from the refitted chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forecast::predictive_draws;
use super::hpd::{hpd_circular, HpdRegion};
use super::samples::{fstar_name, PosteriorSamples, SIGMA_EPS};
use crate::circ::Angle;
use crate::error::{Error, Result};
use crate::gp::TimeAnglePoint;
use crate::mcmc::{run_chain, ChainConfig, ProposalConfig, Track};
use crate::model::{PriorConfig, Variances};
use crate::par::{self, ExecMode};

#[derive(Clone, Debug)]
pub struct CvConfig {
    pub chain: ChainConfig,
    pub proposals: ProposalConfig,
    pub prior: PriorConfig,
    pub variances: Variances,
    pub grid: Vec<TimeAnglePoint>,
    pub hpd_mass: f64,
    pub hpd_bins: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldResult {
    pub t: usize,
    pub held_out: Angle,
    pub draws: Vec<Angle>,
    pub hpd: HpdRegion,
    pub covered: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub coverage: f64,
}

fn chain_config(cfg: &CvConfig) -> ChainConfig {
    let mut c = cfg.chain.clone();
    for tr in [Track::Fstar, Track::Variances] {
        if !c.track.contains(&tr) {
            c.track.push(tr);
        }
    }
    c
}

/// Posterior draws with observation `holdout` (1-based) removed, using
/// `cfg.chain.seed` unchanged. With `holdout = None` this is the full-data run.
pub fn fold_samples(obs: &[Angle], holdout: Option<usize>, cfg: &CvConfig) -> Result<PosteriorSamples> {
    let data: Vec<Option<Angle>> = obs
        .iter()
        .enumerate()
        .map(|(i, y)| if Some(i + 1) == holdout { None } else { Some(*y) })
        .collect();
    run_chain(&data, &cfg.grid, &cfg.prior, &chain_config(cfg), &cfg.proposals, cfg.variances).map(|o| o.samples)
}

/// Runs one fold per observation; fold `t` uses chain seed `seed + t`.
pub fn loo_cv(obs: &[Angle], cfg: &CvConfig, mode: ExecMode) -> Result<CvReport> {
    if obs.len() < 3 {
        return Err(Error::invalid(format!("cross-validation needs T ≥ 3, got {}", obs.len())));
    }
    let folds = par::try_map_indexed(mode, obs.len(), |i| {
        let t = i + 1;
        let run = || -> Result<FoldResult> {
            let mut c = cfg.clone();
            c.chain.seed = cfg.chain.seed.wrapping_add(t as u64);
            let samples = fold_samples(obs, Some(t), &c)?;
            let mut rng = ChaCha8Rng::seed_from_u64(c.chain.seed ^ 0x6c6f_6f63);
            let draws = predictive_draws(
                samples.require(&fstar_name(t))?,
                samples.require(SIGMA_EPS)?,
                &mut rng,
            )?;
            let hpd = hpd_circular(&draws, cfg.hpd_mass, cfg.hpd_bins)?;
            let covered = hpd.contains(obs[i]);
            Ok(FoldResult {
                t,
                held_out: obs[i],
                draws,
                hpd,
                covered,
            })
        };
        run().map_err(|e| Error::Fold {
            t,
            source: Box::new(e),
        })
    })?;
    let coverage = folds.iter().filter(|f| f.covered).count() as f64 / folds.len() as f64;
    Ok(CvReport { folds, coverage })
}
