//! Metropolis-within-Gibbs sampling of the joint posterior.

pub mod conditionals;
pub mod forward;
pub mod geweke;
mod sampler;

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circ::{von_mises_draw, Angle};
use crate::error::{Error, Result};
use crate::gp::TimeAnglePoint;
use crate::inference::samples::{self as names, PosteriorSamples, SampleMeta};
use crate::linalg;
use crate::model::{ChainState, LookupGrid, Model, PriorConfig, Variances};
use crate::par::{self, ExecMode};

pub use sampler::{Sampler, VarianceParam};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub kappa_x0: f64,
    pub kappa_x_narrow: f64,
    pub kappa_x_wide: f64,
    pub mix_weight_wide: f64,
    pub wrap_rw_sd: f64,
    pub var_rw_logstep: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            kappa_x0: 3.0,
            kappa_x_narrow: 3.0,
            kappa_x_wide: 0.5,
            mix_weight_wide: 0.5,
            wrap_rw_sd: 1.0,
            var_rw_logstep: 0.1,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_x0", self.kappa_x0),
            ("kappa_x_narrow", self.kappa_x_narrow),
            ("kappa_x_wide", self.kappa_x_wide),
            ("wrap_rw_sd", self.wrap_rw_sd),
            ("var_rw_logstep", self.var_rw_logstep),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.mix_weight_wide) {
            return Err(Error::invalid("mix_weight_wide must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Quantities that can be recorded per retained draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    /// `x_1..x_{T+1}`.
    X,
    X0,
    K,
    N,
    /// `f*_1..f*_T`.
    Fstar,
    /// `f*(T+1, x_{T+1})`.
    FstarNext,
    Gstar,
    Dz,
    BetaF,
    BetaG,
    Variances,
}

impl FromStr for Track {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "x" => Track::X,
            "x0" => Track::X0,
            "K" | "k" => Track::K,
            "N" | "n" => Track::N,
            "fstar" => Track::Fstar,
            "fstar_T1" | "fstar_next" => Track::FstarNext,
            "gstar" => Track::Gstar,
            "Dz" | "dz" => Track::Dz,
            "beta_f" => Track::BetaF,
            "beta_g" => Track::BetaG,
            "variances" | "sigma" => Track::Variances,
            other => return Err(Error::invalid(format!("unknown tracked quantity `{other}`"))),
        })
    }
}

impl Track {
    pub fn as_str(self) -> &'static str {
        match self {
            Track::X => "x",
            Track::X0 => "x0",
            Track::K => "K",
            Track::N => "N",
            Track::Fstar => "fstar",
            Track::FstarNext => "fstar_T1",
            Track::Gstar => "gstar",
            Track::Dz => "Dz",
            Track::BetaF => "beta_f",
            Track::BetaG => "beta_g",
            Track::Variances => "variances",
        }
    }
}

pub fn default_track() -> Vec<Track> {
    vec![
        Track::X,
        Track::BetaF,
        Track::BetaG,
        Track::FstarNext,
        Track::Gstar,
        Track::Variances,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub sample_variances: bool,
    pub track: Vec<Track>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 250_000,
            burn_in: 200_000,
            thin: 1,
            seed: 0,
            sample_variances: false,
            track: default_track(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be below n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub attempts: u64,
    pub accepted: u64,
}

impl Counter {
    pub fn record(&mut self, accepted: bool) {
        self.attempts += 1;
        self.accepted += u64::from(accepted);
    }

    pub fn rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.accepted as f64 / self.attempts as f64)
    }

    fn merge(&mut self, o: &Counter) {
        self.attempts += o.attempts;
        self.accepted += o.accepted;
    }
}

/// Attempt/acceptance counts per Metropolis–Hastings updater.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceLog {
    pub x: Counter,
    pub x0: Counter,
    pub k: Counter,
    pub n: Counter,
    pub sigma_f2: Counter,
    pub sigma_eps2: Counter,
    pub sigma_g2: Counter,
    pub sigma_eta2: Counter,
}

impl AcceptanceLog {
    pub fn merge(&mut self, o: &AcceptanceLog) {
        self.x.merge(&o.x);
        self.x0.merge(&o.x0);
        self.k.merge(&o.k);
        self.n.merge(&o.n);
        self.sigma_f2.merge(&o.sigma_f2);
        self.sigma_eps2.merge(&o.sigma_eps2);
        self.sigma_g2.merge(&o.sigma_g2);
        self.sigma_eta2.merge(&o.sigma_eta2);
    }
}

/// Column names recorded for `track` at horizon `t` and grid size `n`.
pub fn column_names(track: &[Track], t: usize, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for tr in track {
        match tr {
            Track::X => out.extend((1..=t + 1).map(names::x_name)),
            Track::X0 => out.push(names::X0.into()),
            Track::K => out.extend((1..=t + 1).map(names::k_name)),
            Track::N => out.extend((1..=t).map(names::n_name)),
            Track::Fstar => out.extend((1..=t).map(names::fstar_name)),
            Track::FstarNext => out.push(names::FSTAR_NEXT.into()),
            Track::Gstar => out.push(names::GSTAR.into()),
            Track::Dz => out.extend((1..=n).map(names::dz_name)),
            Track::BetaF => out.extend((1..=4).map(names::beta_f_name)),
            Track::BetaG => out.extend((1..=4).map(names::beta_g_name)),
            Track::Variances => out.extend(
                [names::SIGMA_F, names::SIGMA_EPS, names::SIGMA_G, names::SIGMA_ETA].map(String::from),
            ),
        }
    }
    out
}

fn push_values(track: &[Track], st: &ChainState, row: &mut Vec<f64>) {
    let t = st.horizon();
    for tr in track {
        match tr {
            Track::X => row.extend(st.x[1..].iter().map(|a| a.radians())),
            Track::X0 => row.push(st.x[0].radians()),
            Track::K => row.extend(st.k.iter().map(|&k| k as f64)),
            Track::N => row.extend(st.n.iter().map(|&k| k as f64)),
            Track::Fstar => row.extend(st.f_star.iter().take(t)),
            Track::FstarNext => row.push(st.f_star[t]),
            Track::Gstar => row.push(st.g_star),
            Track::Dz => row.extend(st.grid.values.iter()),
            Track::BetaF => row.extend(st.beta_f.iter()),
            Track::BetaG => row.extend(st.beta_g.iter()),
            Track::Variances => {
                let v = &st.variances;
                row.extend([v.sigma_f, v.sigma_eps, v.sigma_g, v.sigma_eta]);
            }
        }
    }
}

/// Starting state: `x_t ~ vM(μ₀, κ₀)` independently, zero wrap counts,
/// regression coefficients at their prior means, and `g*`, `D_z`, `f*`
/// drawn from their Gaussian-process priors given the initial path.
pub fn initial_state<R: rand::Rng + ?Sized>(
    model: &Model,
    grid: &[TimeAnglePoint],
    variances: Variances,
    rng: &mut R,
) -> Result<ChainState> {
    variances.validate()?;
    let t = model.horizon();
    let p = &model.prior;
    let x: Vec<Angle> = (0..t + 2)
        .map(|_| von_mises_draw(rng, p.mu0.radians(), p.kappa0))
        .collect();
    let mut state = ChainState {
        x,
        k: vec![0; t + 1],
        n: vec![0; t],
        f_star: nalgebra::DVector::zeros(t + 1),
        g_star: 0.0,
        grid: LookupGrid::new(grid.to_vec()),
        beta_f: p.beta_f_mean,
        beta_g: p.beta_g_mean,
        variances,
    };
    forward::draw_g_block(model, &mut state, rng)?;
    let fk = model.f_kernel(&state)?;
    let mean = fk.h() * state.beta_f;
    state.f_star = linalg::mvn_draw(rng, &mean, fk.chol(), variances.f2());
    Ok(state)
}

/// Result of one chain.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub samples: PosteriorSamples,
    pub acceptance: AcceptanceLog,
    pub final_state: ChainState,
}

/// Runs one chain on `obs` (`None` entries are held out) with the look-up
/// grid at `grid`. `variances` are plugged in, or used as the starting
/// point when `cfg.sample_variances` is set.
pub fn run_chain(
    obs: &[Option<Angle>],
    grid: &[TimeAnglePoint],
    prior: &PriorConfig,
    cfg: &ChainConfig,
    pcfg: &ProposalConfig,
    variances: Variances,
) -> Result<ChainOutput> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::invalid("need at least one observation"));
    }
    let model = Model::new(obs.to_vec(), prior.clone(), cfg.sample_variances)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state = initial_state(&model, grid, variances, &mut rng)?;
    let names = column_names(&cfg.track, obs.len(), grid.len());
    let mut samples = PosteriorSamples::new(names);
    samples.meta = SampleMeta {
        seed: cfg.seed,
        config_digest: String::new(),
        n_iter: cfg.n_iter,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        chains: 1,
    };
    let mut sampler = Sampler::new(model, pcfg.clone(), state, rng)?;
    let mut row = Vec::new();
    for i in 0..cfg.n_iter {
        sampler.sweep().map_err(|e| Error::Sweep {
            sweep: i,
            source: Box::new(e),
        })?;
        if i >= cfg.burn_in && (i - cfg.burn_in).is_multiple_of(cfg.thin) {
            row.clear();
            push_values(&cfg.track, sampler.state(), &mut row);
            samples.push_row(&row)?;
        }
    }
    let (final_state, acceptance, _) = sampler.into_parts();
    Ok(ChainOutput {
        samples,
        acceptance,
        final_state,
    })
}

/// Runs `n_chains` independent chains (seeds `cfg.seed + i`) and stacks
/// their draws in chain order.
pub fn run_chains(
    obs: &[Option<Angle>],
    grid: &[TimeAnglePoint],
    prior: &PriorConfig,
    cfg: &ChainConfig,
    pcfg: &ProposalConfig,
    variances: Variances,
    n_chains: usize,
    mode: ExecMode,
) -> Result<(PosteriorSamples, AcceptanceLog)> {
    if n_chains == 0 {
        return Err(Error::invalid("need at least one chain"));
    }
    let outs = par::try_map_indexed(mode, n_chains, |i| {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(i as u64);
        run_chain(obs, grid, prior, &c, pcfg, variances)
    })?;
    let mut iter = outs.into_iter();
    let first = iter.next().expect("at least one chain");
    let mut samples = first.samples;
    let mut log = first.acceptance;
    for o in iter {
        samples.append(&o.samples)?;
        log.merge(&o.acceptance);
    }
    samples.meta.chains = n_chains;
    Ok((samples, log))
}
