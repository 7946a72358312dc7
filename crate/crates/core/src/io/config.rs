//! Flat `key = value` run configuration.
//!
//! One key per line; `#` starts a comment; blank lines are ignored. Vector
//! values are comma separated. Keys:
//!
//! ```text
//! seed                                   master seed (chain, annealing, simulation, grid)
//! input.unit      radians|degrees|clock24
//! input.column    column name in the series file (default `y`)
//! prior.mu0 prior.kappa0
//! prior.alpha_{eps,eta,f,g} prior.gamma_{eps,eta,f,g}
//! prior.beta_f_mean prior.beta_g_mean    4 values
//! prior.beta_f_cov prior.beta_g_cov      4 values (diagonal) or 16 (row major)
//! variances.sigma_{f,eps,g,eta}
//! proposal.kappa_x0 proposal.kappa_x_narrow proposal.kappa_x_wide
//! proposal.mix_weight_wide proposal.wrap_rw_sd proposal.var_rw_logstep
//! chain.n_iter chain.burn_in chain.thin chain.chains
//! chain.sample_variances                 true|false
//! chain.track                            list of x,x0,K,N,fstar,fstar_T1,gstar,Dz,beta_f,beta_g,variances
//! grid.size
//! anneal.t0 anneal.rho anneal.n_outer anneal.n_mc anneal.step_sd
//! anneal.init                            4 values σ_f,σ_ε,σ_g,σ_η
//! sim.horizon sim.alpha sim.beta sim.gamma sim.sigma_eta sim.sigma_eps
//! sim.x_init                             angle in radians, or `none`
//! output.hpd_mass output.hpd_bins output.density_bins output.forecast_draws
//! ```

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::circ::{Angle, AngleUnit};
use crate::error::{Error, Result};
use crate::mcmc::{ChainConfig, ProposalConfig, Track};
use crate::mle::AnnealConfig;
use crate::model::{PriorConfig, Variances};
use crate::simgen::SimConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub unit: AngleUnit,
    pub column: String,
    pub prior: PriorConfig,
    pub variances: Variances,
    pub proposals: ProposalConfig,
    pub chain: ChainConfig,
    pub chains: usize,
    pub grid_size: usize,
    pub anneal: AnnealConfig,
    pub sim: SimConfig,
    pub hpd_mass: f64,
    pub hpd_bins: usize,
    pub density_bins: usize,
    /// Draws per posterior sample in `forecast`.
    pub forecast_draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            unit: AngleUnit::Radians,
            column: "y".into(),
            prior: PriorConfig::default(),
            variances: Variances::default(),
            proposals: ProposalConfig::default(),
            chain: ChainConfig::default(),
            chains: 1,
            grid_size: 25,
            anneal: AnnealConfig::default(),
            sim: SimConfig::default(),
            hpd_mass: 0.95,
            hpd_bins: 360,
            density_bins: 72,
            forecast_draws: 1,
        }
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
}

fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| num::<f64>(s.trim())).collect()
}

fn vec4(v: &str) -> std::result::Result<Vector4<f64>, String> {
    let xs = list(v)?;
    if xs.len() != 4 {
        return Err(format!("expected 4 values, got {}", xs.len()));
    }
    Ok(Vector4::from_column_slice(&xs))
}

fn mat4(v: &str) -> std::result::Result<Matrix4<f64>, String> {
    let xs = list(v)?;
    match xs.len() {
        4 => Ok(Matrix4::from_diagonal(&Vector4::from_column_slice(&xs))),
        16 => Ok(Matrix4::from_row_slice(&xs)),
        n => Err(format!("expected 4 or 16 values, got {n}")),
    }
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn join<I: IntoIterator<Item = f64>>(xs: I) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn mat_string(m: &Matrix4<f64>) -> String {
    join((0..16).map(|k| m[(k / 4, k % 4)]))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::io::read_to_string(Error::open(path)?)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|message| Error::Config { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key. Errors carry a message without location.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let p = &mut self.prior;
        match key {
            "seed" => *self = self.with_seed(num(v)?),
            "input.unit" => self.unit = v.parse().map_err(|e: Error| e.to_string())?,
            "input.column" => self.column = v.to_owned(),
            "prior.mu0" => p.mu0 = Angle::new(num(v)?).map_err(|e| e.to_string())?,
            "prior.kappa0" => p.kappa0 = num(v)?,
            "prior.alpha_eps" => p.alpha_eps = num(v)?,
            "prior.gamma_eps" => p.gamma_eps = num(v)?,
            "prior.alpha_eta" => p.alpha_eta = num(v)?,
            "prior.gamma_eta" => p.gamma_eta = num(v)?,
            "prior.alpha_f" => p.alpha_f = num(v)?,
            "prior.gamma_f" => p.gamma_f = num(v)?,
            "prior.alpha_g" => p.alpha_g = num(v)?,
            "prior.gamma_g" => p.gamma_g = num(v)?,
            "prior.beta_f_mean" => p.beta_f_mean = vec4(v)?,
            "prior.beta_f_cov" => p.beta_f_cov = mat4(v)?,
            "prior.beta_g_mean" => p.beta_g_mean = vec4(v)?,
            "prior.beta_g_cov" => p.beta_g_cov = mat4(v)?,
            "variances.sigma_f" => self.variances.sigma_f = num(v)?,
            "variances.sigma_eps" => self.variances.sigma_eps = num(v)?,
            "variances.sigma_g" => self.variances.sigma_g = num(v)?,
            "variances.sigma_eta" => self.variances.sigma_eta = num(v)?,
            "proposal.kappa_x0" => self.proposals.kappa_x0 = num(v)?,
            "proposal.kappa_x_narrow" => self.proposals.kappa_x_narrow = num(v)?,
            "proposal.kappa_x_wide" => self.proposals.kappa_x_wide = num(v)?,
            "proposal.mix_weight_wide" => self.proposals.mix_weight_wide = num(v)?,
            "proposal.wrap_rw_sd" => self.proposals.wrap_rw_sd = num(v)?,
            "proposal.var_rw_logstep" => self.proposals.var_rw_logstep = num(v)?,
            "chain.n_iter" => self.chain.n_iter = num(v)?,
            "chain.burn_in" => self.chain.burn_in = num(v)?,
            "chain.thin" => self.chain.thin = num(v)?,
            "chain.chains" => self.chains = num(v)?,
            "chain.sample_variances" => self.chain.sample_variances = boolean(v)?,
            "chain.track" => {
                self.chain.track = v
                    .split(',')
                    .map(|s| s.parse::<Track>().map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "grid.size" => self.grid_size = num(v)?,
            "anneal.t0" => self.anneal.t0 = num(v)?,
            "anneal.rho" => self.anneal.rho = num(v)?,
            "anneal.n_outer" => self.anneal.n_outer = num(v)?,
            "anneal.n_mc" => self.anneal.n_mc = num(v)?,
            "anneal.step_sd" => self.anneal.step_sd = num(v)?,
            "anneal.init" => {
                let x = vec4(v)?;
                self.anneal.init = Variances {
                    sigma_f: x[0],
                    sigma_eps: x[1],
                    sigma_g: x[2],
                    sigma_eta: x[3],
                }
            }
            "sim.horizon" => self.sim.horizon = num(v)?,
            "sim.alpha" => self.sim.alpha = num(v)?,
            "sim.beta" => self.sim.beta = num(v)?,
            "sim.gamma" => self.sim.gamma = num(v)?,
            "sim.sigma_eta" => self.sim.sigma_eta = num(v)?,
            "sim.sigma_eps" => self.sim.sigma_eps = num(v)?,
            "sim.x_init" => {
                self.sim.x_init = match v {
                    "none" | "" => None,
                    _ => Some(Angle::new(num(v)?).map_err(|e| e.to_string())?),
                }
            }
            "output.hpd_mass" => self.hpd_mass = num(v)?,
            "output.hpd_bins" => self.hpd_bins = num(v)?,
            "output.density_bins" => self.density_bins = num(v)?,
            "output.forecast_draws" => self.forecast_draws = num(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.variances.validate()?;
        self.proposals.validate()?;
        self.chain.validate()?;
        self.anneal.validate()?;
        if self.chains == 0 || self.grid_size == 0 || self.hpd_bins == 0 || self.density_bins == 0 {
            return Err(Error::invalid("chains, grid.size and bin counts must be at least 1"));
        }
        if self.forecast_draws == 0 {
            return Err(Error::invalid("output.forecast_draws must be at least 1"));
        }
        if !(self.hpd_mass > 0.0 && self.hpd_mass < 1.0) {
            return Err(Error::invalid(format!("hpd_mass must lie in (0, 1), got {}", self.hpd_mass)));
        }
        Ok(())
    }

    /// Copy with `seed` propagated into the chain, annealing and simulation.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.chain.seed = seed;
        c.anneal.seed = seed;
        c.sim.seed = seed;
        c
    }

    /// Every key with its canonical value, sorted by key. Parsing the
    /// output reproduces `self`.
    pub fn canonical_pairs(&self) -> Vec<(String, String)> {
        let p = &self.prior;
        let v = &self.variances;
        let q = &self.proposals;
        let a = &self.anneal;
        let s = &self.sim;
        let mut out: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("input.unit", self.unit.to_string()),
            ("input.column", self.column.clone()),
            ("prior.mu0", p.mu0.radians().to_string()),
            ("prior.kappa0", p.kappa0.to_string()),
            ("prior.alpha_eps", p.alpha_eps.to_string()),
            ("prior.gamma_eps", p.gamma_eps.to_string()),
            ("prior.alpha_eta", p.alpha_eta.to_string()),
            ("prior.gamma_eta", p.gamma_eta.to_string()),
            ("prior.alpha_f", p.alpha_f.to_string()),
            ("prior.gamma_f", p.gamma_f.to_string()),
            ("prior.alpha_g", p.alpha_g.to_string()),
            ("prior.gamma_g", p.gamma_g.to_string()),
            ("prior.beta_f_mean", join(p.beta_f_mean.iter().copied())),
            ("prior.beta_f_cov", mat_string(&p.beta_f_cov)),
            ("prior.beta_g_mean", join(p.beta_g_mean.iter().copied())),
            ("prior.beta_g_cov", mat_string(&p.beta_g_cov)),
            ("variances.sigma_f", v.sigma_f.to_string()),
            ("variances.sigma_eps", v.sigma_eps.to_string()),
            ("variances.sigma_g", v.sigma_g.to_string()),
            ("variances.sigma_eta", v.sigma_eta.to_string()),
            ("proposal.kappa_x0", q.kappa_x0.to_string()),
            ("proposal.kappa_x_narrow", q.kappa_x_narrow.to_string()),
            ("proposal.kappa_x_wide", q.kappa_x_wide.to_string()),
            ("proposal.mix_weight_wide", q.mix_weight_wide.to_string()),
            ("proposal.wrap_rw_sd", q.wrap_rw_sd.to_string()),
            ("proposal.var_rw_logstep", q.var_rw_logstep.to_string()),
            ("chain.n_iter", self.chain.n_iter.to_string()),
            ("chain.burn_in", self.chain.burn_in.to_string()),
            ("chain.thin", self.chain.thin.to_string()),
            ("chain.chains", self.chains.to_string()),
            ("chain.sample_variances", self.chain.sample_variances.to_string()),
            (
                "chain.track",
                self.chain.track.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(","),
            ),
            ("grid.size", self.grid_size.to_string()),
            ("anneal.t0", a.t0.to_string()),
            ("anneal.rho", a.rho.to_string()),
            ("anneal.n_outer", a.n_outer.to_string()),
            ("anneal.n_mc", a.n_mc.to_string()),
            ("anneal.step_sd", a.step_sd.to_string()),
            (
                "anneal.init",
                join([a.init.sigma_f, a.init.sigma_eps, a.init.sigma_g, a.init.sigma_eta]),
            ),
            ("sim.horizon", s.horizon.to_string()),
            ("sim.alpha", s.alpha.to_string()),
            ("sim.beta", s.beta.to_string()),
            ("sim.gamma", s.gamma.to_string()),
            ("sim.sigma_eta", s.sigma_eta.to_string()),
            ("sim.sigma_eps", s.sigma_eps.to_string()),
            (
                "sim.x_init",
                s.x_init.map_or("none".into(), |x| x.radians().to_string()),
            ),
            ("output.hpd_mass", self.hpd_mass.to_string()),
            ("output.hpd_bins", self.hpd_bins.to_string()),
            ("output.density_bins", self.density_bins.to_string()),
            ("output.forecast_draws", self.forecast_draws.to_string()),
        ];
        out.sort_by(|x, y| x.0.cmp(y.0));
        out.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.canonical_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
