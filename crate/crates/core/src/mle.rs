//! Simulated-annealing maximization of the Monte Carlo integrated
//! likelihood over the four variance parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circ::{wrapped_normal_logpdf, Angle};
use crate::error::{Error, Result};
use crate::gp::TimeAnglePoint;
use crate::mcmc::forward::simulate_latent;
use crate::model::{Model, PriorConfig, Variances};
use crate::par::{self, ExecMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub t0: f64,
    pub rho: f64,
    pub n_outer: usize,
    pub n_mc: usize,
    /// Standard deviation of the joint proposal on `log σ²`.
    pub step_sd: f64,
    pub seed: u64,
    pub init: Variances,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            t0: 1.0,
            rho: 0.95,
            n_outer: 200,
            n_mc: 200,
            step_sd: 0.2,
            seed: 0,
            init: Variances::default(),
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.t0 > 0.0) || !(self.step_sd > 0.0) {
            return Err(Error::invalid("t0 and step_sd must be positive"));
        }
        if self.n_outer == 0 || self.n_mc == 0 {
            return Err(Error::invalid("n_outer and n_mc must be at least 1"));
        }
        self.init.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoglikEstimate {
    pub loglik: f64,
    /// Delta-method standard error of `loglik`.
    pub mc_se: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub proposal: Variances,
    pub loglik: f64,
    pub accepted: bool,
    pub temperature: f64,
    pub best_loglik: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variances: Variances,
    pub final_loglik: f64,
    pub trace: Vec<TraceEntry>,
}

/// `log (1/n Σ_i p(y | latent draw i))`, where the latent draws come from
/// the prior and the wrap counts of `y` are summed out through the wrapped
/// normal density. Draw `i` uses its own stream of a generator seeded by
/// `seed`, so the estimate is a deterministic function of the variances.
/// Draws that fail numerically contribute zero likelihood.
pub fn integrated_loglik_mc(
    obs: &[Angle],
    v: Variances,
    prior: &PriorConfig,
    grid: &[TimeAnglePoint],
    n_mc: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<LoglikEstimate> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be at least 1"));
    }
    v.validate()?;
    let model = Model::new(obs.iter().map(|y| Some(*y)).collect(), prior.clone(), false)?;
    let s2 = v.eps2();
    let terms = par::map_indexed(mode, n_mc, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        match simulate_latent(&model, grid, v, &mut rng) {
            Ok(st) => obs
                .iter()
                .enumerate()
                .map(|(t, y)| wrapped_normal_logpdf(*y, st.f_star[t], s2).unwrap_or(f64::NEG_INFINITY))
                .sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    });
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(LoglikEstimate {
            loglik: f64::NEG_INFINITY,
            mc_se: f64::INFINITY,
        });
    }
    let w: Vec<f64> = terms.iter().map(|l| (l - max).exp()).collect();
    let n = n_mc as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = if n_mc > 1 {
        w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(LoglikEstimate {
        loglik: max + mean.ln(),
        mc_se: (var / n).sqrt() / mean,
    })
}

/// Annealing acceptance rule: improvements always pass; a loss `Δ < 0`
/// passes when `u < exp(Δ / temperature)`.
pub fn anneal_accept(delta: f64, temperature: f64, u: f64) -> bool {
    if delta.is_nan() {
        return false;
    }
    if delta >= 0.0 || temperature == f64::INFINITY {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    u < (delta / temperature).exp()
}

fn perturb<R: Rng + ?Sized>(rng: &mut R, v: &Variances, step: f64) -> Variances {
    let mut f = |s: f64| s * (0.5 * step * rng.sample::<f64, _>(StandardNormal)).exp();
    Variances {
        sigma_f: f(v.sigma_f),
        sigma_eps: f(v.sigma_eps),
        sigma_g: f(v.sigma_g),
        sigma_eta: f(v.sigma_eta),
    }
}

/// Joint log-scale random-walk annealing with temperature `t0·ρᵏ` at
/// iteration `k`. Returns the best variances seen.
pub fn sa_optimize(
    obs: &[Angle],
    cfg: &AnnealConfig,
    prior: &PriorConfig,
    grid: &[TimeAnglePoint],
    mode: ExecMode,
) -> Result<VarianceEstimate> {
    cfg.validate()?;
    let mc_seed = cfg.seed.wrapping_add(0x9e37_79b9);
    let eval = |v: Variances| integrated_loglik_mc(obs, v, prior, grid, cfg.n_mc, mc_seed, mode).map(|e| e.loglik);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = cfg.init;
    let mut current_ll = eval(current)?;
    let mut best = current;
    let mut best_ll = current_ll;
    let mut trace = Vec::with_capacity(cfg.n_outer);
    for k in 0..cfg.n_outer {
        let temperature = cfg.t0 * cfg.rho.powi(k as i32);
        let proposal = perturb(&mut rng, &current, cfg.step_sd);
        let ll = eval(proposal)?;
        let u: f64 = rng.random();
        let accepted = anneal_accept(ll - current_ll, temperature, u);
        if accepted {
            current = proposal;
            current_ll = ll;
            if ll > best_ll {
                best = proposal;
                best_ll = ll;
            }
        }
        trace.push(TraceEntry {
            proposal,
            loglik: ll,
            accepted,
            temperature,
            best_loglik: best_ll,
        });
    }
    Ok(VarianceEstimate {
        variances: best,
        final_loglik: best_ll,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_grid;

    fn data() -> (Vec<Angle>, Vec<TimeAnglePoint>) {
        let obs = (0..6).map(|i| Angle::new(0.4 * i as f64).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        (obs, generate_grid(&mut rng, 6, 6.0).unwrap().points)
    }

    #[test]
    fn accept_rule_limits() {
        assert!(anneal_accept(-100.0, f64::INFINITY, 0.999));
        assert!(!anneal_accept(-1e-9, 0.0, 0.0));
        assert!(anneal_accept(0.5, 0.0, 0.99));
        assert!(anneal_accept(-1.0, 1.0, 0.3));
        assert!(!anneal_accept(-1.0, 1.0, 0.4));
    }

    #[test]
    fn estimate_is_deterministic_and_mode_independent() {
        let (obs, grid) = data();
        let p = PriorConfig::default();
        let v = Variances::default();
        let a = integrated_loglik_mc(&obs, v, &p, &grid, 64, 3, ExecMode::Parallel).unwrap();
        let b = integrated_loglik_mc(&obs, v, &p, &grid, 64, 3, ExecMode::Sequential).unwrap();
        assert_eq!(a, b);
        let c = integrated_loglik_mc(&obs, v, &p, &grid, 64, 4, ExecMode::Parallel).unwrap();
        assert!((a.loglik - c.loglik).abs() < 3.0 * (a.mc_se.powi(2) + c.mc_se.powi(2)).sqrt() + 1e-12);
        let one = integrated_loglik_mc(&obs, v, &p, &grid, 1, 3, ExecMode::Parallel).unwrap();
        assert_eq!(one.mc_se, 0.0);
    }

    #[test]
    fn best_trace_is_monotone() {
        let (obs, grid) = data();
        let cfg = AnnealConfig {
            n_outer: 15,
            n_mc: 16,
            ..AnnealConfig::default()
        };
        let est = sa_optimize(&obs, &cfg, &PriorConfig::default(), &grid, ExecMode::Parallel).unwrap();
        assert_eq!(est.trace.len(), 15);
        for w in est.trace.windows(2) {
            assert!(w[1].best_loglik >= w[0].best_loglik);
        }
        assert_eq!(est.final_loglik, est.trace.last().unwrap().best_loglik);
        assert!(est.variances.validate().is_ok());
    }
}
