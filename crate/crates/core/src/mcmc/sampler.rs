use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::conditionals;
use super::{AcceptanceLog, ProposalConfig};
use crate::circ::{self, unwrap, von_mises_draw, Angle, WrapCount};
use crate::error::{Error, Result};
use crate::gp::KernelMatrices;
use crate::model::{log_inverse_gamma, ChainState, Model, TransitionParts, K_BOUND};

/// One of the four variance parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceParam {
    F,
    Eps,
    G,
    Eta,
}

fn accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Metropolis-within-Gibbs sampler over a [`ChainState`].
///
/// Kernel factorizations of the look-up grid and of the `f*` inputs are
/// cached and refreshed whenever an accepted move changes them.
pub struct Sampler<R> {
    model: Model,
    proposals: ProposalConfig,
    state: ChainState,
    gk: KernelMatrices,
    fk: KernelMatrices,
    weights: DVector<f64>,
    rng: R,
    log: AcceptanceLog,
}

impl<R: Rng> Sampler<R> {
    pub fn new(model: Model, proposals: ProposalConfig, state: ChainState, rng: R) -> Result<Self> {
        proposals.validate()?;
        state.check_shape()?;
        if state.horizon() != model.horizon() {
            return Err(Error::invalid(format!(
                "state horizon {} does not match {} observations",
                state.horizon(),
                model.horizon()
            )));
        }
        let gk = model.grid_kernel(&state)?;
        let fk = model.f_kernel(&state)?;
        let weights = gk.weights(&state.grid.values, &state.beta_g);
        Ok(Sampler {
            model,
            proposals,
            state,
            gk,
            fk,
            weights,
            rng,
            log: AcceptanceLog::default(),
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn acceptance(&self) -> &AcceptanceLog {
        &self.log
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn into_parts(self) -> (ChainState, AcceptanceLog, R) {
        (self.state, self.log, self.rng)
    }

    /// Replaces the state and rebuilds all caches.
    pub fn set_state(&mut self, state: ChainState) -> Result<()> {
        state.check_shape()?;
        if state.horizon() != self.model.horizon() {
            return Err(Error::invalid("state horizon does not match the data"));
        }
        self.gk = self.model.grid_kernel(&state)?;
        self.fk = self.model.f_kernel(&state)?;
        self.state = state;
        self.refresh_weights();
        Ok(())
    }

    /// Replaces the observations and their wrap counts.
    pub fn set_observations(&mut self, obs: Vec<Option<Angle>>, n: Vec<WrapCount>) -> Result<()> {
        if obs.len() != self.model.horizon() || n.len() != obs.len() {
            return Err(Error::invalid("observation vector length changed"));
        }
        self.model.obs = obs;
        self.state.n = n;
        Ok(())
    }

    fn refresh_weights(&mut self) {
        self.weights = self.gk.weights(&self.state.grid.values, &self.state.beta_g);
    }

    fn horizon(&self) -> usize {
        self.state.horizon()
    }

    fn check_latent_index(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon() + 1 {
            return Err(Error::invalid(format!(
                "latent index {t} outside 1..={}",
                self.horizon() + 1
            )));
        }
        Ok(())
    }

    fn transition_parts(&self, gk: &KernelMatrices) -> Result<Vec<TransitionParts>> {
        (2..=self.horizon() + 1)
            .map(|t| self.model.transition_parts(t, &self.state, gk))
            .collect()
    }

    fn x_linear_from_2(&self) -> Vec<f64> {
        (2..=self.horizon() + 1).map(|t| self.state.x_linear(t)).collect()
    }

    // ----- local log targets -------------------------------------------------

    fn local_x(&self, t: usize, fk: &KernelMatrices) -> f64 {
        let m = &self.model;
        let st = &self.state;
        let mut lp = m.log_transition_with(t, st, &self.gk, &self.weights);
        if t <= self.horizon() {
            lp += m.log_transition_with(t + 1, st, &self.gk, &self.weights);
            lp += m.log_obs_term(t, st);
        }
        lp + m.log_f_prior(st, fk)
    }

    /// Log full conditional of `x_t` (up to a constant) at the current state.
    pub fn log_target_x(&self, t: usize) -> Result<f64> {
        self.check_latent_index(t)?;
        let fk = self.model.f_kernel(&self.state)?;
        Ok(self.local_x(t, &fk))
    }

    /// Log full conditional of `K_t` at the current state.
    pub fn log_target_k(&self, t: usize) -> Result<f64> {
        self.check_latent_index(t)?;
        Ok(self
            .model
            .log_transition_with(t, &self.state, &self.gk, &self.weights))
    }

    /// Log full conditional of `N_t` at the current state (zero when held out).
    pub fn log_target_n(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.horizon() {
            return Err(Error::invalid(format!("observation index {t} outside 1..={}", self.horizon())));
        }
        Ok(self.model.log_obs_term(t, &self.state))
    }

    fn local_x0(&self) -> Result<f64> {
        let p = &self.model.prior;
        let prior = circ::von_mises_logpdf(self.state.x[0], p.mu0, p.kappa0)?;
        Ok(prior + self.model.log_g_block(&self.state, &self.gk)?)
    }

    /// Log full conditional of `x_0` at the current state.
    pub fn log_target_x0(&self) -> Result<f64> {
        self.local_x0()
    }

    fn local_variance(&self, which: VarianceParam, gk: &KernelMatrices, fk: &KernelMatrices) -> Result<f64> {
        let m = &self.model;
        let p = &m.prior;
        let st = &self.state;
        let v = &st.variances;
        Ok(match which {
            VarianceParam::F => log_inverse_gamma(v.f2(), p.alpha_f, p.gamma_f) + m.log_f_prior(st, fk),
            VarianceParam::Eps => log_inverse_gamma(v.eps2(), p.alpha_eps, p.gamma_eps) + m.log_likelihood_obs(st),
            VarianceParam::Eta => {
                let w = &self.weights;
                log_inverse_gamma(v.eta2(), p.alpha_eta, p.gamma_eta)
                    + (1..=self.horizon() + 1)
                        .map(|t| m.log_transition_with(t, st, gk, w))
                        .sum::<f64>()
            }
            VarianceParam::G => {
                let w = gk.weights(&st.grid.values, &st.beta_g);
                log_inverse_gamma(v.g2(), p.alpha_g, p.gamma_g)
                    + m.log_g_block(st, gk)?
                    + (2..=self.horizon() + 1)
                        .map(|t| m.log_transition_with(t, st, gk, &w))
                        .sum::<f64>()
            }
        })
    }

    /// Log full conditional of one variance `σ²` (on the variance scale, no
    /// Jacobian) at the current state.
    pub fn log_target_variance(&self, which: VarianceParam) -> Result<f64> {
        let gk = self.model.grid_kernel(&self.state)?;
        let fk = self.model.f_kernel(&self.state)?;
        self.local_variance(which, &gk, &fk)
    }

    // ----- Metropolis–Hastings updates ---------------------------------------

    /// Random-walk update of `x_t` with a two-component von Mises mixture proposal.
    pub fn mh_update_latent_x(&mut self, t: usize) -> Result<bool> {
        self.check_latent_index(t)?;
        let pc = &self.proposals;
        let kappa = if self.rng.random::<f64>() < pc.mix_weight_wide {
            pc.kappa_x_wide
        } else {
            pc.kappa_x_narrow
        };
        let old = self.state.x[t];
        let new = von_mises_draw(&mut self.rng, old.radians(), kappa);
        let current = self.local_x(t, &self.fk);
        self.state.x[t] = new;
        let accepted = match self.model.f_kernel(&self.state) {
            Ok(fk) => {
                let proposed = self.local_x(t, &fk);
                if accept(&mut self.rng, proposed - current) {
                    self.fk = fk;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        if !accepted {
            self.state.x[t] = old;
        }
        self.log.x.record(accepted);
        Ok(accepted)
    }

    fn wrap_step(&mut self) -> WrapCount {
        let z: f64 = self.rng.sample(StandardNormal);
        (z * self.proposals.wrap_rw_sd).round() as WrapCount
    }

    /// Integer random-walk update of `K_t`.
    pub fn mh_update_k(&mut self, t: usize) -> Result<bool> {
        self.check_latent_index(t)?;
        let step = self.wrap_step();
        let accepted = if step == 0 {
            true
        } else {
            let old = self.state.k[t - 1];
            let new = old + step;
            if new.abs() > K_BOUND {
                false
            } else {
                let current = self.log_target_k(t)?;
                self.state.k[t - 1] = new;
                let proposed = self.log_target_k(t)?;
                let ok = accept(&mut self.rng, proposed - current);
                if !ok {
                    self.state.k[t - 1] = old;
                }
                ok
            }
        };
        self.log.k.record(accepted);
        Ok(accepted)
    }

    /// Integer random-walk update of `N_t`; a no-op for held-out `t`.
    pub fn mh_update_n(&mut self, t: usize) -> Result<bool> {
        if t == 0 || t > self.horizon() {
            return Err(Error::invalid(format!("observation index {t} outside 1..={}", self.horizon())));
        }
        if self.model.obs[t - 1].is_none() {
            return Ok(false);
        }
        let step = self.wrap_step();
        let accepted = if step == 0 {
            true
        } else {
            let old = self.state.n[t - 1];
            let new = old + step;
            if new.abs() > K_BOUND {
                false
            } else {
                let current = self.model.log_obs_term(t, &self.state);
                self.state.n[t - 1] = new;
                let proposed = self.model.log_obs_term(t, &self.state);
                let ok = accept(&mut self.rng, proposed - current);
                if !ok {
                    self.state.n[t - 1] = old;
                }
                ok
            }
        };
        self.log.n.record(accepted);
        Ok(accepted)
    }

    /// Random-walk update of `x_0` with a von Mises proposal.
    pub fn mh_update_x0(&mut self) -> Result<bool> {
        let old = self.state.x[0];
        let new = von_mises_draw(&mut self.rng, old.radians(), self.proposals.kappa_x0);
        let current = self.local_x0()?;
        self.state.x[0] = new;
        let accepted = match self.local_x0() {
            Ok(proposed) => accept(&mut self.rng, proposed - current),
            Err(_) => false,
        };
        if !accepted {
            self.state.x[0] = old;
        }
        self.log.x0.record(accepted);
        Ok(accepted)
    }

    fn set_sigma(&mut self, which: VarianceParam, sigma: f64) {
        let v = &mut self.state.variances;
        match which {
            VarianceParam::F => v.sigma_f = sigma,
            VarianceParam::Eps => v.sigma_eps = sigma,
            VarianceParam::G => v.sigma_g = sigma,
            VarianceParam::Eta => v.sigma_eta = sigma,
        }
    }

    fn sigma(&self, which: VarianceParam) -> f64 {
        let v = &self.state.variances;
        match which {
            VarianceParam::F => v.sigma_f,
            VarianceParam::Eps => v.sigma_eps,
            VarianceParam::G => v.sigma_g,
            VarianceParam::Eta => v.sigma_eta,
        }
    }

    /// Log-scale random walk on `σ²`, accepting with the Jacobian of the
    /// log transform. Kernels depending on the variance are rebuilt for the
    /// proposal.
    fn mh_update_variance(&mut self, which: VarianceParam) -> Result<bool> {
        let old = self.sigma(which);
        let v_old = old * old;
        let z: f64 = self.rng.sample(StandardNormal);
        let v_new = v_old * (self.proposals.var_rw_logstep * z).exp();
        let current = self.local_variance(which, &self.gk, &self.fk)? + v_old.ln();
        self.set_sigma(which, v_new.sqrt());
        let rebuilt = match which {
            VarianceParam::F => self.model.f_kernel(&self.state).map(|k| (None, Some(k))),
            VarianceParam::G => self.model.grid_kernel(&self.state).map(|k| (Some(k), None)),
            _ => Ok((None, None)),
        };
        let accepted = match rebuilt {
            Ok((gk, fk)) => {
                let proposed = self.local_variance(
                    which,
                    gk.as_ref().unwrap_or(&self.gk),
                    fk.as_ref().unwrap_or(&self.fk),
                );
                match proposed {
                    Ok(p) if accept(&mut self.rng, p + v_new.ln() - current) => {
                        if let Some(gk) = gk {
                            self.gk = gk;
                            self.refresh_weights();
                        }
                        if let Some(fk) = fk {
                            self.fk = fk;
                        }
                        true
                    }
                    _ => false,
                }
            }
            Err(_) => false,
        };
        if !accepted {
            self.set_sigma(which, old);
        }
        let counter = match which {
            VarianceParam::F => &mut self.log.sigma_f2,
            VarianceParam::G => &mut self.log.sigma_g2,
            VarianceParam::Eta => &mut self.log.sigma_eta2,
            VarianceParam::Eps => &mut self.log.sigma_eps2,
        };
        counter.record(accepted);
        Ok(accepted)
    }

    pub fn mh_update_sigma_f2(&mut self) -> Result<bool> {
        self.mh_update_variance(VarianceParam::F)
    }

    pub fn mh_update_sigma_g2(&mut self) -> Result<bool> {
        self.mh_update_variance(VarianceParam::G)
    }

    pub fn mh_update_sigma_eta2(&mut self) -> Result<bool> {
        self.mh_update_variance(VarianceParam::Eta)
    }

    // ----- Gibbs updates -----------------------------------------------------

    fn unwrapped_targets(&self) -> Vec<Option<f64>> {
        self.model
            .obs
            .iter()
            .zip(&self.state.n)
            .map(|(y, &n)| y.map(|y| unwrap(y, n)))
            .collect()
    }

    /// Draws `f*_{1..T}` jointly, then `f*(T+1, x_{T+1})` given the block.
    pub fn gibbs_update_fstar(&mut self) -> Result<()> {
        let v = self.state.variances;
        let targets = self.unwrapped_targets();
        let block = conditionals::fstar_block(&self.fk, &self.state.beta_f, &targets, v.f2(), v.eps2())?;
        let (_, draw) = block.draw(&mut self.rng, "f* block")?;
        let next = conditionals::fstar_next(&self.fk, &self.state.beta_f, &draw, v.f2())?;
        let z: f64 = self.rng.sample(StandardNormal);
        let t = self.horizon();
        self.state.f_star.rows_mut(0, t).copy_from(&draw);
        self.state.f_star[t] = next.mean + next.variance.sqrt() * z;
        Ok(())
    }

    pub fn gibbs_update_sigma_eps2(&mut self) -> Result<()> {
        let st = &self.state;
        let residuals = self
            .model
            .obs
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|y| unwrap(y, st.n[i]) - st.f_star[i]));
        let (shape, scale) = conditionals::sigma_eps2(&self.model.prior, residuals);
        let g = Gamma::new(shape, 1.0 / scale)
            .map_err(|e| Error::invalid(format!("inverse-gamma parameters: {e}")))?;
        let v = 1.0 / g.sample(&mut self.rng);
        self.state.variances.sigma_eps = v.sqrt();
        Ok(())
    }

    pub fn gibbs_update_gstar(&mut self) -> Result<()> {
        let gb = self.model.g_block(&self.state, &self.gk)?;
        let v = self.state.variances;
        let c = conditionals::gstar(
            &gb,
            &self.gk,
            &self.state.grid.values,
            &self.state.beta_g,
            self.state.x_linear(1),
            v.eta2(),
            v.g2(),
        )?;
        let z: f64 = self.rng.sample(StandardNormal);
        self.state.g_star = c.mean + c.variance.sqrt() * z;
        Ok(())
    }

    pub fn gibbs_update_dz(&mut self) -> Result<()> {
        let gb = self.model.g_block(&self.state, &self.gk)?;
        let parts = self.transition_parts(&self.gk)?;
        let xs = self.x_linear_from_2();
        let g = conditionals::dz(
            &gb,
            &self.gk,
            self.state.g_star,
            &self.state.beta_g,
            &parts,
            &xs,
            self.state.variances.g2(),
        )?;
        let (_, draw) = g.draw(&mut self.rng, "look-up grid values")?;
        self.state.grid.values = draw;
        self.refresh_weights();
        Ok(())
    }

    pub fn gibbs_update_beta_f(&mut self) -> Result<()> {
        let g = conditionals::beta_f(
            &self.model.prior,
            &self.fk,
            &self.state.f_star,
            self.state.variances.f2(),
        )?;
        let (_, draw) = g.draw(&mut self.rng, "beta_f")?;
        self.state.beta_f.copy_from_slice(draw.as_slice());
        Ok(())
    }

    pub fn gibbs_update_beta_g(&mut self) -> Result<()> {
        let gb = self.model.g_block(&self.state, &self.gk)?;
        let parts = self.transition_parts(&self.gk)?;
        let xs = self.x_linear_from_2();
        let (p, l) = conditionals::beta_g_data(
            &gb,
            &self.gk,
            self.state.g_star,
            &self.state.grid.values,
            &parts,
            &xs,
            self.state.variances.g2(),
        );
        let (free, g) = conditionals::beta_g(&self.model.prior, &p, &l, &self.state.beta_g)?;
        if free.is_empty() {
            return Ok(());
        }
        let (_, draw) = g.draw(&mut self.rng, "beta_g")?;
        for (i, &fi) in free.iter().enumerate() {
            self.state.beta_g[fi] = draw[i];
        }
        self.refresh_weights();
        Ok(())
    }

    /// One full sweep in fixed order: all `x_t`, all `K_t`, all `N_t`, the
    /// `f*` block, `g*`, `D_z`, `β_f`, `β_g`, `x_0`, then the variances when
    /// they are sampled.
    pub fn sweep(&mut self) -> Result<()> {
        let t = self.horizon();
        for i in 1..=t + 1 {
            self.mh_update_latent_x(i)?;
        }
        for i in 1..=t + 1 {
            self.mh_update_k(i)?;
        }
        for i in 1..=t {
            self.mh_update_n(i)?;
        }
        self.gibbs_update_fstar()?;
        self.gibbs_update_gstar()?;
        self.gibbs_update_dz()?;
        self.gibbs_update_beta_f()?;
        self.gibbs_update_beta_g()?;
        self.mh_update_x0()?;
        if self.model.sample_variances {
            self.mh_update_sigma_f2()?;
            self.gibbs_update_sigma_eps2()?;
            self.mh_update_sigma_g2()?;
            self.mh_update_sigma_eta2()?;
        }
        Ok(())
    }
}
