//! Forward simulation from the joint prior, used for initialization, the
//! Monte Carlo likelihood and the marginal-conditional simulator.

use nalgebra::{DVector, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::circ::{split_turns, von_mises_draw, wrapped_normal_sample, Angle, WrapCount};
use crate::error::{Error, Result};
use crate::gp::TimeAnglePoint;
use crate::linalg;
use crate::model::{ChainState, LookupGrid, Model, Variances};

/// Draws `g*(1,x₀)` and then `D_z | g*` from their prior given the state's
/// `x₀`, `β_g` and `σ_g`.
pub fn draw_g_block<R: Rng + ?Sized>(model: &Model, state: &mut ChainState, rng: &mut R) -> Result<()> {
    let gk = model.grid_kernel(state)?;
    let gb = model.g_block(state, &gk)?;
    let g2 = state.variances.g2();
    let m0 = gb.h0.dot(&state.beta_g);
    let z: f64 = rng.sample(StandardNormal);
    state.g_star = m0 + g2.sqrt() * z;
    let mean = gk.h() * state.beta_g + &gb.s * (state.g_star - m0);
    state.grid.values = linalg::mvn_draw(rng, &mean, &gb.sigma_chol, g2);
    Ok(())
}

fn draw_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, alpha: f64, gamma: f64) -> Result<f64> {
    let g = Gamma::new(0.5 * alpha, 2.0 / gamma)
        .map_err(|e| Error::invalid(format!("inverse-gamma parameters: {e}")))?;
    Ok(1.0 / g.sample(rng))
}

/// Draws variances from their inverse-gamma priors.
pub fn draw_variances<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Result<Variances> {
    let p = &model.prior;
    Ok(Variances {
        sigma_f: draw_inverse_gamma(rng, p.alpha_f, p.gamma_f)?.sqrt(),
        sigma_eps: draw_inverse_gamma(rng, p.alpha_eps, p.gamma_eps)?.sqrt(),
        sigma_g: draw_inverse_gamma(rng, p.alpha_g, p.gamma_g)?.sqrt(),
        sigma_eta: draw_inverse_gamma(rng, p.alpha_eta, p.gamma_eta)?.sqrt(),
    })
}

/// One draw of every latent quantity from the prior. Variances are drawn
/// from their priors when the model samples them, otherwise `variances` is
/// used. Wrap counts `N` are left at zero.
pub fn simulate_latent<R: Rng + ?Sized>(
    model: &Model,
    grid: &[TimeAnglePoint],
    variances: Variances,
    rng: &mut R,
) -> Result<ChainState> {
    let p = &model.prior;
    let t = model.horizon();
    let variances = if model.sample_variances {
        draw_variances(model, rng)?
    } else {
        variances.validate()?;
        variances
    };

    let x0 = von_mises_draw(rng, p.mu0.radians(), p.kappa0);
    let bf_chol = p
        .beta_f_cov
        .cholesky()
        .ok_or_else(|| Error::invalid("beta_f_cov is not positive definite"))?;
    let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let beta_f = p.beta_f_mean + bf_chol.l() * z;
    let mut beta_g = p.beta_g_mean;
    let free = p.beta_g_free();
    if !free.is_empty() {
        let c = p
            .beta_g_free_cov()
            .cholesky()
            .ok_or_else(|| Error::invalid("beta_g free covariance is not positive definite"))?;
        let z = linalg::standard_normal_vector(rng, free.len());
        let d = c.l() * z;
        for (i, &fi) in free.iter().enumerate() {
            beta_g[fi] += d[i];
        }
    }

    let mut state = ChainState {
        x: vec![x0; t + 2],
        k: vec![0; t + 1],
        n: vec![0; t],
        f_star: DVector::zeros(t + 1),
        g_star: 0.0,
        grid: LookupGrid::new(grid.to_vec()),
        beta_f,
        beta_g,
        variances,
    };
    draw_g_block(model, &mut state, rng)?;

    let gk = model.grid_kernel(&state)?;
    let w = gk.weights(&state.grid.values, &state.beta_g);
    for i in 1..=t + 1 {
        let c = model.transition(i, &state, &gk, &w)?;
        let z: f64 = rng.sample(StandardNormal);
        let (a, k) = split_turns(c.mean + c.variance.sqrt() * z);
        state.x[i] = a;
        state.k[i - 1] = k;
    }

    let fk = model.f_kernel(&state)?;
    let mean = fk.h() * state.beta_f;
    state.f_star = linalg::mvn_draw(rng, &mean, fk.chol(), variances.f2());
    Ok(state)
}

/// Draws `y_t + 2πN_t ~ N(f*_t, σ²_ε)` for every position observed in the
/// model; held-out positions stay `None` with `N_t = 0`.
pub fn simulate_observations<R: Rng + ?Sized>(
    model: &Model,
    state: &ChainState,
    rng: &mut R,
) -> Result<(Vec<Option<Angle>>, Vec<WrapCount>)> {
    let s2 = state.variances.eps2();
    let mut obs = Vec::with_capacity(model.horizon());
    let mut n = Vec::with_capacity(model.horizon());
    for (i, o) in model.obs.iter().enumerate() {
        if o.is_some() {
            let (y, k) = wrapped_normal_sample(rng, state.f_star[i], s2)?;
            obs.push(Some(y));
            n.push(k);
        } else {
            obs.push(None);
            n.push(0);
        }
    }
    Ok((obs, n))
}
