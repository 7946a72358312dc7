//! The hierarchical model: priors, look-up grid, chain state and the
//! log-density of every block of the joint posterior.
//!
//! Time indices follow the model: observations `y_1..y_T`, latent states
//! `x_0..x_{T+1}`, wrap counts `K_1..K_{T+1}` and `N_1..N_T`. In storage,
//! `x[t]` is `x_t`, `k[t-1]` is `K_t`, `n[t-1]` is `N_t` and `f_star[t-1]`
//! is `f*(t, x_t)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::circ::{self, normal_logpdf, unwrap, Angle, WrapCount};
use crate::error::{Error, Result};
use crate::gp::{design_vector, ConditionalGaussian, DesignVector, KernelMatrices, TimeAnglePoint};
use crate::linalg::{self, Chol};

/// Wrap counts are confined to `[-K_BOUND, K_BOUND]` by the proposals.
pub const K_BOUND: WrapCount = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Mean direction of the von Mises prior on `x_0`.
    pub mu0: Angle,
    /// Concentration of the von Mises prior on `x_0`.
    pub kappa0: f64,
    pub alpha_eps: f64,
    pub gamma_eps: f64,
    pub alpha_eta: f64,
    pub gamma_eta: f64,
    pub alpha_f: f64,
    pub gamma_f: f64,
    pub alpha_g: f64,
    pub gamma_g: f64,
    pub beta_f_mean: Vector4<f64>,
    pub beta_f_cov: Matrix4<f64>,
    pub beta_g_mean: Vector4<f64>,
    /// Zero rows/columns mark components pinned at their prior mean.
    pub beta_g_cov: Matrix4<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mu0: Angle::wrapped(PI),
            kappa0: 3.0,
            alpha_eps: 2.0,
            gamma_eps: 1.0,
            alpha_eta: 2.0,
            gamma_eta: 1.0,
            alpha_f: 2.0,
            gamma_f: 1.0,
            alpha_g: 2.0,
            gamma_g: 1.0,
            beta_f_mean: Vector4::zeros(),
            beta_f_cov: Matrix4::identity(),
            beta_g_mean: Vector4::from_element(1.0),
            beta_g_cov: Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 0.0, 0.0)),
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("kappa0", self.kappa0),
            ("alpha_eps", self.alpha_eps),
            ("gamma_eps", self.gamma_eps),
            ("alpha_eta", self.alpha_eta),
            ("gamma_eta", self.gamma_eta),
            ("alpha_f", self.alpha_f),
            ("gamma_f", self.gamma_f),
            ("alpha_g", self.alpha_g),
            ("gamma_g", self.gamma_g),
        ];
        for (name, v) in scalars {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if (self.beta_f_cov - self.beta_f_cov.transpose()).abs().max() > 1e-12
            || self.beta_f_cov.cholesky().is_none()
        {
            return Err(Error::invalid("beta_f_cov must be symmetric positive definite"));
        }
        if (self.beta_g_cov - self.beta_g_cov.transpose()).abs().max() > 1e-12 {
            return Err(Error::invalid("beta_g_cov must be symmetric"));
        }
        let free = self.beta_g_free();
        if free.is_empty() {
            return Ok(());
        }
        for i in 0..4 {
            if !free.contains(&i) {
                let off = (0..4).any(|j| self.beta_g_cov[(i, j)] != 0.0);
                if off {
                    return Err(Error::invalid(format!(
                        "beta_g_cov row {i} must be entirely zero to pin that component"
                    )));
                }
            }
        }
        if self.beta_g_free_cov().cholesky().is_none() {
            return Err(Error::invalid("free block of beta_g_cov must be positive definite"));
        }
        Ok(())
    }

    /// Indices of `β_g` components that are sampled.
    pub fn beta_g_free(&self) -> Vec<usize> {
        (0..4).filter(|&i| self.beta_g_cov[(i, i)] > 0.0).collect()
    }

    /// Whether the third and fourth components of `β_g` are pinned.
    pub fn identifiability_fix(&self) -> bool {
        self.beta_g_cov[(2, 2)] == 0.0 && self.beta_g_cov[(3, 3)] == 0.0
    }

    pub(crate) fn beta_g_free_cov(&self) -> DMatrix<f64> {
        let free = self.beta_g_free();
        DMatrix::from_fn(free.len(), free.len(), |i, j| self.beta_g_cov[(free[i], free[j])])
    }
}

/// Standard deviations `σ_f, σ_ε, σ_g, σ_η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variances {
    pub sigma_f: f64,
    pub sigma_eps: f64,
    pub sigma_g: f64,
    pub sigma_eta: f64,
}

impl Default for Variances {
    fn default() -> Self {
        Variances {
            sigma_f: 1.0,
            sigma_eps: 1.0,
            sigma_g: 1.0,
            sigma_eta: 1.0,
        }
    }
}

impl Variances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_f", self.sigma_f),
            ("sigma_eps", self.sigma_eps),
            ("sigma_g", self.sigma_g),
            ("sigma_eta", self.sigma_eta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn f2(&self) -> f64 {
        self.sigma_f * self.sigma_f
    }
    pub fn eps2(&self) -> f64 {
        self.sigma_eps * self.sigma_eps
    }
    pub fn g2(&self) -> f64 {
        self.sigma_g * self.sigma_g
    }
    pub fn eta2(&self) -> f64 {
        self.sigma_eta * self.sigma_eta
    }
}

/// Look-up grid `G_z` with the process values `D_z` at its points.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupGrid {
    pub points: Vec<TimeAnglePoint>,
    pub values: DVector<f64>,
}

impl LookupGrid {
    pub fn new(points: Vec<TimeAnglePoint>) -> Self {
        let n = points.len();
        LookupGrid {
            points,
            values: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Stratified random grid: one angle per stratum `[2πi/n, 2π(i+1)/n)` and one
/// time per stratum `[i·span/n, (i+1)·span/n)`.
pub fn generate_grid<R: Rng + ?Sized>(rng: &mut R, n: usize, time_span: f64) -> Result<LookupGrid> {
    if n == 0 {
        return Err(Error::invalid("grid needs at least one point"));
    }
    if !(time_span > 0.0 && time_span.is_finite()) {
        return Err(Error::invalid(format!("time span must be positive, got {time_span}")));
    }
    let nf = n as f64;
    let points = (0..n)
        .map(|i| {
            let i = i as f64;
            let z = TAU * (i + rng.random::<f64>()) / nf;
            let t = time_span * (i + rng.random::<f64>()) / nf;
            TimeAnglePoint::new(t, Angle::wrapped(z))
        })
        .collect();
    Ok(LookupGrid::new(points))
}

/// Grid for a series of length `horizon`, spanning times `(0, horizon+1)`
/// and drawn from its own generator seeded by `seed`.
pub fn seeded_grid(seed: u64, n: usize, horizon: usize) -> Result<Vec<TimeAnglePoint>> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed ^ 0x6772_6964);
    Ok(generate_grid(&mut rng, n, (horizon + 1) as f64)?.points)
}

/// Complete sampler state.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    /// `x_0..x_{T+1}`.
    pub x: Vec<Angle>,
    /// `K_1..K_{T+1}`.
    pub k: Vec<WrapCount>,
    /// `N_1..N_T`.
    pub n: Vec<WrapCount>,
    /// `f*(1,x_1)..f*(T+1,x_{T+1})`.
    pub f_star: DVector<f64>,
    /// `g*(1, x_0)`.
    pub g_star: f64,
    pub grid: LookupGrid,
    pub beta_f: Vector4<f64>,
    pub beta_g: Vector4<f64>,
    pub variances: Variances,
}

impl ChainState {
    /// Number of observation times `T`.
    pub fn horizon(&self) -> usize {
        self.n.len()
    }

    /// `x_t + 2πK_t` for `1 ≤ t ≤ T+1`.
    pub fn x_linear(&self, t: usize) -> f64 {
        unwrap(self.x[t], self.k[t - 1])
    }

    /// Points `(t, x_t)` for `t = 1..T+1`, the inputs of `f*`.
    pub fn f_points(&self) -> Vec<TimeAnglePoint> {
        (1..self.x.len())
            .map(|t| TimeAnglePoint::new(t as f64, self.x[t]))
            .collect()
    }

    pub fn check_shape(&self) -> Result<()> {
        let t = self.horizon();
        if self.x.len() != t + 2 || self.k.len() != t + 1 || self.f_star.len() != t + 1 {
            return Err(Error::invalid(format!(
                "inconsistent state lengths for T={t}: x {}, K {}, f* {}",
                self.x.len(),
                self.k.len(),
                self.f_star.len()
            )));
        }
        if self.grid.values.len() != self.grid.points.len() {
            return Err(Error::invalid("grid values/points length mismatch"));
        }
        Ok(())
    }
}

/// Prior log-density split by block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorTerms {
    pub x0: f64,
    pub beta_f: f64,
    pub beta_g: f64,
    /// Sum of the four inverse-gamma terms; zero when variances are plugged in.
    pub variances: f64,
}

impl PriorTerms {
    pub fn total(&self) -> f64 {
        self.x0 + self.beta_f + self.beta_g + self.variances
    }
}

/// `log` of the inverse-gamma density with kernel
/// `v^{-(α+2)/2} exp(-γ/(2v))`, i.e. shape `α/2` and scale `γ/2`.
pub fn log_inverse_gamma(v: f64, alpha: f64, gamma: f64) -> f64 {
    if !(v > 0.0) {
        return f64::NEG_INFINITY;
    }
    let a = 0.5 * alpha;
    let b = 0.5 * gamma;
    a * b.ln() - ln_gamma(a) - (a + 1.0) * v.ln() - b / v
}

fn mvn_logpdf_small(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    match linalg::cholesky_jittered(cov, 0.0) {
        Some((c, _)) => linalg::mvn_logpdf_centered(&(x - mean), &c, 1.0),
        None => f64::NEG_INFINITY,
    }
}

/// Pieces of the joint prior of `(g*(1,x_0), D_z)` that depend on `x_0` and `σ_g`:
/// `g* ~ N(h₀ᵀβ, σ_g²)` and `D_z | g* ~ N(Hβ + s(g* − h₀ᵀβ), σ_g² Σ)`
/// with `Σ = A − s sᵀ`.
#[derive(Clone, Debug)]
pub struct GBlock {
    pub h0: DesignVector,
    pub s: DVector<f64>,
    pub sigma_chol: Chol,
}

/// Per-transition quantities for `t ≥ 2`: `s = s(t, x_{t-1})`, `u = A⁻¹s`,
/// `w = h(t, x_{t-1}) − Hᵀu`, and the transition variance
/// `σ²_η + σ²_g (1 − sᵀA⁻¹s)`.
#[derive(Clone, Debug)]
pub struct TransitionParts {
    pub s: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DesignVector,
    pub variance: f64,
}

/// Data and prior for one analysis. `obs[t-1]` is `y_t`; `None` marks an
/// observation held out (its `N_t` and likelihood term are dropped).
#[derive(Clone, Debug)]
pub struct Model {
    pub obs: Vec<Option<Angle>>,
    pub prior: PriorConfig,
    pub sample_variances: bool,
    /// Starting jitter for every kernel factorization.
    pub jitter: f64,
}

impl Model {
    pub fn new(obs: Vec<Option<Angle>>, prior: PriorConfig, sample_variances: bool) -> Result<Self> {
        prior.validate()?;
        Ok(Model {
            obs,
            prior,
            sample_variances,
            jitter: linalg::JITTER_START,
        })
    }

    pub fn horizon(&self) -> usize {
        self.obs.len()
    }

    pub fn n_observed(&self) -> usize {
        self.obs.iter().filter(|o| o.is_some()).count()
    }

    pub fn log_prior_terms(&self, state: &ChainState) -> PriorTerms {
        let p = &self.prior;
        let x0 = circ::von_mises_logpdf(state.x[0], p.mu0, p.kappa0).unwrap_or(f64::NEG_INFINITY);

        let beta_f = mvn_logpdf_small(
            &DVector::from_column_slice(state.beta_f.as_slice()),
            &DVector::from_column_slice(p.beta_f_mean.as_slice()),
            &DMatrix::from_column_slice(4, 4, p.beta_f_cov.as_slice()),
        );

        let free = p.beta_g_free();
        let pinned_ok = (0..4)
            .filter(|i| !free.contains(i))
            .all(|i| state.beta_g[i] == p.beta_g_mean[i]);
        let beta_g = if !pinned_ok {
            f64::NEG_INFINITY
        } else if free.is_empty() {
            0.0
        } else {
            let x = DVector::from_iterator(free.len(), free.iter().map(|&i| state.beta_g[i]));
            let m = DVector::from_iterator(free.len(), free.iter().map(|&i| p.beta_g_mean[i]));
            mvn_logpdf_small(&x, &m, &p.beta_g_free_cov())
        };

        let variances = if self.sample_variances {
            let v = &state.variances;
            log_inverse_gamma(v.f2(), p.alpha_f, p.gamma_f)
                + log_inverse_gamma(v.eps2(), p.alpha_eps, p.gamma_eps)
                + log_inverse_gamma(v.g2(), p.alpha_g, p.gamma_g)
                + log_inverse_gamma(v.eta2(), p.alpha_eta, p.gamma_eta)
        } else {
            0.0
        };
        PriorTerms {
            x0,
            beta_f,
            beta_g,
            variances,
        }
    }

    pub fn log_prior(&self, state: &ChainState) -> f64 {
        self.log_prior_terms(state).total()
    }

    /// `Σ_t log N(y_t + 2πN_t; f*(t,x_t), σ²_ε)` over observed `t`.
    pub fn log_likelihood_obs(&self, state: &ChainState) -> f64 {
        let s2 = state.variances.eps2();
        self.obs
            .iter()
            .enumerate()
            .filter_map(|(i, y)| {
                y.map(|y| normal_logpdf(unwrap(y, state.n[i]), state.f_star[i], s2))
            })
            .sum()
    }

    /// Observation term for a single time `t` (zero when held out).
    pub fn log_obs_term(&self, t: usize, state: &ChainState) -> f64 {
        match self.obs[t - 1] {
            Some(y) => normal_logpdf(
                unwrap(y, state.n[t - 1]),
                state.f_star[t - 1],
                state.variances.eps2(),
            ),
            None => 0.0,
        }
    }

    /// Kernel matrices of the look-up grid under the current `σ_g`.
    pub fn grid_kernel(&self, state: &ChainState) -> Result<KernelMatrices> {
        KernelMatrices::build(&state.grid.points, state.variances.sigma_g, self.jitter)
    }

    /// Kernel matrices of `f*` over `(t, x_t)`, `t = 1..T+1`.
    pub fn f_kernel(&self, state: &ChainState) -> Result<KernelMatrices> {
        KernelMatrices::build(&state.f_points(), state.variances.sigma_f, self.jitter)
    }

    /// `log N(f*; Hβ_f, σ²_f A_f)`.
    pub fn log_f_prior(&self, state: &ChainState, fk: &KernelMatrices) -> f64 {
        let mean = fk.h() * state.beta_f;
        fk.log_density(&state.f_star, &mean, state.variances.f2())
    }

    pub fn g_block(&self, state: &ChainState, gk: &KernelMatrices) -> Result<GBlock> {
        let p0 = TimeAnglePoint::new(1.0, state.x[0]);
        let s = gk.cross(p0);
        let sigma = gk.a_jittered() - &s * s.transpose();
        let (sigma_chol, _) = linalg::cholesky_jittered(&linalg::symmetrize(&sigma), 0.0)
            .ok_or_else(|| {
                Error::Singular("grid covariance given g*(1,x0) is not positive definite".into())
            })?;
        Ok(GBlock {
            h0: design_vector(p0),
            s,
            sigma_chol,
        })
    }

    /// `log [g*(1,x_0) | x_0, β_g, σ_g] + log [D_z | g*, x_0, β_g, σ_g]`.
    pub fn log_g_block_with(&self, state: &ChainState, gk: &KernelMatrices, gb: &GBlock) -> f64 {
        let g2 = state.variances.g2();
        let m0 = gb.h0.dot(&state.beta_g);
        let mean_d = gk.h() * state.beta_g + &gb.s * (state.g_star - m0);
        normal_logpdf(state.g_star, m0, g2)
            + linalg::mvn_logpdf_centered(&(&state.grid.values - mean_d), &gb.sigma_chol, g2)
    }

    pub fn log_g_block(&self, state: &ChainState, gk: &KernelMatrices) -> Result<f64> {
        let gb = self.g_block(state, gk)?;
        Ok(self.log_g_block_with(state, gk, &gb))
    }

    pub fn transition_parts(&self, t: usize, state: &ChainState, gk: &KernelMatrices) -> Result<TransitionParts> {
        debug_assert!(t >= 2);
        let p = TimeAnglePoint::new(t as f64, state.x[t - 1]);
        let s = gk.cross(p);
        let u = gk.solve(&s);
        let w = design_vector(p) - gk.h().transpose() * &u;
        let q = linalg::solve_lower(gk.chol(), &s).norm_squared();
        let gv = ConditionalGaussian::new(0.0, state.variances.g2() * (1.0 - q))?;
        Ok(TransitionParts {
            s,
            u,
            w,
            variance: state.variances.eta2() + gv.variance,
        })
    }

    /// Mean and variance of `x*_t = x_t + 2πK_t` given its predecessor.
    /// For `t = 1` this is `(g*(1,x_0), σ²_η)`; for `t ≥ 2` it is the
    /// look-up-grid conditional of `g*(t, x_{t-1})` plus `σ²_η`.
    pub fn transition(
        &self,
        t: usize,
        state: &ChainState,
        gk: &KernelMatrices,
        weights: &DVector<f64>,
    ) -> Result<ConditionalGaussian> {
        if t == 1 {
            return ConditionalGaussian::new(state.g_star, state.variances.eta2());
        }
        let p = TimeAnglePoint::new(t as f64, state.x[t - 1]);
        let c = gk.predict(p, weights, &state.beta_g, state.variances.g2())?;
        ConditionalGaussian::new(c.mean, c.variance + state.variances.eta2())
    }

    /// `log N(x_t + 2πK_t; μ_{x_t}, σ²_{x_t})`, the joint density of
    /// `(x_t, K_t)` given everything upstream.
    pub fn log_transition_with(
        &self,
        t: usize,
        state: &ChainState,
        gk: &KernelMatrices,
        weights: &DVector<f64>,
    ) -> f64 {
        match self.transition(t, state, gk, weights) {
            Ok(c) if c.variance > 0.0 => normal_logpdf(state.x_linear(t), c.mean, c.variance),
            _ => f64::NEG_INFINITY,
        }
    }

    /// Latent transition term for `2 ≤ t ≤ T+1`.
    pub fn log_latent_transition(&self, t: usize, state: &ChainState) -> Result<f64> {
        if t < 2 || t > state.horizon() + 1 {
            return Err(Error::invalid(format!(
                "transition index {t} outside 2..={}",
                state.horizon() + 1
            )));
        }
        let gk = self.grid_kernel(state)?;
        let w = gk.weights(&state.grid.values, &state.beta_g);
        Ok(self.log_transition_with(t, state, &gk, &w))
    }

    /// Unnormalized log joint posterior of the full state.
    pub fn log_joint(&self, state: &ChainState) -> Result<f64> {
        state.check_shape()?;
        let gk = self.grid_kernel(state)?;
        let fk = self.f_kernel(state)?;
        let w = gk.weights(&state.grid.values, &state.beta_g);
        let transitions: f64 = (1..=state.horizon() + 1)
            .map(|t| self.log_transition_with(t, state, &gk, &w))
            .sum();
        Ok(self.log_prior(state)
            + self.log_f_prior(state, &fk)
            + self.log_g_block(state, &gk)?
            + transitions
            + self.log_likelihood_obs(state))
    }
}
