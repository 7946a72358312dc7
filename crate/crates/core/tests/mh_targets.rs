//! Each Metropolis–Hastings or single-site Gibbs updater, iterated alone,
//! must leave its full conditional invariant. The conditional is obtained
//! independently by normalizing `exp(log_joint)` over the updated
//! coordinate: exact enumeration for wrap counts, fine quadrature for
//! angles and variances.

mod common;

use circssm::circ::Angle;
use circssm::mcmc::{ProposalConfig, Sampler};
use circssm::model::{ChainState, Model, K_BOUND};
use common::*;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, InverseGamma};
use std::f64::consts::TAU;

fn sampler(model: Model, state: ChainState, seed: u64) -> Sampler<ChaCha8Rng> {
    Sampler::new(model, ProposalConfig::default(), state, rng(seed)).unwrap()
}

fn normalize(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Pearson statistic over cells with expected count ≥ 5 (others pooled),
/// returning the upper-tail p-value.
fn chi2_p(counts: &[f64], probs: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pool_c, mut pool_e) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(probs) {
        let e = n * p;
        if e >= 5.0 {
            stat += (c - e).powi(2) / e;
            cells += 1;
        } else {
            pool_c += c;
            pool_e += e;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_c - pool_e).powi(2) / pool_e.max(1e-12);
        cells += 1;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Histogram of angle draws against the quadrature density of `exp(log_joint)`.
fn angle_check<S, G, U>(seed: u64, set: S, get: G, update: U)
where
    S: Fn(&mut ChainState, Angle),
    G: Fn(&ChainState) -> Angle,
    U: Fn(&mut Sampler<ChaCha8Rng>),
{
    let Instance { model, state } = random_instance(seed, false);
    const FINE: usize = 3600;
    const BINS: usize = 24;
    let logw: Vec<f64> = (0..FINE)
        .map(|i| {
            let mut s = state.clone();
            set(&mut s, Angle::new((i as f64 + 0.5) * TAU / FINE as f64).unwrap());
            model.log_joint(&s).unwrap()
        })
        .collect();
    let w = normalize(&logw);
    let mut probs = vec![0.0; BINS];
    for (i, p) in w.iter().enumerate() {
        probs[i * BINS / FINE] += p;
    }
    let mut smp = sampler(model, state, seed + 1000);
    let mut counts = vec![0.0; BINS];
    let (n, thin) = (8000, 25);
    for _ in 0..200 {
        update(&mut smp);
    }
    for _ in 0..n {
        for _ in 0..thin {
            update(&mut smp);
        }
        let a = get(smp.state()).radians();
        counts[((a / TAU * BINS as f64) as usize).min(BINS - 1)] += 1.0;
    }
    let p = chi2_p(&counts, &probs);
    assert!(p > 1e-4, "seed {seed}: p = {p}");
}

#[test]
fn latent_x_update_targets_its_conditional() {
    // interior/first state and the forecast state x_{T+1}
    for (seed, last) in [(1u64, false), (2, true), (3, false)] {
        let t = if last { random_instance(seed, false).state.horizon() + 1 } else { 1 };
        angle_check(
            seed,
            |s, a| s.x[t] = a,
            |s| s.x[t],
            |smp| {
                smp.mh_update_latent_x(t).unwrap();
            },
        );
    }
}

#[test]
fn x0_update_targets_its_conditional() {
    for seed in [4u64, 5] {
        angle_check(seed, |s, a| s.x[0] = a, |s| s.x[0], |smp| {
            smp.mh_update_x0().unwrap();
        });
    }
}

fn wrap_check(seed: u64, which_n: bool) {
    let Instance { model, mut state } = random_instance(seed, false);
    let t = 1;
    if which_n && model.obs[0].is_none() {
        return;
    }
    // wide enough that several wrap counts carry mass
    if which_n {
        state.variances.sigma_eps = 2.5;
    } else {
        state.variances.sigma_eta = 4.0;
    }
    let values: Vec<i64> = (-(K_BOUND as i64)..=K_BOUND as i64).collect();
    let logw: Vec<f64> = values
        .iter()
        .map(|&k| {
            let mut s = state.clone();
            if which_n {
                s.n[t - 1] = k as _;
            } else {
                s.k[t - 1] = k as _;
            }
            model.log_joint(&s).unwrap()
        })
        .collect();
    let probs = normalize(&logw);
    let top = probs.iter().cloned().fold(0.0, f64::max);
    assert!(top < 0.9, "seed {seed}: degenerate instance, max mass {top}");
    let mut smp = sampler(model, state, seed + 7);
    let mut counts = vec![0.0; values.len()];
    for _ in 0..500 {
        if which_n {
            smp.mh_update_n(t).unwrap();
        } else {
            smp.mh_update_k(t).unwrap();
        }
    }
    for i in 0..60_000 {
        if which_n {
            smp.mh_update_n(t).unwrap();
        } else {
            smp.mh_update_k(t).unwrap();
        }
        if i % 5 == 0 {
            let k = if which_n { smp.state().n[0] } else { smp.state().k[0] } as i64;
            counts[(k + K_BOUND as i64) as usize] += 1.0;
        }
    }
    let p = chi2_p(&counts, &probs);
    assert!(p > 1e-4, "seed {seed}: p = {p}");
}

#[test]
fn wrap_count_k_matches_enumeration() {
    for seed in [11u64, 12, 13] {
        wrap_check(seed, false);
    }
}

#[test]
fn wrap_count_n_matches_enumeration() {
    for seed in [14u64, 15, 16] {
        wrap_check(seed, true);
    }
}

/// KS distance between sorted draws and a CDF.
fn ks(draws: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sigma_eta_update_in_conjugate_limit() {
    // With a one-point grid and a tiny σ_g the transitions reduce to
    // x*_t ~ N(μ_t, σ²_η), so σ²_η is inverse gamma a posteriori.
    let Instance { mut model, mut state } = random_instance(21, false);
    model.sample_variances = true;
    state.grid.points.truncate(1);
    state.grid.values = state.grid.values.rows(0, 1).into_owned();
    state.variances.sigma_g = 1e-5;
    let gk = model.grid_kernel(&state).unwrap();
    let w = gk.weights(&state.grid.values, &state.beta_g);
    let tt = state.horizon();
    let ss: f64 = (1..=tt + 1)
        .map(|t| {
            let c = model.transition(t, &state, &gk, &w).unwrap();
            (state.x_linear(t) - c.mean).powi(2)
        })
        .sum();
    let p = &model.prior;
    let ig = InverseGamma::new(0.5 * (p.alpha_eta + (tt + 1) as f64), 0.5 * (p.gamma_eta + ss)).unwrap();
    let mut smp = sampler(model, state, 5);
    let mut draws = Vec::new();
    for i in 0..1_000_000 {
        smp.mh_update_sigma_eta2().unwrap();
        if i >= 5000 && i % 250 == 0 {
            draws.push(smp.state().variances.eta2());
        }
    }
    let n = draws.len() as f64;
    let d = ks(&mut draws, |x| ig.cdf(x));
    // conservative critical value for thinned, mildly correlated draws
    assert!(d < 2.0 / n.sqrt(), "KS distance {d}");
}

#[test]
fn sigma_eps_gibbs_matches_quadrature() {
    let Instance { mut model, state } = random_instance(22, false);
    model.sample_variances = true;
    const FINE: usize = 20_000;
    let (lo, hi) = (1e-4f64.ln(), 1e5f64.ln());
    let grid: Vec<f64> = (0..FINE).map(|i| (lo + (hi - lo) * (i as f64 + 0.5) / FINE as f64).exp()).collect();
    // density in σ² times the Jacobian of the log grid
    let logw: Vec<f64> = grid
        .iter()
        .map(|&v| {
            let mut s = state.clone();
            s.variances.sigma_eps = v.sqrt();
            model.log_joint(&s).unwrap() + v.ln()
        })
        .collect();
    let w = normalize(&logw);
    let mut cum = Vec::with_capacity(FINE);
    let mut acc = 0.0;
    for p in &w {
        acc += p;
        cum.push(acc);
    }
    let cdf = |x: f64| {
        let i = grid.partition_point(|g| *g <= x);
        if i == 0 {
            0.0
        } else {
            cum[i - 1]
        }
    };
    let mut smp = sampler(model, state, 9);
    let mut draws: Vec<f64> = (0..5000)
        .map(|_| {
            smp.gibbs_update_sigma_eps2().unwrap();
            smp.state().variances.eps2()
        })
        .collect();
    let d = ks(&mut draws, cdf);
    assert!(d < 1.63 / (5000f64).sqrt() + 2e-3, "KS distance {d}");
}
