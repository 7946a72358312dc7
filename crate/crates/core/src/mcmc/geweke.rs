//! Joint-distribution test of the sampler: draws from the prior by direct
//! forward simulation ("marginal-conditional") are compared with draws from
//! a chain that alternates a full sweep with regenerating the data from the
//! current state ("successive-conditional"). Both target the joint prior,
//! so every test statistic must agree in mean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{simulate_latent, simulate_observations};
use super::{ProposalConfig, Sampler};
use crate::circ::Angle;
use crate::error::Result;
use crate::inference::effective_sample_size;
use crate::model::{generate_grid, ChainState, Model, PriorConfig, Variances};
use crate::par::{self, ExecMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub horizon: usize,
    pub grid_size: usize,
    pub n_marginal: usize,
    pub n_successive: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub prior: PriorConfig,
    pub variances: Variances,
    pub sample_variances: bool,
    pub proposals: ProposalConfig,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            horizon: 5,
            grid_size: 8,
            n_marginal: 50_000,
            n_successive: 50_000,
            burn_in: 1_000,
            seed: 0,
            prior: PriorConfig::default(),
            variances: Variances::default(),
            sample_variances: false,
            proposals: ProposalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GewekeStatistic {
    pub name: String,
    pub marginal_mean: f64,
    pub successive_mean: f64,
    pub successive_ess: f64,
    pub z: f64,
}

/// Test functions of the state, in a fixed order.
pub fn test_statistics(st: &ChainState, prior: &PriorConfig, sample_variances: bool) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (t, a) in st.x.iter().enumerate() {
        out.push((format!("cos x_{t}"), a.cos()));
        out.push((format!("sin x_{t}"), a.sin()));
    }
    for i in 0..4 {
        out.push((format!("beta_f_{}", i + 1), st.beta_f[i]));
    }
    out.push(("beta_f_1^2".into(), st.beta_f[0] * st.beta_f[0]));
    for i in prior.beta_g_free() {
        out.push((format!("beta_g_{}", i + 1), st.beta_g[i]));
        out.push((format!("beta_g_{}^2", i + 1), st.beta_g[i] * st.beta_g[i]));
    }
    let t = st.horizon();
    out.push(("fstar_1".into(), st.f_star[0]));
    out.push(("fstar_1^2".into(), st.f_star[0] * st.f_star[0]));
    out.push(("fstar_T1".into(), st.f_star[t]));
    out.push(("gstar".into(), st.g_star));
    out.push(("gstar^2".into(), st.g_star * st.g_star));
    out.push(("Dz_1".into(), st.grid.values[0]));
    out.push(("x*_1".into(), st.x_linear(1)));
    if sample_variances {
        let v = &st.variances;
        out.push(("log sigma_f^2".into(), v.f2().ln()));
        out.push(("log sigma_eps^2".into(), v.eps2().ln()));
        out.push(("log sigma_g^2".into(), v.g2().ln()));
        out.push(("log sigma_eta^2".into(), v.eta2().ln()));
    }
    out
}

fn marginal_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_7267);
    r.set_stream(i as u64);
    r
}

/// Runs both simulators and returns one z-score per test statistic.
pub fn geweke_test(cfg: &GewekeConfig, mode: ExecMode) -> Result<Vec<GewekeStatistic>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = generate_grid(&mut rng, cfg.grid_size, (cfg.horizon + 1) as f64)?.points;
    let model = Model::new(
        vec![Some(Angle::ZERO); cfg.horizon],
        cfg.prior.clone(),
        cfg.sample_variances,
    )?;

    let marginal: Vec<Vec<f64>> = par::try_map_indexed(mode, cfg.n_marginal, |i| {
        let mut r = marginal_rng(cfg.seed, i);
        let st = simulate_latent(&model, &grid, cfg.variances, &mut r)?;
        Ok(test_statistics(&st, &cfg.prior, cfg.sample_variances)
            .into_iter()
            .map(|(_, v)| v)
            .collect())
    })?;

    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let start = simulate_latent(&model, &grid, cfg.variances, &mut data_rng)?;
    let (obs, n) = simulate_observations(&model, &start, &mut data_rng)?;
    let mut m = model.clone();
    m.obs = obs;
    let mut start = start;
    start.n = n;
    let mut sampler = Sampler::new(
        m,
        cfg.proposals.clone(),
        start,
        ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
    )?;
    let names: Vec<String> = test_statistics(sampler.state(), &cfg.prior, cfg.sample_variances)
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let mut successive: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_successive); names.len()];
    for i in 0..cfg.burn_in + cfg.n_successive {
        sampler.sweep()?;
        let (obs, n) = simulate_observations(sampler.model(), sampler.state(), &mut data_rng)?;
        sampler.set_observations(obs, n)?;
        if i >= cfg.burn_in {
            for (col, (_, v)) in successive
                .iter_mut()
                .zip(test_statistics(sampler.state(), &cfg.prior, cfg.sample_variances))
            {
                col.push(v);
            }
        }
    }

    let nm = cfg.n_marginal as f64;
    let mut out = Vec::with_capacity(names.len());
    for (j, name) in names.into_iter().enumerate() {
        let mcol: Vec<f64> = marginal.iter().map(|r| r[j]).collect();
        let mm = mcol.iter().sum::<f64>() / nm;
        let mv = mcol.iter().map(|v| (v - mm).powi(2)).sum::<f64>() / (nm - 1.0);
        let scol = &successive[j];
        let ns = scol.len() as f64;
        let sm = scol.iter().sum::<f64>() / ns;
        let sv = scol.iter().map(|v| (v - sm).powi(2)).sum::<f64>() / (ns - 1.0);
        let ess = effective_sample_size(scol).unwrap_or(0.0);
        let se2 = mv / nm + if ess > 0.0 { sv / ess } else { 0.0 };
        let z = if se2 > 0.0 { (mm - sm) / se2.sqrt() } else { 0.0 };
        out.push(GewekeStatistic {
            name,
            marginal_mean: mm,
            successive_mean: sm,
            successive_ess: ess,
            z,
        });
    }
    Ok(out)
}
