//! Dense-algebra oracles shared by the integration tests. Every conditional
//! here is obtained by writing down the joint Gaussian of the relevant
//! linear quantities and conditioning with explicit matrix inverses, which
//! is independent of the canonical-form code under test.

#![allow(dead_code)]

use circssm::circ::{Angle, WrapCount};
use circssm::gp::{gp_conditional, KernelMatrices, TimeAnglePoint};
use circssm::mcmc::conditionals;
use circssm::mcmc::forward::simulate_latent;
use circssm::model::{generate_grid, ChainState, Model, PriorConfig, Variances};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `exp(-σ⁴Δt²)·cos|Δz|`, written out again.
pub fn k(t1: f64, z1: f64, t2: f64, z2: f64, sigma: f64) -> f64 {
    (-sigma.powi(4) * (t1 - t2).powi(2)).exp() * (z1 - z2).abs().cos()
}

pub fn h(t: f64, z: f64) -> Vector4<f64> {
    Vector4::new(1.0, t, z.cos(), z.sin())
}

pub fn gram(pts: &[(f64, f64)], sigma: f64, jitter: f64) -> DMatrix<f64> {
    let n = pts.len();
    DMatrix::from_fn(n, n, |i, j| {
        k(pts[i].0, pts[i].1, pts[j].0, pts[j].1, sigma) + if i == j { jitter } else { 0.0 }
    })
}

pub fn design(pts: &[(f64, f64)]) -> DMatrix<f64> {
    DMatrix::from_fn(pts.len(), 4, |i, j| h(pts[i].0, pts[i].1)[j])
}

pub fn cross(pts: &[(f64, f64)], t: f64, z: f64, sigma: f64) -> DVector<f64> {
    DVector::from_iterator(pts.len(), pts.iter().map(|p| k(t, z, p.0, p.1, sigma)))
}

pub fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("oracle matrix is invertible")
}

/// `z[a] | z[b] = v` for `z ~ N(mu, s)`.
pub fn condition(
    mu: &DVector<f64>,
    s: &DMatrix<f64>,
    a: &[usize],
    b: &[usize],
    v: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| s[(r[i], c[j])]);
    let s_ab = sub(a, b);
    let s_bb_inv = inv(&sub(b, b));
    let mu_a = DVector::from_iterator(a.len(), a.iter().map(|&i| mu[i]));
    let mu_b = DVector::from_iterator(b.len(), b.iter().map(|&i| mu[i]));
    let mean = mu_a + &s_ab * &s_bb_inv * (v - mu_b);
    let cov = sub(a, a) - &s_ab * s_bb_inv * s_ab.transpose();
    (mean, cov)
}

/// Largest entrywise difference relative to `max(1, |oracle|)`.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn pts_of(points: &[TimeAnglePoint]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.t, p.z.radians())).collect()
}

/// A random model and state with `T ≤ 5`, `n ≤ 4`. Some observations are
/// held out, wrap counts are non-zero and `β_g` has all four components
/// free when `all_free` is set.
pub struct Instance {
    pub model: Model,
    pub state: ChainState,
}

pub fn random_instance(seed: u64, all_free: bool) -> Instance {
    let mut r = rng(seed);
    let t = r.random_range(1..=5usize);
    let n = r.random_range(1..=4usize);
    let mut prior = PriorConfig::default();
    prior.beta_f_mean = Vector4::from_fn(|_, _| r.random_range(-1.0..1.0));
    let a = Matrix4::from_fn(|_, _| r.random_range(-0.5..0.5));
    prior.beta_f_cov = a * a.transpose() + Matrix4::identity() * 0.5;
    if all_free {
        let b = Matrix4::from_fn(|_, _| r.random_range(-0.5..0.5));
        prior.beta_g_cov = b * b.transpose() + Matrix4::identity() * 0.3;
        prior.beta_g_mean = Vector4::from_fn(|_, _| r.random_range(-1.0..1.0));
    }
    let obs: Vec<Option<Angle>> = (0..t)
        .map(|_| {
            if t > 1 && r.random::<f64>() < 0.25 {
                None
            } else {
                Some(Angle::new(r.random_range(0.0..std::f64::consts::TAU)).unwrap())
            }
        })
        .collect();
    let model = Model::new(obs, prior, false).unwrap();
    let v = Variances {
        sigma_f: r.random_range(0.6..1.4),
        sigma_eps: r.random_range(0.3..1.5),
        sigma_g: r.random_range(0.6..1.4),
        sigma_eta: r.random_range(0.3..1.5),
    };
    let grid = generate_grid(&mut r, n, (t + 1) as f64).unwrap().points;
    let mut state = simulate_latent(&model, &grid, v, &mut r).unwrap();
    for k in state.k.iter_mut() {
        *k = r.random_range(-2..=2) as WrapCount;
    }
    for (i, n) in state.n.iter_mut().enumerate() {
        *n = if model.obs[i].is_some() {
            r.random_range(-2..=2) as WrapCount
        } else {
            0
        };
    }
    Instance { model, state }
}

/// `(t, x_{t})` inputs of `f*` for `t = 1..T+1`.
pub fn f_inputs(st: &ChainState) -> Vec<(f64, f64)> {
    (1..st.x.len()).map(|t| (t as f64, st.x[t].radians())).collect()
}

fn v4(v: &Vector4<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn m4(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(4, 4, m.as_slice())
}

/// `β_f | f*`: joint of `(β_f, f*)` with `f* = Hβ_f + e`, `e ~ N(0, σ²_f A)`.
pub fn oracle_beta_f(st: &ChainState, prior: &PriorConfig, jitter: f64) -> (DVector<f64>, DMatrix<f64>) {
    let pts = f_inputs(st);
    let m = pts.len();
    let hm = design(&pts);
    let a = gram(&pts, st.variances.sigma_f, jitter);
    let b0 = v4(&prior.beta_f_mean);
    let c0 = m4(&prior.beta_f_cov);
    let mut mu = DVector::zeros(4 + m);
    mu.rows_mut(0, 4).copy_from(&b0);
    mu.rows_mut(4, m).copy_from(&(&hm * &b0));
    let mut s = DMatrix::zeros(4 + m, 4 + m);
    s.view_mut((0, 0), (4, 4)).copy_from(&c0);
    let c_h = &c0 * hm.transpose();
    s.view_mut((0, 4), (4, m)).copy_from(&c_h);
    s.view_mut((4, 0), (m, 4)).copy_from(&c_h.transpose());
    s.view_mut((4, 4), (m, m))
        .copy_from(&(&hm * &c0 * hm.transpose() + a * st.variances.f2()));
    let a_idx: Vec<usize> = (0..4).collect();
    let b_idx: Vec<usize> = (4..4 + m).collect();
    condition(&mu, &s, &a_idx, &b_idx, &st.f_star)
}

/// `f*_{1..T} | y`: prior from the leading block of the `T+1` kernel, with
/// `y_t + 2πN_t = f*_t + ε_t` for observed `t`.
pub fn oracle_fstar_block(model: &Model, st: &ChainState, jitter: f64) -> (DVector<f64>, DMatrix<f64>) {
    let pts = f_inputs(st);
    let t = model.horizon();
    let hm = design(&pts[..t]);
    let a = gram(&pts[..t], st.variances.sigma_f, jitter) * st.variances.f2();
    let obs: Vec<usize> = (0..t).filter(|&i| model.obs[i].is_some()).collect();
    let o = obs.len();
    let mut mu = DVector::zeros(t + o);
    let prior_mean = &hm * st.beta_f;
    mu.rows_mut(0, t).copy_from(&prior_mean);
    let mut s = DMatrix::zeros(t + o, t + o);
    s.view_mut((0, 0), (t, t)).copy_from(&a);
    for (j, &oi) in obs.iter().enumerate() {
        mu[t + j] = prior_mean[oi];
        for i in 0..t {
            s[(i, t + j)] = a[(i, oi)];
            s[(t + j, i)] = a[(oi, i)];
        }
        for (jj, &oj) in obs.iter().enumerate() {
            s[(t + j, t + jj)] = a[(oi, oj)];
        }
        s[(t + j, t + j)] += st.variances.eps2();
    }
    let y = DVector::from_iterator(
        o,
        obs.iter().map(|&i| {
            model.obs[i].unwrap().radians() + std::f64::consts::TAU * st.n[i] as f64
        }),
    );
    let a_idx: Vec<usize> = (0..t).collect();
    let b_idx: Vec<usize> = (t..t + o).collect();
    condition(&mu, &s, &a_idx, &b_idx, &y)
}

/// `f*_{T+1} | f*_{1..T}` from the full `T+1` prior.
pub fn oracle_fstar_next(st: &ChainState, block: &DVector<f64>, jitter: f64) -> (f64, f64) {
    let pts = f_inputs(st);
    let m = pts.len();
    let mu = design(&pts) * st.beta_f;
    let s = gram(&pts, st.variances.sigma_f, jitter) * st.variances.f2();
    let (mean, cov) = condition(&mu, &s, &[m - 1], &(0..m - 1).collect::<Vec<_>>(), block);
    (mean[0], cov[(0, 0)])
}

/// Joint of `(g*, D_z)`: mean `(h₀ᵀβ, Hβ)`, covariance `σ²_g [[1, sᵀ], [s, A]]`.
fn g_joint(st: &ChainState, jitter: f64) -> (DVector<f64>, DMatrix<f64>) {
    let g = pts_of(&st.grid.points);
    let n = g.len();
    let x0 = st.x[0].radians();
    let s0 = cross(&g, 1.0, x0, st.variances.sigma_g);
    let a = gram(&g, st.variances.sigma_g, jitter);
    let mut mu = DVector::zeros(n + 1);
    mu[0] = h(1.0, x0).dot(&st.beta_g);
    mu.rows_mut(1, n).copy_from(&(design(&g) * st.beta_g));
    let mut s = DMatrix::zeros(n + 1, n + 1);
    s[(0, 0)] = 1.0;
    for i in 0..n {
        s[(0, i + 1)] = s0[i];
        s[(i + 1, 0)] = s0[i];
    }
    s.view_mut((1, 1), (n, n)).copy_from(&a);
    (mu, s * st.variances.g2())
}

/// `g* | D_z, x*_1` with `x*_1 = g* + η`.
pub fn oracle_gstar(st: &ChainState, jitter: f64) -> (f64, f64) {
    let (mu_g, s_g) = g_joint(st, jitter);
    let n = st.grid.points.len();
    let mut mu = DVector::zeros(n + 2);
    mu.rows_mut(0, n + 1).copy_from(&mu_g);
    mu[n + 1] = mu_g[0];
    let mut s = DMatrix::zeros(n + 2, n + 2);
    s.view_mut((0, 0), (n + 1, n + 1)).copy_from(&s_g);
    for i in 0..=n {
        s[(n + 1, i)] = s_g[(0, i)];
        s[(i, n + 1)] = s_g[(i, 0)];
    }
    s[(n + 1, n + 1)] = s_g[(0, 0)] + st.variances.eta2();
    let mut v = DVector::zeros(n + 1);
    v.rows_mut(0, n).copy_from(&st.grid.values);
    v[n] = st.x_linear(1);
    let b: Vec<usize> = (1..n + 2).collect();
    let (m, c) = condition(&mu, &s, &[0], &b, &v);
    (m[0], c[(0, 0)])
}

/// Per-transition linear map for `t ≥ 2`: `x*_t = w_tᵀβ + u_tᵀD + ν_t`
/// with `u = A⁻¹s`, `w = h − Hᵀu`, `var ν = σ²_η + σ²_g(1 − sᵀA⁻¹s)`.
fn transition_map(st: &ChainState, t: usize, jitter: f64) -> (DVector<f64>, Vector4<f64>, f64) {
    let g = pts_of(&st.grid.points);
    let sg = st.variances.sigma_g;
    let ainv = inv(&gram(&g, sg, jitter));
    let xp = st.x[t - 1].radians();
    let s = cross(&g, t as f64, xp, sg);
    let u = &ainv * &s;
    let hu = design(&g).transpose() * &u;
    let w = h(t as f64, xp) - Vector4::from_column_slice(hu.as_slice());
    let var = st.variances.eta2() + st.variances.g2() * (1.0 - s.dot(&u));
    (u, w, var)
}

/// `D_z | g*, x*_{2..T+1}`.
pub fn oracle_dz(st: &ChainState, jitter: f64) -> (DVector<f64>, DMatrix<f64>) {
    let (mu_g, s_g) = g_joint(st, jitter);
    let n = st.grid.points.len();
    let tt = st.horizon();
    let idx_d: Vec<usize> = (1..=n).collect();
    // D | g*
    let (m_d, c_d) = condition(&mu_g, &s_g, &idx_d, &[0], &DVector::from_element(1, st.g_star));
    let k = tt; // transitions t = 2..T+1
    let mut mu = DVector::zeros(n + k);
    mu.rows_mut(0, n).copy_from(&m_d);
    let mut s = DMatrix::zeros(n + k, n + k);
    s.view_mut((0, 0), (n, n)).copy_from(&c_d);
    let maps: Vec<_> = (2..=tt + 1).map(|t| transition_map(st, t, jitter)).collect();
    for (i, (u, w, var)) in maps.iter().enumerate() {
        mu[n + i] = w.dot(&st.beta_g) + u.dot(&m_d);
        let cu = &c_d * u;
        for r in 0..n {
            s[(r, n + i)] = cu[r];
            s[(n + i, r)] = cu[r];
        }
        for (j, (u2, _, _)) in maps.iter().enumerate() {
            s[(n + i, n + j)] = u2.dot(&cu);
        }
        s[(n + i, n + i)] += var;
    }
    let x = DVector::from_iterator(k, (2..=tt + 1).map(|t| st.x_linear(t)));
    let a: Vec<usize> = (0..n).collect();
    let b: Vec<usize> = (n..n + k).collect();
    condition(&mu, &s, &a, &b, &x)
}

/// Free components of `β_g` given `g*`, `D_z` and `x*_{2..T+1}`, from the
/// joint of `(β_free, g*, D_z, x*)` written as a linear map of independent
/// Gaussian sources.
pub fn oracle_beta_g(st: &ChainState, prior: &PriorConfig, jitter: f64) -> (Vec<usize>, DVector<f64>, DMatrix<f64>) {
    let free: Vec<usize> = (0..4).filter(|&i| prior.beta_g_cov[(i, i)] > 0.0).collect();
    let nf = free.len();
    let g = pts_of(&st.grid.points);
    let n = g.len();
    let tt = st.horizon();
    let sg = st.variances.sigma_g;
    let x0 = st.x[0].radians();
    let s0 = cross(&g, 1.0, x0, sg);
    let a = gram(&g, sg, jitter);
    let sigma = (&a - &s0 * s0.transpose()) * st.variances.g2();
    let hm = design(&g);
    let h0 = h(1.0, x0);
    let maps: Vec<_> = (2..=tt + 1).map(|t| transition_map(st, t, jitter)).collect();

    // sources: β_free (nf), e0 (1), e_D (n), ν (tt)
    let ns = nf + 1 + n + tt;
    let mut src_cov = DMatrix::zeros(ns, ns);
    for i in 0..nf {
        for j in 0..nf {
            src_cov[(i, j)] = prior.beta_g_cov[(free[i], free[j])];
        }
    }
    src_cov[(nf, nf)] = st.variances.g2();
    src_cov.view_mut((nf + 1, nf + 1), (n, n)).copy_from(&sigma);
    for (i, (_, _, var)) in maps.iter().enumerate() {
        src_cov[(nf + 1 + n + i, nf + 1 + n + i)] = *var;
    }
    let mut src_mean = DVector::zeros(ns);
    for i in 0..nf {
        src_mean[i] = prior.beta_g_mean[free[i]];
    }
    let pinned = |row: &Vector4<f64>| -> f64 {
        (0..4).filter(|i| !free.contains(i)).map(|i| row[i] * st.beta_g[i]).sum()
    };

    // outputs: β_free, g*, D, x*
    let no = nf + 1 + n + tt;
    let mut lmap = DMatrix::zeros(no, ns);
    let mut off = DVector::zeros(no);
    for i in 0..nf {
        lmap[(i, i)] = 1.0;
    }
    for (i, &fi) in free.iter().enumerate() {
        lmap[(nf, i)] = h0[fi];
    }
    lmap[(nf, nf)] = 1.0;
    off[nf] = pinned(&h0);
    for r in 0..n {
        let hr = Vector4::from_fn(|j, _| hm[(r, j)]);
        for (i, &fi) in free.iter().enumerate() {
            lmap[(nf + 1 + r, i)] = hr[fi];
        }
        lmap[(nf + 1 + r, nf)] = s0[r];
        lmap[(nf + 1 + r, nf + 1 + r)] = 1.0;
        off[nf + 1 + r] = pinned(&hr);
    }
    for (ti, (u, w, _)) in maps.iter().enumerate() {
        let row = nf + 1 + n + ti;
        // x*_t = wᵀβ + uᵀD + ν, with D expanded in the sources
        let full = w + Vector4::from_column_slice((hm.transpose() * u).as_slice());
        for (i, &fi) in free.iter().enumerate() {
            lmap[(row, i)] = full[fi];
        }
        lmap[(row, nf)] = u.dot(&s0);
        for r in 0..n {
            lmap[(row, nf + 1 + r)] = u[r];
        }
        lmap[(row, nf + 1 + n + ti)] = 1.0;
        off[row] = pinned(&full);
    }
    let mu = &lmap * src_mean + off;
    let s = &lmap * src_cov * lmap.transpose();
    let mut v = DVector::zeros(1 + n + tt);
    v[0] = st.g_star;
    v.rows_mut(1, n).copy_from(&st.grid.values);
    for t in 2..=tt + 1 {
        v[n + t - 1] = st.x_linear(t);
    }
    let a_idx: Vec<usize> = (0..nf).collect();
    let b_idx: Vec<usize> = (nf..no).collect();
    let (m, c) = condition(&mu, &s, &a_idx, &b_idx, &v);
    (free, m, c)
}

/// Relative errors of each Gibbs conditional against its dense oracle.
pub fn gibbs_errors(seed: u64, all_free: bool) -> Vec<(&'static str, f64)> {
    let Instance { model, state: st } = random_instance(seed, all_free);
    let prior = &model.prior;
    let v = st.variances;
    let t = model.horizon();
    let gk = model.grid_kernel(&st).unwrap();
    let fk = model.f_kernel(&st).unwrap();
    let gb = model.g_block(&st, &gk).unwrap();

    let (m, c) = conditionals::beta_f(prior, &fk, &st.f_star, v.f2())
        .unwrap()
        .moments("beta_f")
        .unwrap();
    let (om, oc) = oracle_beta_f(&st, prior, fk.jitter());
    let beta_f = rel_err(m.as_slice(), om.as_slice()).max(rel_err(c.as_slice(), oc.as_slice()));

    let targets: Vec<Option<f64>> = (0..t)
        .map(|i| model.obs[i].map(|y| y.radians() + std::f64::consts::TAU * st.n[i] as f64))
        .collect();
    let (m, c) = conditionals::fstar_block(&fk, &st.beta_f, &targets, v.f2(), v.eps2())
        .unwrap()
        .moments("f*")
        .unwrap();
    let (om, oc) = oracle_fstar_block(&model, &st, fk.jitter());
    let fstar = rel_err(m.as_slice(), om.as_slice()).max(rel_err(c.as_slice(), oc.as_slice()));

    let block = DVector::from_iterator(t, (0..t).map(|i| st.f_star[i]));
    let nx = conditionals::fstar_next(&fk, &st.beta_f, &block, v.f2()).unwrap();
    let (om, ov) = oracle_fstar_next(&st, &block, fk.jitter());
    let fstar_next = rel_err(&[nx.mean, nx.variance], &[om, ov]);

    let parts: Vec<_> = (2..=t + 1)
        .map(|i| model.transition_parts(i, &st, &gk).unwrap())
        .collect();
    let xs: Vec<f64> = (2..=t + 1).map(|i| st.x_linear(i)).collect();

    let (p, l) = conditionals::beta_g_data(&gb, &gk, st.g_star, &st.grid.values, &parts, &xs, v.g2());
    let (free, g) = conditionals::beta_g(prior, &p, &l, &st.beta_g).unwrap();
    let (m, c) = g.moments("beta_g").unwrap();
    let (ofree, om, oc) = oracle_beta_g(&st, prior, gk.jitter());
    assert_eq!(free, ofree);
    let beta_g = rel_err(m.as_slice(), om.as_slice()).max(rel_err(c.as_slice(), oc.as_slice()));

    let gs = conditionals::gstar(&gb, &gk, &st.grid.values, &st.beta_g, st.x_linear(1), v.eta2(), v.g2()).unwrap();
    let (om, ov) = oracle_gstar(&st, gk.jitter());
    let gstar = rel_err(&[gs.mean, gs.variance], &[om, ov]);

    let (m, c) = conditionals::dz(&gb, &gk, st.g_star, &st.beta_g, &parts, &xs, v.g2())
        .unwrap()
        .moments("Dz")
        .unwrap();
    let (om, oc) = oracle_dz(&st, gk.jitter());
    let dz = rel_err(m.as_slice(), om.as_slice()).max(rel_err(c.as_slice(), oc.as_slice()));

    vec![
        ("beta_f", beta_f),
        ("fstar", fstar),
        ("fstar_next", fstar_next),
        ("beta_g", beta_g),
        ("gstar", gstar),
        ("dz", dz),
    ]
}

/// Relative error of `gp_conditional` against partitioned conditioning of
/// the explicit joint, on one random instance with at most six points.
pub fn gp_conditional_error(r: &mut ChaCha8Rng) -> f64 {
    let n = r.random_range(1..=6usize);
    let sigma = r.random_range(0.3..1.5);
    let s2 = r.random_range(0.2..3.0);
    let pts: Vec<TimeAnglePoint> = (0..n)
        .map(|i| {
            TimeAnglePoint::new(
                i as f64 * 1.3 + r.random_range(0.0..1.0),
                Angle::new(r.random_range(0.0..std::f64::consts::TAU)).unwrap(),
            )
        })
        .collect();
    let beta = Vector4::from_fn(|_, _| r.random_range(-1.0..1.0));
    let values = DVector::from_fn(n, |_, _| r.random_range(-2.0..2.0));
    let target = TimeAnglePoint::new(r.random_range(0.0..8.0), Angle::new(r.random_range(0.0..std::f64::consts::TAU)).unwrap());
    let km = KernelMatrices::build(&pts, sigma, 1e-10).unwrap();
    let got = gp_conditional(target, &km, &values, &beta, s2).unwrap();

    let mut all = pts_of(&pts);
    all.push((target.t, target.z.radians()));
    let mut cov = gram(&all, sigma, 0.0) * s2;
    for i in 0..n {
        cov[(i, i)] += km.jitter() * s2;
    }
    let mu = design(&all) * beta;
    let (m, c) = condition(&mu, &cov, &[n], &(0..n).collect::<Vec<_>>(), &values);
    rel_err(&[got.mean, got.variance], &[m[0], c[(0, 0)]])
}
