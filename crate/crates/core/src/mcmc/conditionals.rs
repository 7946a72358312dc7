//! Closed-form full conditionals of the Gibbs blocks.
//!
//! Each function returns the conditional in canonical (precision, linear)
//! form or as mean/variance, without drawing, so it can be checked against
//! dense linear algebra.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::gp::{ConditionalGaussian, KernelMatrices};
use crate::linalg::CanonicalGaussian;
use crate::model::{GBlock, PriorConfig, TransitionParts};

fn to_dmatrix(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(4, 4, m.as_slice())
}

fn to_dvector(v: &Vector4<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Adds a Gaussian prior `N(mean, cov)` to a data term `(P_d, ℓ_d)`.
pub fn with_prior(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    data_precision: &DMatrix<f64>,
    data_linear: &DVector<f64>,
) -> Result<CanonicalGaussian> {
    let pinv = inverse(cov, "prior covariance")?;
    Ok(CanonicalGaussian {
        precision: &pinv + data_precision,
        linear: &pinv * mean + data_linear,
    })
}

/// `β_f | f*, x, σ_f`: precision `Σ₀⁻¹ + HᵀA⁻¹H/σ²_f`, linear
/// `Σ₀⁻¹β₀ + HᵀA⁻¹f*/σ²_f` over all `T+1` points of `f*`.
pub fn beta_f(
    prior: &PriorConfig,
    fk: &KernelMatrices,
    f_star: &DVector<f64>,
    sigma_f2: f64,
) -> Result<CanonicalGaussian> {
    let h = fk.h();
    let ainv_h = fk.chol().solve(h);
    let p_d = h.transpose() * &ainv_h / sigma_f2;
    let l_d = ainv_h.transpose() * f_star / sigma_f2;
    with_prior(
        &to_dvector(&prior.beta_f_mean),
        &to_dmatrix(&prior.beta_f_cov),
        &p_d,
        &l_d,
    )
}

/// Leading `m×m` block of the lower Cholesky factor.
fn leading_factor(fk: &KernelMatrices, m: usize) -> DMatrix<f64> {
    fk.chol().l_dirty().view((0, 0), (m, m)).lower_triangle()
}

/// The block `f*_{1..T}` given `x`, `β_f`, `σ_f`, `σ_ε` and the unwrapped
/// observations `targets[t] = y_t + 2πN_t` (`None` where held out).
///
/// `fk` holds the kernel over all `T+1` points; the block prior is its
/// leading `T×T` part.
pub fn fstar_block(
    fk: &KernelMatrices,
    beta_f: &Vector4<f64>,
    targets: &[Option<f64>],
    sigma_f2: f64,
    sigma_eps2: f64,
) -> Result<CanonicalGaussian> {
    let m = targets.len();
    if fk.len() != m + 1 {
        return Err(Error::invalid(format!(
            "f* kernel has {} points for {m} observations",
            fk.len()
        )));
    }
    let l = leading_factor(fk, m);
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::Singular("f* kernel block".into()))?;
    let ainv = linv.transpose() * &linv;
    let mean = fk.h().rows(0, m) * beta_f;
    let mut precision = &ainv / sigma_f2;
    let mut linear = &ainv * mean / sigma_f2;
    for (i, y) in targets.iter().enumerate() {
        if let Some(y) = y {
            precision[(i, i)] += 1.0 / sigma_eps2;
            linear[i] += y / sigma_eps2;
        }
    }
    Ok(CanonicalGaussian { precision, linear })
}

/// `f*(T+1, x_{T+1})` given the block `f*_{1..T}`.
pub fn fstar_next(
    fk: &KernelMatrices,
    beta_f: &Vector4<f64>,
    block: &DVector<f64>,
    sigma_f2: f64,
) -> Result<ConditionalGaussian> {
    let m = block.len();
    if fk.len() != m + 1 {
        return Err(Error::invalid("f* block length does not match kernel"));
    }
    let lfull = fk.chol().l_dirty();
    let mean_all = fk.h() * beta_f;
    let r = block - mean_all.rows(0, m);
    let z = leading_factor(fk, m)
        .solve_lower_triangular(&r)
        .ok_or_else(|| Error::Singular("f* kernel block".into()))?;
    let row = lfull.view((m, 0), (1, m));
    let mean = mean_all[m] + (row * z)[0];
    let lam = lfull[(m, m)];
    ConditionalGaussian::new(mean, sigma_f2 * lam * lam)
}

/// Shape and scale of the inverse-gamma conditional of `σ²_ε`.
pub fn sigma_eps2(prior: &PriorConfig, residuals: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (n, ss) = residuals
        .into_iter()
        .fold((0usize, 0.0), |(n, ss), r| (n + 1, ss + r * r));
    (
        0.5 * (prior.alpha_eps + n as f64),
        0.5 * (prior.gamma_eps + ss),
    )
}

/// `g*(1, x₀)` given `D_z`, `x*_1`, `β_g`, `σ_g`, `σ_η`.
pub fn gstar(
    gb: &GBlock,
    gk: &KernelMatrices,
    d: &DVector<f64>,
    beta_g: &Vector4<f64>,
    x1_linear: f64,
    sigma_eta2: f64,
    sigma_g2: f64,
) -> Result<ConditionalGaussian> {
    let m0 = gb.h0.dot(beta_g);
    let d_star = d - gk.h() * beta_g + &gb.s * m0;
    let sigma_inv_s = gb.sigma_chol.solve(&gb.s);
    let precision = 1.0 / sigma_eta2 + (1.0 + gb.s.dot(&sigma_inv_s)) / sigma_g2;
    let linear = x1_linear / sigma_eta2 + (m0 + sigma_inv_s.dot(&d_star)) / sigma_g2;
    ConditionalGaussian::new(linear / precision, 1.0 / precision)
}

/// `D_z` given `g*`, `β_g`, the latent path and `σ_g`.
/// `parts[i]` and `x_linear[i]` belong to transition `t = i + 2`.
pub fn dz(
    gb: &GBlock,
    gk: &KernelMatrices,
    g_star: f64,
    beta_g: &Vector4<f64>,
    parts: &[TransitionParts],
    x_linear: &[f64],
    sigma_g2: f64,
) -> Result<CanonicalGaussian> {
    let n = gk.len();
    let m0 = gb.h0.dot(beta_g);
    let m_d = gk.h() * beta_g + &gb.s * (g_star - m0);
    let sigma_inv = gb.sigma_chol.inverse();
    let mut precision = &sigma_inv / sigma_g2;
    let mut linear = &sigma_inv * m_d / sigma_g2;
    for (p, &x) in parts.iter().zip(x_linear) {
        debug_assert_eq!(p.u.len(), n);
        precision.ger(1.0 / p.variance, &p.u, &p.u, 1.0);
        let r = x - p.w.dot(beta_g);
        linear.axpy(r / p.variance, &p.u, 1.0);
    }
    Ok(CanonicalGaussian { precision, linear })
}

/// Likelihood contribution to the conditional of the full `β_g`:
/// the `g*` prior, `D_z | g*`, and every transition `t ≥ 2`.
pub fn beta_g_data(
    gb: &GBlock,
    gk: &KernelMatrices,
    g_star: f64,
    d: &DVector<f64>,
    parts: &[TransitionParts],
    x_linear: &[f64],
    sigma_g2: f64,
) -> (Matrix4<f64>, Vector4<f64>) {
    let b = gk.h() - &gb.s * gb.h0.transpose();
    let sigma_inv_b = gb.sigma_chol.solve(&b);
    let btsb = b.transpose() * &sigma_inv_b;
    let resid = d - &gb.s * g_star;
    let bts_r = sigma_inv_b.transpose() * resid;
    let mut p = gb.h0 * gb.h0.transpose();
    let mut l = gb.h0 * g_star;
    for i in 0..4 {
        l[i] += bts_r[i];
        for j in 0..4 {
            p[(i, j)] += btsb[(i, j)];
        }
    }
    p /= sigma_g2;
    l /= sigma_g2;
    for (tp, &x) in parts.iter().zip(x_linear) {
        p += tp.w * tp.w.transpose() / tp.variance;
        l += tp.w * ((x - tp.u.dot(d)) / tp.variance);
    }
    (p, l)
}

/// Conditional of the free components of `β_g` (those with positive prior
/// variance), with pinned components held at `current`.
/// Returns the free indices and the canonical form over them.
pub fn beta_g(
    prior: &PriorConfig,
    data_precision: &Matrix4<f64>,
    data_linear: &Vector4<f64>,
    current: &Vector4<f64>,
) -> Result<(Vec<usize>, CanonicalGaussian)> {
    let free = prior.beta_g_free();
    let pinned: Vec<usize> = (0..4).filter(|i| !free.contains(i)).collect();
    let k = free.len();
    let p_ff = DMatrix::from_fn(k, k, |i, j| data_precision[(free[i], free[j])]);
    let mut l_f = DVector::from_fn(k, |i, _| data_linear[free[i]]);
    for (i, &fi) in free.iter().enumerate() {
        for &pj in &pinned {
            l_f[i] -= data_precision[(fi, pj)] * current[pj];
        }
    }
    let mean = DVector::from_fn(k, |i, _| prior.beta_g_mean[free[i]]);
    let g = if k == 0 {
        CanonicalGaussian::zeros(0)
    } else {
        with_prior(&mean, &prior.beta_g_free_cov(), &p_ff, &l_f)?
    };
    Ok((free, g))
}
