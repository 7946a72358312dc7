//! Cholesky-based Gaussian helpers shared by the GP and sampler code.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Chol = Cholesky<f64, Dyn>;

/// First jitter tried when a kernel matrix is factorized.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Factorizes `m + jitter·I`, starting at `start` and escalating ×10 up to
/// [`JITTER_MAX`]. Returns the factor and the jitter that worked.
pub fn cholesky_jittered(m: &DMatrix<f64>, start: f64) -> Option<(Chol, f64)> {
    let mut jitter = start;
    loop {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(a) {
            if c.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Some((c, jitter));
            }
        }
        if jitter >= JITTER_MAX {
            return None;
        }
        jitter = if jitter <= 0.0 {
            JITTER_START
        } else {
            (jitter * 10.0).min(JITTER_MAX)
        };
    }
}

/// `L⁻¹ b` for the lower factor of `chol`.
pub fn solve_lower(chol: &Chol, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    chol.l_dirty().solve_lower_triangular_mut(&mut x);
    x
}

/// `log |A|` from its Cholesky factor.
pub fn log_det(chol: &Chol) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `log N(r; 0, scale·A)` with `A = L Lᵀ`.
pub fn mvn_logpdf_centered(r: &DVector<f64>, chol: &Chol, scale: f64) -> f64 {
    let n = r.len() as f64;
    let z = solve_lower(chol, r);
    -0.5 * (n * (TAU * scale).ln() + log_det(chol) + z.norm_squared() / scale)
}

/// A Gaussian in canonical form, `exp(-½ xᵀ P x + xᵀ ℓ)`.
#[derive(Clone, Debug)]
pub struct CanonicalGaussian {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl CanonicalGaussian {
    pub fn zeros(n: usize) -> Self {
        CanonicalGaussian {
            precision: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
        }
    }

    fn factor(&self, what: &str) -> Result<Chol> {
        let p = symmetrize(&self.precision);
        Cholesky::new(p).ok_or_else(|| {
            Error::Singular(format!("{what}: conditional precision is not positive definite"))
        })
    }

    /// Mean and covariance.
    pub fn moments(&self, what: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let c = self.factor(what)?;
        Ok((c.solve(&self.linear), c.inverse()))
    }

    /// Mean and one draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, what: &str) -> Result<(DVector<f64>, DVector<f64>)> {
        let c = self.factor(what)?;
        let mean = c.solve(&self.linear);
        let z = standard_normal_vector(rng, mean.len());
        let mut e = z;
        // cov = P⁻¹ = L⁻ᵀ L⁻¹, so L⁻ᵀ z has the right covariance
        c.l_dirty().tr_solve_lower_triangular_mut(&mut e);
        Ok((mean.clone(), mean + e))
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw from `N(mean, scale·A)` given the factor of `A`.
pub fn mvn_draw<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    chol: &Chol,
    scale: f64,
) -> DVector<f64> {
    let z = standard_normal_vector(rng, mean.len());
    mean + (chol.l_dirty().lower_triangle() * z) * scale.sqrt()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
