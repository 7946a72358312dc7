//! Time–angle Gaussian process: design vector, kernel, kernel matrices and
//! conditional-Gaussian prediction.
//!
//! The covariance between `(t₁, z₁)` and `(t₂, z₂)` is
//! `exp(-σ⁴ (t₁ - t₂)²) · cos(|z₁ - z₂|)`, with mean `h(t, z)ᵀβ` where
//! `h(t, z) = (1, t, cos z, sin z)`.

use nalgebra::{DMatrix, DVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::circ::Angle;
use crate::error::{Error, Result};
use crate::linalg::{self, Chol};

/// A point of the linear–circular input space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAnglePoint {
    pub t: f64,
    pub z: Angle,
}

impl TimeAnglePoint {
    pub fn new(t: f64, z: Angle) -> Self {
        TimeAnglePoint { t, z }
    }
}

/// `h(t, z) = (1, t, cos z, sin z)`.
pub type DesignVector = Vector4<f64>;

#[inline]
pub fn design_vector(p: TimeAnglePoint) -> DesignVector {
    Vector4::new(1.0, p.t, p.z.cos(), p.z.sin())
}

#[inline]
pub fn kernel(p1: TimeAnglePoint, p2: TimeAnglePoint, sigma: f64) -> f64 {
    let dt = p1.t - p2.t;
    let s2 = sigma * sigma;
    (-(s2 * s2) * dt * dt).exp() * (p1.z.radians() - p2.z.radians()).abs().cos()
}

/// Mean and variance of a scalar Gaussian produced by GP conditioning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl ConditionalGaussian {
    /// Clamps variances that are negative by rounding only.
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let variance = if variance >= 0.0 {
            variance
        } else if variance > -1e-10 {
            0.0
        } else {
            return Err(Error::Singular(format!(
                "conditional variance {variance} is negative"
            )));
        };
        Ok(ConditionalGaussian { mean, variance })
    }
}

/// Kernel matrix `A`, design matrix `H` and the Cholesky factor of `A + jitter·I`
/// for a fixed set of points.
#[derive(Clone, Debug)]
pub struct KernelMatrices {
    points: Vec<TimeAnglePoint>,
    sigma: f64,
    a: DMatrix<f64>,
    h: DMatrix<f64>,
    chol: Chol,
    jitter: f64,
}

impl KernelMatrices {
    /// Builds the matrices; jitter starts at `jitter` and escalates ×10 up to
    /// `1e-6` if the factorization fails.
    pub fn build(points: &[TimeAnglePoint], sigma: f64, jitter: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("kernel scale must be positive, got {sigma}")));
        }
        let m = points.len();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = 1.0;
            for j in 0..i {
                let v = kernel(points[i], points[j], sigma);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let mut h = DMatrix::zeros(m, 4);
        for (i, p) in points.iter().enumerate() {
            h.set_row(i, &design_vector(*p).transpose());
        }
        let (chol, jitter) = linalg::cholesky_jittered(&a, jitter).ok_or_else(|| {
            let (i, j) = closest_pair(&a);
            Error::Singular(format!(
                "kernel matrix singular even with jitter 1e-6; near-duplicate points {i} ({:?}) and {j} ({:?})",
                points.get(i),
                points.get(j)
            ))
        })?;
        Ok(KernelMatrices {
            points: points.to_vec(),
            sigma,
            a,
            h,
            chol,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TimeAnglePoint] {
        &self.points
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Kernel matrix without jitter.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Kernel matrix with the jitter used for the factorization.
    pub fn a_jittered(&self) -> DMatrix<f64> {
        let mut a = self.a.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += self.jitter;
        }
        a
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn chol(&self) -> &Chol {
        &self.chol
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `s(target) = (c(target, pᵢ))ᵢ`.
    pub fn cross(&self, target: TimeAnglePoint) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.points.iter().map(|p| kernel(target, *p, self.sigma)),
        )
    }

    /// `(A + jitter·I)⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `A⁻¹ (values − Hβ)`.
    pub fn weights(&self, values: &DVector<f64>, beta: &DesignVector) -> DVector<f64> {
        self.solve(&(values - &self.h * beta))
    }

    /// Conditional of the value at `target` given precomputed [`weights`](Self::weights).
    pub fn predict(
        &self,
        target: TimeAnglePoint,
        weights: &DVector<f64>,
        beta: &DesignVector,
        sigma2_gp: f64,
    ) -> Result<ConditionalGaussian> {
        let prior_mean = design_vector(target).dot(beta);
        if self.is_empty() {
            return ConditionalGaussian::new(prior_mean, sigma2_gp);
        }
        let s = self.cross(target);
        let v = linalg::solve_lower(&self.chol, &s);
        ConditionalGaussian::new(prior_mean + s.dot(weights), sigma2_gp * (1.0 - v.norm_squared()))
    }

    /// `log N(values; mean, scale·(A + jitter·I))`.
    pub fn log_density(&self, values: &DVector<f64>, mean: &DVector<f64>, scale: f64) -> f64 {
        linalg::mvn_logpdf_centered(&(values - mean), &self.chol, scale)
    }
}

fn closest_pair(a: &DMatrix<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..a.nrows() {
        for j in 0..i {
            if a[(i, j)] > best_v {
                best_v = a[(i, j)];
                best = (j, i);
            }
        }
    }
    best
}

/// Conditional distribution at `target` of a GP with mean `hᵀβ` and
/// covariance `σ²_gp·c`, given its values at the points of `km`.
pub fn gp_conditional(
    target: TimeAnglePoint,
    km: &KernelMatrices,
    values: &DVector<f64>,
    beta: &DesignVector,
    sigma2_gp: f64,
) -> Result<ConditionalGaussian> {
    if values.len() != km.len() {
        return Err(Error::invalid(format!(
            "{} values for {} conditioning points",
            values.len(),
            km.len()
        )));
    }
    let w = km.weights(values, beta);
    km.predict(target, &w, beta, sigma2_gp)
}
