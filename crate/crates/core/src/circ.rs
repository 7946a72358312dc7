//! Circular-statistics primitives: mod-2π reduction, unit conversion, and the
//! von Mises and wrapped normal distributions.
//!
//! Angles are stored canonically in the half-open interval `[0, 2π)`. A
//! wrapped variable is always paired with the integer number of turns removed
//! from its linear counterpart: `x* = x + 2πk`, `k = ⌊x*/2π⌋`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of whole turns removed from a linear variable when it is wrapped.
pub type WrapCount = i64;

/// A direction in `[0, 2π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps a finite real into `[0, 2π)`.
    pub fn new(x: f64) -> Result<Self> {
        wrap(x)
    }

    /// Wraps without checking finiteness; NaN propagates.
    #[inline]
    pub(crate) fn wrapped(x: f64) -> Self {
        Angle(wrap_radians(x))
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn cos(self) -> f64 {
        self.0.cos()
    }

    #[inline]
    pub fn sin(self) -> f64 {
        self.0.sin()
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `x mod 2π` in `[0, 2π)`.
#[inline]
pub(crate) fn wrap_radians(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces `x` modulo 2π. Fails on non-finite input.
pub fn wrap(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("cannot wrap non-finite value {x}")));
    }
    Ok(Angle::wrapped(x))
}

/// Splits a linear value into its wrapped angle and turn count so that
/// `angle + 2π·count == x` (up to rounding).
#[inline]
pub fn split_turns(x: f64) -> (Angle, WrapCount) {
    let mut k = (x / TAU).floor();
    let mut a = x - TAU * k;
    if a >= TAU {
        a -= TAU;
        k += 1.0;
    } else if a < 0.0 {
        a += TAU;
        k -= 1.0;
    }
    if a >= TAU {
        a = 0.0;
    }
    (Angle(a), k as WrapCount)
}

/// Linear value reconstructed from an angle and its wrap count.
#[inline]
pub fn unwrap(angle: Angle, count: WrapCount) -> f64 {
    angle.0 + TAU * count as f64
}

/// Unit an input series is recorded in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Radians,
    Degrees,
    /// Hours on a 24-hour clock, `[0, 24)`.
    Clock24,
}

impl FromStr for AngleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "radians" | "rad" => Ok(AngleUnit::Radians),
            "degrees" | "deg" => Ok(AngleUnit::Degrees),
            "clock24" | "hours" => Ok(AngleUnit::Clock24),
            other => Err(Error::invalid(format!("unknown angle unit `{other}`"))),
        }
    }
}

impl fmt::Display for AngleUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleUnit::Radians => "radians",
            AngleUnit::Degrees => "degrees",
            AngleUnit::Clock24 => "clock24",
        })
    }
}

/// Converts a value in the given unit to a canonical angle.
pub fn convert(value: f64, unit: AngleUnit) -> Result<Angle> {
    let radians = match unit {
        AngleUnit::Radians => value,
        AngleUnit::Degrees => value.to_radians(),
        AngleUnit::Clock24 => {
            if !(0.0..24.0).contains(&value) {
                return Err(Error::invalid(format!(
                    "clock time {value} outside [0, 24)"
                )));
            }
            value * TAU / 24.0
        }
    };
    wrap(radians)
}

/// Inverse of [`convert`]: expresses an angle in the given unit.
pub fn to_unit(angle: Angle, unit: AngleUnit) -> f64 {
    match unit {
        AngleUnit::Radians => angle.0,
        AngleUnit::Degrees => angle.0.to_degrees(),
        AngleUnit::Clock24 => angle.0 * 24.0 / TAU,
    }
}

const BESSEL_SERIES_LIMIT: f64 = 15.0;

fn bessel_series(x: f64, order: u32) -> f64 {
    // I_ν(x) = (x/2)^ν Σ_k (x²/4)^k / (k! (k+ν)!)
    let q = 0.25 * x * x;
    let mut term = match order {
        0 => 1.0,
        _ => 0.5 * x,
    };
    let mut sum = term;
    for k in 1..200 {
        let k = k as f64;
        term *= q / (k * (k + order as f64));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Σ (-1)^k a_k(ν) / x^k, the bracket of the large-argument expansion
/// I_ν(x) ≈ e^x / √(2πx) · (...).
fn bessel_asymptotic_bracket(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind, order 0.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < BESSEL_SERIES_LIMIT {
        bessel_series(x, 0)
    } else {
        x.exp() / (TAU * x).sqrt() * bessel_asymptotic_bracket(x, 0)
    }
}

/// Modified Bessel function of the first kind, order 1.
pub fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < BESSEL_SERIES_LIMIT {
        bessel_series(ax, 1)
    } else {
        ax.exp() / (TAU * ax).sqrt() * bessel_asymptotic_bracket(ax, 1)
    };
    v.copysign(x)
}

/// `ln I₀(x)`, finite for arguments where `I₀` itself overflows.
pub fn log_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < BESSEL_SERIES_LIMIT {
        bessel_series(x, 0).ln()
    } else {
        x - 0.5 * (TAU * x).ln() + bessel_asymptotic_bracket(x, 0).ln()
    }
}

/// Mean resultant length `I₁(κ)/I₀(κ)` of a von Mises distribution.
pub fn bessel_ratio_i1_i0(kappa: f64) -> f64 {
    if kappa < BESSEL_SERIES_LIMIT {
        bessel_series(kappa, 1) / bessel_series(kappa, 0)
    } else {
        bessel_asymptotic_bracket(kappa, 1) / bessel_asymptotic_bracket(kappa, 0)
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "von Mises concentration must be positive, got {kappa}"
        )))
    }
}

fn check_variance(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "variance must be positive, got {sigma2}"
        )))
    }
}

/// Log density of the von Mises distribution with mean `mu` and concentration `kappa`.
pub fn von_mises_logpdf(theta: Angle, mu: Angle, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(kappa * (theta.0 - mu.0).cos() - (TAU.ln() + log_bessel_i0(kappa)))
}

/// Draws from the von Mises distribution by the Best–Fisher rejection method.
pub fn von_mises_sample<R: Rng + ?Sized>(rng: &mut R, mu: Angle, kappa: f64) -> Result<Angle> {
    check_kappa(kappa)?;
    Ok(von_mises_draw(rng, mu.0, kappa))
}

pub(crate) fn von_mises_draw<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> Angle {
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let dev = f.clamp(-1.0, 1.0).acos();
            let theta = if u3 > 0.5 { mu + dev } else { mu - dev };
            return Angle::wrapped(theta);
        }
    }
}

/// Number of wrap terms kept on each side of the central one.
pub(crate) fn wrap_terms(sigma: f64) -> i64 {
    (((8.0 * sigma) / TAU).ceil() as i64 + 2).max(3)
}

/// Log density of the wrapped normal `N(mu, sigma2) mod 2π` at `theta`.
pub fn wrapped_normal_logpdf(theta: Angle, mu: f64, sigma2: f64) -> Result<f64> {
    check_variance(sigma2)?;
    if !mu.is_finite() {
        return Err(Error::invalid(format!("non-finite mean {mu}")));
    }
    Ok(wrapped_normal_logpdf_unchecked(theta.0, mu, sigma2))
}

pub(crate) fn wrapped_normal_logpdf_unchecked(theta: f64, mu: f64, sigma2: f64) -> f64 {
    let d = theta - mu;
    let d = d - TAU * (d / TAU).round();
    let sigma = sigma2.sqrt();
    let kmax = wrap_terms(sigma);
    // The k = 0 term is the largest since |d| ≤ π.
    let lead = -d * d / (2.0 * sigma2);
    let mut acc = 0.0;
    for k in -kmax..=kmax {
        let e = d + TAU * k as f64;
        acc += (-e * e / (2.0 * sigma2) - lead).exp();
    }
    lead + acc.ln() - 0.5 * (TAU * sigma2).ln()
}

/// Draws `x* ~ N(mu, sigma2)` and returns `(x* mod 2π, ⌊x*/2π⌋)`.
pub fn wrapped_normal_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma2: f64,
) -> Result<(Angle, WrapCount)> {
    check_variance(sigma2)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(split_turns(mu + sigma2.sqrt() * z))
}

/// Log density of `N(mean, var)` at `x`.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (TAU * var).ln() - d * d / (2.0 * var)
}
