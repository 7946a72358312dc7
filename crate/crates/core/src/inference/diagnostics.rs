//! Effective sample size and Geweke convergence z-scores.

use serde::{Deserialize, Serialize};

use super::samples::{is_angle_column, PosteriorSamples};
use crate::error::{Error, Result};

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, v)
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
/// `None` for constant or too-short input.
pub fn effective_sample_size(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 4 {
        return None;
    }
    let (m, v) = mean_var(x);
    if !(v > 0.0) || !v.is_finite() {
        return None;
    }
    let d: Vec<f64> = x.iter().map(|a| a - m).collect();
    let acf = |lag: usize| -> f64 {
        d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * v)
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        tau += 2.0 * pair;
        lag += 2;
    }
    Some(n as f64 / tau.max(1.0 / n as f64))
}

/// Geweke z comparing the first `first` and last `last` fractions.
pub fn geweke_z(x: &[f64], first: f64, last: f64) -> Option<f64> {
    let n = x.len();
    let na = ((n as f64) * first).floor() as usize;
    let nb = ((n as f64) * last).floor() as usize;
    if na < 4 || nb < 4 {
        return None;
    }
    let a = &x[..na];
    let b = &x[n - nb..];
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let se2 = effective_sample_size(a).map_or(0.0, |e| va / e) + effective_sample_size(b).map_or(0.0, |e| vb / e);
    if se2 > 0.0 {
        Some((ma - mb) / se2.sqrt())
    } else if ma == mb {
        Some(0.0)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDiagnostics {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ess: Option<f64>,
    pub geweke_z: Option<f64>,
    /// Set when the column is constant, so ESS is undefined.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub draws: usize,
    pub columns: Vec<ColumnDiagnostics>,
}

fn diagnose_column(name: String, x: &[f64]) -> ColumnDiagnostics {
    let (mean, var) = mean_var(x);
    let ess = effective_sample_size(x);
    ColumnDiagnostics {
        name,
        n: x.len(),
        mean,
        sd: var.sqrt(),
        ess,
        geweke_z: geweke_z(x, 0.1, 0.5),
        degenerate: ess.is_none(),
    }
}

/// Per-column diagnostics; angle columns are reported as `name.cos` and `name.sin`.
pub fn diagnostics(samples: &PosteriorSamples) -> Result<DiagnosticsReport> {
    if samples.names().len() < 2 {
        return Err(Error::invalid("diagnostics need at least two tracked columns"));
    }
    if samples.is_empty() {
        return Err(Error::invalid("diagnostics need at least one draw"));
    }
    let mut columns = Vec::new();
    for name in samples.names() {
        let x = samples.require(name)?;
        if is_angle_column(name) {
            let c: Vec<f64> = x.iter().map(|v| v.cos()).collect();
            let s: Vec<f64> = x.iter().map(|v| v.sin()).collect();
            columns.push(diagnose_column(format!("{name}.cos"), &c));
            columns.push(diagnose_column(format!("{name}.sin"), &s));
        } else {
            columns.push(diagnose_column(name.clone(), x));
        }
    }
    Ok(DiagnosticsReport {
        draws: samples.len(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn iid_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let r = effective_sample_size(&x).unwrap() / 1e4;
        assert!((0.8..=1.2).contains(&r), "{r}");
        assert!(geweke_z(&x, 0.1, 0.5).unwrap().abs() < 4.0);
    }

    #[test]
    fn ar1_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho: f64 = 0.9;
        let mut v = 0.0;
        let x: Vec<f64> = (0..100_000)
            .map(|_| {
                v = rho * v + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
                v
            })
            .collect();
        let r = effective_sample_size(&x).unwrap() / x.len() as f64;
        let target = (1.0 - rho) / (1.0 + rho);
        assert!((r / target - 1.0).abs() < 0.5, "{r} vs {target}");
    }

    #[test]
    fn constant_column_is_degenerate() {
        let mut s = PosteriorSamples::new(vec!["a".into(), "x_1".into()]);
        for i in 0..50 {
            s.push_row(&[2.0, 0.01 * i as f64]).unwrap();
        }
        let rep = diagnostics(&s).unwrap();
        assert_eq!(rep.columns.len(), 3);
        assert!(rep.columns[0].degenerate);
        assert!(rep.columns[0].ess.is_none());
        assert!(!rep.columns[1].degenerate);
        let one = PosteriorSamples::new(vec!["a".into()]);
        assert!(diagnostics(&one).is_err());
    }
}
