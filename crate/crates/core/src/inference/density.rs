use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::samples::{x_name, PosteriorSamples};
use crate::circ::Angle;
use crate::error::{Error, Result};

/// Per-time histogram of angle draws over equal bins of `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub times: Vec<usize>,
    pub bins: usize,
    /// `density[i][b]` is the fraction of draws at `times[i]` in bin `b`.
    pub density: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let w = TAU / self.bins as f64;
        (b as f64 * w, (b + 1) as f64 * w)
    }

    /// Long-form CSV: `time,bin_lo,bin_hi,density`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "bin_lo", "bin_hi", "density"])?;
        for (t, row) in self.times.iter().zip(&self.density) {
            for (b, d) in row.iter().enumerate() {
                let (lo, hi) = self.bin_edges(b);
                out.write_record(&[t.to_string(), lo.to_string(), hi.to_string(), d.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn density_grid(columns: &[(usize, Vec<Angle>)], bins: usize) -> Result<DensityGrid> {
    if columns.is_empty() {
        return Err(Error::invalid("density grid needs at least one time point"));
    }
    if bins == 0 {
        return Err(Error::invalid("density grid needs at least one bin"));
    }
    let w = TAU / bins as f64;
    let mut density = Vec::with_capacity(columns.len());
    for (t, draws) in columns {
        if draws.is_empty() {
            return Err(Error::invalid(format!("no draws at time {t}")));
        }
        let mut row = vec![0.0; bins];
        for a in draws {
            row[((a.radians() / w) as usize).min(bins - 1)] += 1.0;
        }
        let n = draws.len() as f64;
        row.iter_mut().for_each(|v| *v /= n);
        density.push(row);
    }
    Ok(DensityGrid {
        times: columns.iter().map(|(t, _)| *t).collect(),
        bins,
        density,
    })
}

/// Density grid of the latent states `x_1..x_last` recorded in `samples`.
pub fn latent_density_grid(samples: &PosteriorSamples, last: usize, bins: usize) -> Result<DensityGrid> {
    let cols = (1..=last)
        .map(|t| Ok((t, samples.angle_column(&x_name(t))?)))
        .collect::<Result<Vec<_>>>()?;
    density_grid(&cols, bins)
}
