//! Named columns of retained posterior draws.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::circ::Angle;
use crate::error::{Error, Result};

pub fn x_name(t: usize) -> String {
    format!("x_{t}")
}
pub fn k_name(t: usize) -> String {
    format!("K_{t}")
}
pub fn n_name(t: usize) -> String {
    format!("N_{t}")
}
pub fn fstar_name(t: usize) -> String {
    format!("fstar_{t}")
}
pub fn beta_f_name(i: usize) -> String {
    format!("beta_f_{i}")
}
pub fn beta_g_name(i: usize) -> String {
    format!("beta_g_{i}")
}
pub fn dz_name(i: usize) -> String {
    format!("Dz_{i}")
}
pub const X0: &str = "x_0";
pub const FSTAR_NEXT: &str = "fstar_T1";
pub const GSTAR: &str = "gstar";
pub const SIGMA_F: &str = "sigma_f";
pub const SIGMA_EPS: &str = "sigma_eps";
pub const SIGMA_G: &str = "sigma_g";
pub const SIGMA_ETA: &str = "sigma_eta";

/// Columns holding angles (diagnosed through their cosine and sine).
pub fn is_angle_column(name: &str) -> bool {
    name.strip_prefix("x_")
        .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub config_digest: String,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
}

/// Equal-length columns of draws, one row per retained iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PosteriorSamples {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub meta: SampleMeta,
}

impl PosteriorSamples {
    pub fn new(names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        PosteriorSamples {
            names,
            columns,
            meta: SampleMeta::default(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::invalid(format!(
                "row has {} values for {} columns",
                row.len(),
                self.names.len()
            )));
        }
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
        Ok(())
    }

    /// Adds a full column; its length must match the existing rows.
    pub fn add_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if !self.names.is_empty() && values.len() != self.len() {
            return Err(Error::invalid(format!(
                "column {name} has {} values, expected {}",
                values.len(),
                self.len()
            )));
        }
        if self.column(&name).is_some() {
            return Err(Error::invalid(format!("duplicate column {name}")));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::invalid(format!("samples have no column `{name}`")))
    }

    pub fn angle_column(&self, name: &str) -> Result<Vec<Angle>> {
        self.require(name)?.iter().map(|&v| Angle::new(v)).collect()
    }

    /// Appends the rows of `other`, which must have the same columns.
    pub fn append(&mut self, other: &PosteriorSamples) -> Result<()> {
        if self.names != other.names {
            return Err(Error::invalid("cannot merge samples with different columns"));
        }
        for (c, o) in self.columns.iter_mut().zip(&other.columns) {
            c.extend_from_slice(o);
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names)?;
        let mut row = Vec::with_capacity(self.names.len());
        for r in 0..self.len() {
            row.clear();
            row.extend(self.columns.iter().map(|c| c[r].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut s = PosteriorSamples::new(names);
        let mut row = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            row.clear();
            for cell in rec.iter() {
                row.push(cell.trim().parse::<f64>().map_err(|e| {
                    Error::invalid(format!("sample row {}: `{cell}`: {e}", i + 1))
                })?);
            }
            s.push_row(&row)?;
        }
        Ok(s)
    }
}
