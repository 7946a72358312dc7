use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circ::{convert, to_unit, Angle, AngleUnit};
use crate::error::{Error, Result};

/// An observed circular series at times `1..T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularSeries {
    pub values: Vec<Angle>,
    pub unit_of_origin: AngleUnit,
    pub label: String,
}

impl CircularSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn sniff_delimiter(path: &Path) -> Result<u8> {
    let mut first = String::new();
    BufReader::new(Error::open(path)?).read_line(&mut first)?;
    Ok(if first.contains('\t') && !first.contains(',') {
        b'\t'
    } else {
        b','
    })
}

/// Reads column `column` of a comma- or tab-delimited table with a header
/// row. Row order is time order. Values are converted from `unit`.
pub fn read_series(path: &Path, unit: AngleUnit, column: &str) -> Result<CircularSeries> {
    let delim = sniff_delimiter(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delim)
        .trim(csv::Trim::All)
        .from_reader(Error::open(path)?);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_owned(),
            column: column.to_owned(),
        })?;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let cell = rec.get(idx).ok_or_else(|| Error::BadCell {
            path: path.to_owned(),
            row,
            message: "row is too short".into(),
        })?;
        let bad = |message: String| Error::BadCell {
            path: path.to_owned(),
            row,
            message,
        };
        let v: f64 = cell
            .parse()
            .map_err(|_| bad(format!("cannot parse `{cell}` as a number")))?;
        values.push(convert(v, unit).map_err(|e| bad(e.to_string()))?);
    }
    if values.is_empty() {
        return Err(Error::EmptyFile(path.to_owned()));
    }
    Ok(CircularSeries {
        values,
        unit_of_origin: unit,
        label: column.to_owned(),
    })
}

/// Writes `t,<column>` rows with `t = first_time, first_time+1, ...`.
pub fn write_series<W: Write>(w: W, column: &str, values: &[Angle], unit: AngleUnit, first_time: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", column])?;
    for (i, a) in values.iter().enumerate() {
        out.write_record(&[(first_time + i).to_string(), to_unit(*a, unit).to_string()])?;
    }
    out.flush()?;
    Ok(())
}
