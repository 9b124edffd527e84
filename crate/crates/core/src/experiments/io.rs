//! CSV schemas for learning curves and sweeps. Each file starts with a
//! `# fingerprint=<hex>` comment line identifying the configuration.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::monte_carlo::MsdCurve;
use super::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Sim,
    Theory,
}

/// One row of `curves.csv`: `iteration,algorithm,msd_db,source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub algorithm: String,
    pub msd_db: f64,
    pub source: Source,
}

pub fn curve_rows(curve: &MsdCurve) -> impl Iterator<Item = CurveRow> + '_ {
    curve.msd_db.iter().enumerate().map(|(n, v)| CurveRow {
        iteration: n,
        algorithm: curve.algorithm.clone(),
        msd_db: *v,
        source: Source::Sim,
    })
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

fn write_rows<W: Write, T: Serialize>(mut out: W, fingerprint: &str, rows: &[T]) -> Result<()> {
    writeln!(out, "# fingerprint={fingerprint}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<(String, Vec<T>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err)?;
    let fingerprint = first
        .trim_end()
        .strip_prefix("# fingerprint=")
        .ok_or_else(|| io_err("missing fingerprint header"))?
        .to_string();
    let mut rdr = csv::Reader::from_reader(reader);
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(io_err)?;
    Ok((fingerprint, rows))
}

pub fn write_curves_csv<W: Write>(out: W, fingerprint: &str, rows: &[CurveRow]) -> Result<()> {
    write_rows(out, fingerprint, rows)
}

pub fn read_curves_csv<R: Read>(input: R) -> Result<(String, Vec<CurveRow>)> {
    read_rows(input)
}

pub fn write_sweep_csv<W: Write>(out: W, fingerprint: &str, rows: &[SweepRow]) -> Result<()> {
    write_rows(out, fingerprint, rows)
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<(String, Vec<SweepRow>)> {
    read_rows(input)
}
