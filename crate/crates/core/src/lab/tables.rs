use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A table row with a fixed column order.
pub trait Row: Serialize + DeserializeOwned {
    const COLUMNS: &'static [&'static str];
}

/// One `n` of the scaling-limit experiment: binomial price with costs `kappa / n` against the HJB value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub kappa_over_n: f64,
    pub dual_value: f64,
    pub payoff_part: f64,
    pub cost_part: f64,
    pub hjb_value: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub runtime_ms: u64,
}

impl Row for ConvergenceRow {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "kappa_over_n",
        "dual_value",
        "payoff_part",
        "cost_part",
        "hjb_value",
        "abs_gap",
        "rel_gap",
        "runtime_ms",
    ];
}

/// Binomial price at fixed cost against the buy-and-hold bound (empty when infinite).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub kappa: f64,
    pub dual_value: f64,
    pub crr_price: f64,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub runtime_ms: u64,
}

impl Row for SweepRow {
    const COLUMNS: &'static [&'static str] = &[
        "n",
        "kappa",
        "dual_value",
        "crr_price",
        "bound",
        "ratio",
        "runtime_ms",
    ];
}

/// Optimal multiplier `m` at time `t` and log price `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyFieldRow {
    pub t: f64,
    pub x: f64,
    pub m: u16,
}

impl Row for PolicyFieldRow {
    const COLUMNS: &'static [&'static str] = &["t", "x", "m"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Write rows as CSV with a header line, or as a JSON array.
pub fn emit_report<R: Row>(rows: &[R], format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => {
            let csv_err = |source| Error::Csv {
                path: path.to_path_buf(),
                source,
            };
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(create(path)?);
            w.write_record(R::COLUMNS).map_err(csv_err)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush().map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })
        }
        Format::Json => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, rows)?;
            w.write_all(b"\n")
                .and_then(|_| w.flush())
                .map_err(|source| Error::Io {
                    path: path.to_path_buf(),
                    source,
                })
        }
    }
}

/// Read back a table written by [`emit_report`].
pub fn read_report<R: Row>(format: Format, path: &Path) -> Result<Vec<R>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(open(path)?);
            let header = r.headers().map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            if header.iter().ne(R::COLUMNS.iter().copied()) {
                return Err(Error::input(format!(
                    "{}: unexpected columns {:?}",
                    path.display(),
                    header
                )));
            }
            r.deserialize()
                .collect::<std::result::Result<Vec<R>, _>>()
                .map_err(|source| Error::Csv {
                    path: path.to_path_buf(),
                    source,
                })
        }
        Format::Json => Ok(serde_json::from_reader(open(path)?)?),
    }
}

/// Partition times from the last column of a CSV; a non-numeric first line is a header.
pub fn read_partition_times(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(open(path)?);
    let mut times = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let Some(cell) = rec.iter().next_back() else {
            continue;
        };
        match cell.trim().parse::<f64>() {
            Ok(t) => times.push(t),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::input(format!(
                    "{} line {}: '{cell}' is not a time",
                    path.display(),
                    i + 1
                )));
            }
        }
    }
    Ok(times)
}
