//! Result emission: CSV rows, JSON documents, and occupancy triplet files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use afdm::config::SimConfig;
use afdm::sim::TrialRecord;
use anyhow::{Context, Result};

pub const CSV_HEADER: &str =
    "esn0_db,frames,bit_errors,ber,mean_cm,mean_iter_soft,mean_iter_hard,wall_time_s,seed,scheme,beta_or_alpha";

/// Wall-clock reporting mode: `Zero` keeps output byte-reproducible for
/// identical seed/config, `Real` records measured times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Zero,
    Real,
}

impl std::str::FromStr for Timing {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Timing::Zero),
            "real" => Ok(Timing::Real),
            other => anyhow::bail!("timing must be 'zero' or 'real', got '{other}'"),
        }
    }
}

pub fn csv_line(rec: &TrialRecord, scheme: &str, band: usize, timing: Timing) -> String {
    let wall = match timing {
        Timing::Zero => 0.0,
        Timing::Real => rec.wall_time_s,
    };
    let mut line = String::new();
    write!(
        line,
        "{},{},{},{},{},{},{},{},{},{},{}",
        rec.esn0_db,
        rec.frames,
        rec.bit_errors,
        rec.ber,
        rec.mean_cm,
        rec.mean_iter_soft,
        rec.mean_iter_hard,
        wall,
        rec.seed,
        scheme,
        band
    )
    .expect("write to string");
    line
}

/// Parse one CSV row back into a record (inverse of [`csv_line`]).
#[cfg(test)]
pub fn parse_csv_line(line: &str) -> Result<(TrialRecord, String, usize)> {
    let fields: Vec<&str> = line.split(',').collect();
    anyhow::ensure!(fields.len() == 11, "expected 11 CSV fields, got {}", fields.len());
    let rec = TrialRecord {
        esn0_db: fields[0].parse()?,
        frames: fields[1].parse()?,
        bit_errors: fields[2].parse()?,
        ber: fields[3].parse()?,
        mean_cm: fields[4].parse()?,
        mean_iter_soft: fields[5].parse()?,
        mean_iter_hard: fields[6].parse()?,
        wall_time_s: fields[7].parse()?,
        seed: fields[8].parse()?,
    };
    Ok((rec, fields[9].to_string(), fields[10].parse()?))
}

/// Incremental CSV writer: header first, one line per completed point.
pub struct CsvSink<W: Write> {
    out: W,
    timing: Timing,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, timing: Timing) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out, timing })
    }

    pub fn emit(&mut self, rec: &TrialRecord, scheme: &str, band: usize) -> Result<()> {
        writeln!(self.out, "{}", csv_line(rec, scheme, band, self.timing))?;
        self.out.flush()?;
        Ok(())
    }
}

/// JSON document: the records plus the fully resolved config.
pub fn write_json(
    path: &Path,
    cfg: &SimConfig,
    records: &[TrialRecord],
    timing: Timing,
) -> Result<()> {
    let records: Vec<TrialRecord> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if timing == Timing::Zero {
                r.wall_time_s = 0.0;
            }
            r
        })
        .collect();
    let doc = serde_json::json!({
        "config": cfg,
        "scheme": cfg.equalizer.scheme.as_str(),
        "records": records,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Sparse occupancy triplets, one `row,col,magnitude_db` line each.
pub fn write_occupancy(path: &Path, triplets: &[(usize, usize, f64)]) -> Result<()> {
    let mut out = String::from("row,col,magnitude_db\n");
    for &(i, j, db) in triplets {
        writeln!(out, "{i},{j},{db}").expect("write to string");
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
