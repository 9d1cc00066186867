//! CSV emission of curve, threshold and convergence data.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! reading a file back reproduces the written `f64` values bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::detectors::DetectorId;
use crate::error::{Error, Result};
use crate::harness::{ConvergenceResult, CurveResult, RateEstimate, ThresholdTable};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Header: axis columns, then `<id>_rate,<id>_ci` per detector.
pub fn write_curve<W: Write>(result: &CurveResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = result.axis_names.clone();
    for d in &result.detectors {
        header.push(format!("{d}_rate"));
        header.push(format!("{d}_ci"));
    }
    w.write_record(&header).map_err(csv_error)?;
    for (point, row) in result.points.iter().zip(&result.estimates) {
        let mut record: Vec<String> = point.iter().map(|&x| fmt(x)).collect();
        for est in row {
            record.push(fmt(est.rate));
            record.push(fmt(est.ci));
        }
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_curve(result: &CurveResult, path: &Path) -> Result<()> {
    write_curve(result, BufWriter::new(File::create(path)?))
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: `{field}`"),
    })
}

/// Reads a curve written by [`write_curve`]. Trial counts are not part of
/// the file, so every estimate is tagged with `trials`.
pub fn read_curve<R: Read>(input: R, trials: usize) -> Result<CurveResult> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_owned)
        .collect();
    let axes = header
        .iter()
        .take_while(|h| !h.ends_with("_rate") && !h.ends_with("_ci"))
        .count();
    let tail = &header[axes..];
    if !tail.len().is_multiple_of(2) {
        return Err(Error::Parse {
            line: 1,
            message: "unpaired rate/ci columns".into(),
        });
    }
    let mut detectors = Vec::new();
    for pair in tail.chunks(2) {
        let id = pair[0]
            .strip_suffix("_rate")
            .filter(|id| pair[1].strip_suffix("_ci") == Some(id))
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected <id>_rate,<id>_ci, found {},{}", pair[0], pair[1]),
            })?;
        detectors.push(id.parse::<DetectorId>()?);
    }
    let mut points = Vec::new();
    let mut estimates = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = i + 2;
        let values = rec
            .iter()
            .map(|f| parse_f64(f, line))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: "wrong field count".into(),
            });
        }
        points.push(values[..axes].to_vec());
        estimates.push(
            values[axes..]
                .chunks(2)
                .map(|p| RateEstimate {
                    rate: p[0],
                    ci: p[1],
                    trials,
                })
                .collect(),
        );
    }
    Ok(CurveResult {
        axis_names: header[..axes].to_vec(),
        points,
        detectors,
        estimates,
    })
}

pub fn read_curve_file(path: &Path, trials: usize) -> Result<CurveResult> {
    read_curve(File::open(path)?, trials)
}

/// Long format: `detector,pfa,threshold`.
pub fn write_thresholds<W: Write>(table: &ThresholdTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["detector", "pfa", "threshold"])
        .map_err(csv_error)?;
    for (d, row) in &table.entries {
        for &(pfa, eta) in row {
            w.write_record([d.to_string(), fmt(pfa), fmt(eta)])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format: `scnr_db,iteration,mean_delta_l`; H0 rows carry `-inf`.
pub fn write_convergence<W: Write>(results: &[ConvergenceResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scnr_db", "iteration", "mean_delta_l"])
        .map_err(csv_error)?;
    for res in results {
        let scnr = fmt(res.scnr_db.unwrap_or(f64::NEG_INFINITY));
        for (l, dl) in res.mean_delta_l.iter().enumerate() {
            w.write_record([scnr.clone(), (l + 1).to_string(), fmt(*dl)])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}
