//! Range-pulse complex data cubes: storage, the two on-disk encodings and a
//! synthetic generator matching the homogeneous scene model.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! u64 pulses | u64 bins | pulses × bins × (f64 re, f64 im), pulse-major
//! ```
//!
//! CSV layout: one line per pulse, `re,im` per range bin, `#` starts a
//! comment line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::config::CubeFormat;
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::rng::{self, Stream};
use crate::scenario::ScenarioConfig;

const HEADER_BYTES: usize = 16;
const SAMPLE_BYTES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct DataCube {
    pulses: usize,
    bins: usize,
    /// Pulse-major: `data[pulse * bins + bin]`.
    data: Vec<Complex64>,
    pub label: String,
}

impl DataCube {
    pub fn new(
        pulses: usize,
        bins: usize,
        data: Vec<Complex64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let expected = pulses
            .checked_mul(bins)
            .ok_or_else(|| Error::Format(format!("cube dimensions {pulses}x{bins} overflow")))?;
        if data.len() != expected {
            return Err(Error::Format(format!(
                "{pulses}x{bins} cube needs {expected} samples, got {}",
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|x| !(x.re.is_finite() && x.im.is_finite()))
        {
            return Err(Error::Format(format!(
                "non-finite sample at pulse {}, bin {}",
                i / bins,
                i % bins
            )));
        }
        Ok(DataCube {
            pulses,
            bins,
            data,
            label: label.into(),
        })
    }

    pub fn zeros(pulses: usize, bins: usize) -> Self {
        DataCube {
            pulses,
            bins,
            data: vec![Complex64::new(0.0, 0.0); pulses * bins],
            label: String::new(),
        }
    }

    pub fn pulses(&self) -> usize {
        self.pulses
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, pulse: usize, bin: usize) -> Complex64 {
        self.data[pulse * self.bins + bin]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Pulses `start..start + n` of one range bin.
    pub fn snapshot(&self, bin: usize, start: usize, n: usize) -> ComplexVector {
        (start..start + n).map(|p| self.get(p, bin)).collect()
    }
}

fn label_of(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn write_binary<W: Write>(cube: &DataCube, mut out: W) -> Result<()> {
    out.write_all(&(cube.pulses as u64).to_le_bytes())?;
    out.write_all(&(cube.bins as u64).to_le_bytes())?;
    for x in &cube.data {
        out.write_all(&x.re.to_le_bytes())?;
        out.write_all(&x.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R, label: impl Into<String>) -> Result<DataCube> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let (pulses, bins) = (word(0), word(1));
    let payload = &bytes[HEADER_BYTES..];
    let expected = pulses
        .checked_mul(bins)
        .and_then(|c| c.checked_mul(SAMPLE_BYTES as u64));
    if expected != Some(payload.len() as u64) {
        return Err(Error::Format(format!(
            "header declares {pulses}x{bins} samples but payload has {} bytes",
            payload.len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let data = payload
        .chunks_exact(SAMPLE_BYTES)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    DataCube::new(pulses as usize, bins as usize, data, label)
}

pub fn write_csv<W: Write>(cube: &DataCube, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for p in 0..cube.pulses {
        let row = &cube.data[p * cube.bins..(p + 1) * cube.bins];
        let fields: Vec<String> = row
            .iter()
            .flat_map(|x| [format!("{}", x.re), format!("{}", x.im)])
            .collect();
        w.write_record(&fields)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, label: impl Into<String>) -> Result<DataCube> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input);
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut pulses = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() % 2 != 0 {
            return Err(Error::Format(format!("line {line}: odd number of fields")));
        }
        match width {
            None => width = Some(rec.len() / 2),
            Some(w) if w != rec.len() / 2 => {
                return Err(Error::Format(format!(
                    "line {line}: {} bins, expected {w}",
                    rec.len() / 2
                )))
            }
            Some(_) => {}
        }
        let values = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {line}: not a number: `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        data.extend(values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        pulses += 1;
    }
    DataCube::new(pulses, width.unwrap_or(0), data, label)
}

pub fn ingest_cube(path: &Path, format: CubeFormat) -> Result<DataCube> {
    let file = BufReader::new(File::open(path)?);
    match format {
        CubeFormat::InterleavedBinary => read_binary(file, label_of(path)),
        CubeFormat::Csv => read_csv(file, label_of(path)),
    }
}

pub fn write_cube(cube: &DataCube, path: &Path, format: CubeFormat) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        CubeFormat::InterleavedBinary => write_binary(cube, file),
        CubeFormat::Csv => write_csv(cube, file),
    }
}

/// Homogeneous cube: every range bin carries an independent stationary
/// AR(1) clutter sequence in slow time (power `σ_c²`, lag-one correlation
/// `ρ`) plus white noise of power `σ²`. Any `N` consecutive pulses of a bin
/// are therefore `CN(0, M)` with the scenario's covariance.
pub fn synthetic_cube(cfg: &ScenarioConfig, pulses: usize, bins: usize) -> Result<DataCube> {
    cfg.validate()?;
    let clutter = cfg.clutter_power().sqrt();
    let noise = cfg.noise_power.sqrt();
    let innovation = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); pulses * bins];
    for bin in 0..bins {
        let mut rng = rng::substream(cfg.master_seed, Stream::Cube, bin as u64, 0);
        let mut c = rng::complex_normal(&mut rng);
        for p in 0..pulses {
            if p > 0 {
                c = cfg.rho * c + innovation * rng::complex_normal(&mut rng);
            }
            data[p * bins + bin] = clutter * c + noise * rng::complex_normal(&mut rng);
        }
    }
    DataCube::new(
        pulses,
        bins,
        data,
        format!("synthetic seed {}", cfg.master_seed),
    )
}
