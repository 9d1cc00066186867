//! Classical adaptive detectors and the clairvoyant benchmark.
//!
//! Every statistic is oriented so that "statistic > threshold" decides H1.
//! The adaptive ones depend on the data only through three whitened
//! products against the secondary-data scatter matrix `S`:
//! `a = v†S⁻¹z`, `b = v†S⁻¹v`, `c = z†S⁻¹z`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, HermitianMatrix};
use crate::scenario::DataBatch;

/// Detector identity. Ordering is the canonical output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorId {
    Glrt,
    Amf,
    Rao,
    Ace,
    Benchmark,
    EmBml { l_max: u32 },
}

impl DetectorId {
    pub fn kind(self) -> DetectorKind {
        match self {
            DetectorId::Glrt => DetectorKind::Glrt,
            DetectorId::Amf => DetectorKind::Amf,
            DetectorId::Rao => DetectorKind::Rao,
            DetectorId::Ace => DetectorKind::Ace,
            DetectorId::Benchmark => DetectorKind::Benchmark,
            DetectorId::EmBml { .. } => DetectorKind::EmBmlD,
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorId::EmBml { l_max } => write!(f, "EM_BML_D{l_max}"),
            other => write!(f, "{}", other.kind()),
        }
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        if let Some(rest) = up.strip_prefix("EM_BML_D") {
            let l_max = rest.parse().map_err(|_| {
                Error::validation(
                    "detector",
                    format!("`{s}` needs an iteration count, e.g. EM_BML_D5"),
                )
            })?;
            return Ok(DetectorId::EmBml { l_max });
        }
        match up.parse::<DetectorKind>()? {
            DetectorKind::Glrt => Ok(DetectorId::Glrt),
            DetectorKind::Amf => Ok(DetectorId::Amf),
            DetectorKind::Rao => Ok(DetectorId::Rao),
            DetectorKind::Ace => Ok(DetectorId::Ace),
            DetectorKind::Benchmark => Ok(DetectorId::Benchmark),
            DetectorKind::EmBmlD => unreachable!("prefix handled above"),
        }
    }
}

/// Detector family as named in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "GLRT")]
    Glrt,
    #[serde(rename = "AMF")]
    Amf,
    #[serde(rename = "RAO")]
    Rao,
    #[serde(rename = "ACE")]
    Ace,
    #[serde(rename = "BENCHMARK")]
    Benchmark,
    #[serde(rename = "EM_BML_D")]
    EmBmlD,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Glrt,
        DetectorKind::Amf,
        DetectorKind::Rao,
        DetectorKind::Ace,
        DetectorKind::Benchmark,
        DetectorKind::EmBmlD,
    ];
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Glrt => "GLRT",
            DetectorKind::Amf => "AMF",
            DetectorKind::Rao => "RAO",
            DetectorKind::Ace => "ACE",
            DetectorKind::Benchmark => "BENCHMARK",
            DetectorKind::EmBmlD => "EM_BML_D",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.to_string() == up)
            .ok_or_else(|| Error::validation("detector", format!("unknown detector `{s}`")))
    }
}

/// Expands detector families into concrete detectors, one EM variant per
/// iteration count, in canonical order.
pub fn expand_detectors(kinds: &[DetectorKind], l_max: &[u32]) -> Vec<DetectorId> {
    let mut ids: Vec<DetectorId> = kinds
        .iter()
        .flat_map(|k| match k {
            DetectorKind::Glrt => vec![DetectorId::Glrt],
            DetectorKind::Amf => vec![DetectorId::Amf],
            DetectorKind::Rao => vec![DetectorId::Rao],
            DetectorKind::Ace => vec![DetectorId::Ace],
            DetectorKind::Benchmark => vec![DetectorId::Benchmark],
            DetectorKind::EmBmlD => l_max
                .iter()
                .map(|&l| DetectorId::EmBml { l_max: l })
                .collect(),
        })
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorStatistic {
    pub detector: DetectorId,
    pub value: f64,
}

/// Unnormalized secondary-data scatter `S = Σ z_k z_k†`.
#[derive(Clone, Debug)]
pub struct SampleCovariance {
    pub s: HermitianMatrix,
    pub k: usize,
}

pub fn sample_covariance(batch: &DataBatch) -> Result<SampleCovariance> {
    let (n, k) = (batch.n(), batch.k());
    if k < n {
        return Err(Error::InsufficientSecondaryData { k, n });
    }
    Ok(SampleCovariance {
        s: HermitianMatrix::outer_sum(n, &batch.secondary),
        k,
    })
}

/// Whitened products `v†S⁻¹z`, `v†S⁻¹v`, `z†S⁻¹z` shared by the adaptive tests.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveProducts {
    pub vz: Complex64,
    pub vv: f64,
    pub zz: f64,
}

impl AdaptiveProducts {
    pub fn new(batch: &DataBatch, v: &ComplexVector, s: &SampleCovariance) -> Result<Self> {
        if v.len() != batch.n() {
            return Err(Error::DimensionMismatch {
                expected: batch.n(),
                actual: v.len(),
            });
        }
        let l = s.s.cholesky()?;
        let vw = l.forward_solve(v);
        let zw = l.forward_solve(&batch.cut);
        Ok(AdaptiveProducts {
            vz: vw.dot(&zw),
            vv: vw.norm_sqr(),
            zz: zw.norm_sqr(),
        })
    }

    /// Adaptive matched filter (Robey et al. 1992): `|a|² / b`.
    pub fn amf(&self) -> f64 {
        self.vz.norm_sqr() / self.vv
    }

    /// Kelly's GLRT (1986): `|a|² / (b (1 + c))`, in `[0, 1)`.
    pub fn glrt(&self) -> f64 {
        self.vz.norm_sqr() / (self.vv * (1.0 + self.zz))
    }

    /// Adaptive coherence estimator (Kraut & Scharf): `|a|² / (b c)`, in `[0, 1]`.
    pub fn ace(&self) -> f64 {
        if self.zz == 0.0 {
            return 0.0;
        }
        (self.vz.norm_sqr() / (self.vv * self.zz)).min(1.0)
    }

    /// Rao test: `|v†(S+zz†)⁻¹z|² / v†(S+zz†)⁻¹v`, expanded
    /// with Sherman-Morrison to `|a|² / ((1+c)(b(1+c) - |a|²))`.
    pub fn rao(&self) -> f64 {
        let a2 = self.vz.norm_sqr();
        let one_c = 1.0 + self.zz;
        a2 / (one_c * (self.vv * one_c - a2))
    }
}

fn stat(detector: DetectorId, value: f64) -> DetectorStatistic {
    DetectorStatistic { detector, value }
}

pub fn amf_statistic(
    batch: &DataBatch,
    v: &ComplexVector,
    s: &SampleCovariance,
) -> Result<DetectorStatistic> {
    Ok(stat(
        DetectorId::Amf,
        AdaptiveProducts::new(batch, v, s)?.amf(),
    ))
}

pub fn glrt_statistic(
    batch: &DataBatch,
    v: &ComplexVector,
    s: &SampleCovariance,
) -> Result<DetectorStatistic> {
    Ok(stat(
        DetectorId::Glrt,
        AdaptiveProducts::new(batch, v, s)?.glrt(),
    ))
}

pub fn ace_statistic(
    batch: &DataBatch,
    v: &ComplexVector,
    s: &SampleCovariance,
) -> Result<DetectorStatistic> {
    Ok(stat(
        DetectorId::Ace,
        AdaptiveProducts::new(batch, v, s)?.ace(),
    ))
}

pub fn rao_statistic(
    batch: &DataBatch,
    v: &ComplexVector,
    s: &SampleCovariance,
) -> Result<DetectorStatistic> {
    Ok(stat(
        DetectorId::Rao,
        AdaptiveProducts::new(batch, v, s)?.rao(),
    ))
}

/// Projection of the CUT onto the steering vector in the true-covariance metric.
#[derive(Clone, Copy, Debug)]
pub struct ClairvoyantProjection {
    /// `v† M⁻¹ z`
    pub vz: Complex64,
    /// `v† M⁻¹ v`
    pub vv: f64,
}

impl ClairvoyantProjection {
    pub fn new(batch: &DataBatch, v: &ComplexVector, true_m: &HermitianMatrix) -> Result<Self> {
        let l = true_m.cholesky()?;
        if v.len() != true_m.dim() || batch.n() != true_m.dim() {
            return Err(Error::DimensionMismatch {
                expected: true_m.dim(),
                actual: v.len().min(batch.n()),
            });
        }
        let vw = l.forward_solve(v);
        Ok(ClairvoyantProjection {
            vz: vw.dot(&l.forward_solve(&batch.cut)),
            vv: vw.norm_sqr(),
        })
    }

    /// `z†M⁻¹z − (z−αv)†M⁻¹(z−αv) = 2 Re(α* v†M⁻¹z) − |α|² v†M⁻¹v`.
    pub fn log_ratio(&self, alpha: Complex64) -> f64 {
        2.0 * (alpha.conj() * self.vz).re - alpha.norm_sqr() * self.vv
    }

    /// `Re(e^{−jφ} v†M⁻¹z) / √(v†M⁻¹v)`. For an amplitude of phase `φ` the
    /// log ratio is an increasing affine function of this, and its null
    /// distribution does not involve `|α|`.
    pub fn phase_matched(&self, phase: f64) -> f64 {
        (Complex64::from_polar(1.0, -phase) * self.vz).re / self.vv.sqrt()
    }
}

/// Clairvoyant log-likelihood ratio with the true covariance and amplitude
/// (equal priors).
pub fn benchmark_statistic(
    batch: &DataBatch,
    v: &ComplexVector,
    true_m: &HermitianMatrix,
    true_alpha: Complex64,
) -> Result<DetectorStatistic> {
    let p = ClairvoyantProjection::new(batch, v, true_m)?;
    Ok(stat(DetectorId::Benchmark, p.log_ratio(true_alpha)))
}
