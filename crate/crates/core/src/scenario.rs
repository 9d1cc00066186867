//! Synthetic scene construction: interference covariance, steering vectors,
//! Gaussian sampling and target injection.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, HermitianMatrix};
use crate::rng::{self, Stream};

/// Parameters of one homogeneous Gaussian scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Channels per snapshot.
    pub n: usize,
    /// Secondary snapshots.
    pub k: usize,
    /// One-lag clutter correlation.
    pub rho: f64,
    pub cnr_db: f64,
    pub noise_power: f64,
    /// Normalized Doppler of the nominal steering vector.
    pub doppler_norm: f64,
    /// Target SCNR; `None` under H0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scnr_db: Option<f64>,
    pub cos_sq_phi: f64,
    /// Phase of the injected amplitude, radians.
    pub target_phase: f64,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 8,
            k: 16,
            rho: 0.9,
            cnr_db: 30.0,
            noise_power: 1.0,
            doppler_norm: 0.1,
            scnr_db: None,
            cos_sq_phi: 1.0,
            target_phase: 0.0,
            master_seed: 0x5eed,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::validation("n", "channel count must be at least 2"));
        }
        if self.k < self.n {
            return Err(Error::validation(
                "k",
                format!(
                    "need K >= N for an invertible sample covariance (K = {}, N = {})",
                    self.k, self.n
                ),
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::validation("rho", "must lie in [0, 1)"));
        }
        if !self.cnr_db.is_finite() {
            return Err(Error::validation("cnr_db", "must be finite"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::validation("noise_power", "must be positive"));
        }
        if !(-0.5..0.5).contains(&self.doppler_norm) {
            return Err(Error::validation("doppler_norm", "must lie in [-0.5, 0.5)"));
        }
        if let Some(s) = self.scnr_db {
            if s.is_nan() || s == f64::INFINITY {
                return Err(Error::validation("scnr_db", "must be finite or -inf"));
            }
        }
        if !(0.0..=1.0).contains(&self.cos_sq_phi) {
            return Err(Error::validation("cos_sq_phi", "must lie in [0, 1]"));
        }
        if !self.target_phase.is_finite() {
            return Err(Error::validation("target_phase", "must be finite"));
        }
        Ok(())
    }

    pub fn clutter_power(&self) -> f64 {
        self.noise_power * db_to_linear(self.cnr_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Cell under test plus its secondary snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBatch {
    pub cut: ComplexVector,
    pub secondary: Vec<ComplexVector>,
}

impl DataBatch {
    pub fn new(cut: ComplexVector, secondary: Vec<ComplexVector>) -> Result<Self> {
        let n = cut.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if let Some(bad) = secondary.iter().find(|z| z.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(DataBatch { cut, secondary })
    }

    pub fn n(&self) -> usize {
        self.cut.len()
    }

    pub fn k(&self) -> usize {
        self.secondary.len()
    }

    /// Applies `x -> B x` to every snapshot (`B` row-major, `N x N`).
    pub fn transformed(&self, b: &[Complex64]) -> DataBatch {
        DataBatch {
            cut: apply(b, &self.cut),
            secondary: self.secondary.iter().map(|z| apply(b, z)).collect(),
        }
    }
}

/// `B x` for a row-major square `B`.
pub fn apply(b: &[Complex64], x: &ComplexVector) -> ComplexVector {
    let n = x.len();
    (0..n)
        .map(|i| {
            b[i * n..(i + 1) * n]
                .iter()
                .zip(x.iter())
                .map(|(a, y)| a * y)
                .sum()
        })
        .collect()
}

/// `M = σ² I + σ_c² M_c` with `M_c(i, j) = ρ^|i-j|`.
pub fn build_covariance(cfg: &ScenarioConfig) -> HermitianMatrix {
    let sigma2 = cfg.noise_power;
    let sigma_c2 = cfg.clutter_power();
    HermitianMatrix::from_fn(cfg.n, |i, j| {
        let lag = i.abs_diff(j) as i32;
        let noise = if i == j { sigma2 } else { 0.0 };
        Complex64::new(noise + sigma_c2 * cfg.rho.powi(lag), 0.0)
    })
}

/// Temporal steering vector `v[n] = exp(j 2π n f_d)`.
pub fn steering_vector(n: usize, doppler_norm: f64) -> ComplexVector {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 * doppler_norm))
        .collect()
}

/// Draws one trial from the evaluation stream.
pub fn sample_batch(cfg: &ScenarioConfig, m: &HermitianMatrix, trial: u64) -> Result<DataBatch> {
    sample_batch_from(cfg, m, Stream::Evaluation, trial)
}

/// Draws `K + 1` i.i.d. `CN(0, M)` snapshots for `trial` of `stream`.
/// Vector 0 of the substream is the CUT, vectors `1..=K` the secondary data.
pub fn sample_batch_from(
    cfg: &ScenarioConfig,
    m: &HermitianMatrix,
    stream: Stream,
    trial: u64,
) -> Result<DataBatch> {
    let l = m.cholesky()?;
    let n = m.dim();
    let draw = |vector: u64| {
        let mut rng = rng::substream(cfg.master_seed, stream, trial, vector);
        l.mul_vec(&rng::white_vector(&mut rng, n))
    };
    Ok(DataBatch {
        cut: draw(0),
        secondary: (1..=cfg.k as u64).map(draw).collect(),
    })
}

/// Amplitude giving `|α|² v_t† M⁻¹ v_t = SCNR` with `arg α = phase`.
pub fn target_amplitude(
    v_true: &ComplexVector,
    m: &HermitianMatrix,
    scnr_db: f64,
    phase: f64,
) -> Result<Complex64> {
    if scnr_db == f64::NEG_INFINITY {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let gain = m.quad_form_real(v_true)?;
    Ok(Complex64::from_polar(
        (db_to_linear(scnr_db) / gain).sqrt(),
        phase,
    ))
}

/// Adds `α v_t` to the CUT; secondary data are untouched.
pub fn inject_target(
    batch: &DataBatch,
    v_true: &ComplexVector,
    m: &HermitianMatrix,
    scnr_db: f64,
    phase: f64,
) -> Result<DataBatch> {
    let alpha = target_amplitude(v_true, m, scnr_db, phase)?;
    Ok(inject_amplitude(batch, v_true, alpha))
}

pub fn inject_amplitude(batch: &DataBatch, v_true: &ComplexVector, alpha: Complex64) -> DataBatch {
    DataBatch {
        cut: batch.cut.add_scaled(alpha, v_true),
        secondary: batch.secondary.clone(),
    }
}

/// `|v† M⁻¹ v_t|² / ((v† M⁻¹ v)(v_t† M⁻¹ v_t))`.
pub fn cos_sq_mismatch(
    v: &ComplexVector,
    v_true: &ComplexVector,
    m: &HermitianMatrix,
) -> Result<f64> {
    let cross = m.quad_form(v, v_true)?.norm_sqr();
    Ok(cross / (m.quad_form_real(v)? * m.quad_form_real(v_true)?))
}

const ORTHO_RESIDUAL_FLOOR: f64 = 1e-8;

/// True steering vector at a prescribed whitened-space mismatch from `v`.
///
/// The orthogonal component is the whitened steering vector shifted by half
/// a Doppler bin (`v[n] · exp(jπn/N)`), Gram-Schmidt projected off `v̄`;
/// whitened elementary vectors are tried in order if that degenerates.
pub fn mismatched_steering(
    v: &ComplexVector,
    m: &HermitianMatrix,
    cos_sq_phi: f64,
) -> Result<ComplexVector> {
    if !(0.0..=1.0).contains(&cos_sq_phi) {
        return Err(Error::validation("cos_sq_phi", "must lie in [0, 1]"));
    }
    let l = m.cholesky()?;
    let n = v.len();
    if n != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            actual: n,
        });
    }
    let v_bar = l.forward_solve(v);
    let u = v_bar.scaled(Complex64::new(1.0 / v_bar.norm(), 0.0));

    let shifted: ComplexVector = v
        .iter()
        .enumerate()
        .map(|(i, x)| x * Complex64::from_polar(1.0, PI * i as f64 / n as f64))
        .collect();
    let candidates = std::iter::once(l.forward_solve(&shifted))
        .chain((0..n).map(|i| l.forward_solve(&ComplexVector::basis(n, i))));

    let mut u_perp = None;
    for w in candidates {
        let scale = w.norm();
        let residual = w.add_scaled(-u.dot(&w), &u);
        let r = residual.norm();
        if r > ORTHO_RESIDUAL_FLOOR * scale {
            u_perp = Some(residual.scaled(Complex64::new(1.0 / r, 0.0)));
            break;
        }
    }
    let u_perp = u_perp.ok_or(Error::DegenerateDirection)?;

    let whitened = u
        .scaled(Complex64::new(cos_sq_phi.sqrt(), 0.0))
        .add_scaled(Complex64::new((1.0 - cos_sq_phi).sqrt(), 0.0), &u_perp);
    Ok(l.mul_vec(&whitened))
}
