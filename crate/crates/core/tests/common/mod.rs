#![allow(dead_code)]

pub mod props;

use embml::linalg::{ComplexVector, HermitianMatrix};
use embml::rng::{self, Stream};
use embml::scenario::{
    build_covariance, sample_batch_from, steering_vector, DataBatch, ScenarioConfig,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng::substream(seed, Stream::Auxiliary(7), 0, 0)
}

/// Row-major `n x n` complex Gaussian matrix plus `shift · I`.
pub fn random_square(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<Complex64> {
    let mut b: Vec<Complex64> = (0..n * n).map(|_| rng::complex_normal(rng)).collect();
    for i in 0..n {
        b[i * n + i] += shift;
    }
    b
}

/// `G G† + ridge · I` with Gaussian `G`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> HermitianMatrix {
    let g = random_square(rng, n, 0.0);
    HermitianMatrix::from_fn(n, |i, j| {
        let x: Complex64 = (0..n).map(|k| g[i * n + k] * g[j * n + k].conj()).sum();
        if i == j {
            x + ridge
        } else {
            x
        }
    })
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> ComplexVector {
    rng::white_vector(rng, n)
}

pub fn to_na(m: &HermitianMatrix) -> CMat {
    let n = m.dim();
    CMat::from_fn(n, n, |i, j| m.get(i, j))
}

pub fn rows_to_na(n: usize, b: &[Complex64]) -> CMat {
    CMat::from_fn(n, n, |i, j| b[i * n + j])
}

pub fn col(v: &ComplexVector) -> CMat {
    CMat::from_fn(v.len(), 1, |i, _| v[i])
}

/// `a† X b` for dense `X`.
pub fn form(a: &ComplexVector, x: &CMat, b: &ComplexVector) -> Complex64 {
    (col(a).adjoint() * x * col(b))[(0, 0)]
}

pub fn inverse(m: &HermitianMatrix) -> CMat {
    to_na(m).try_inverse().expect("invertible")
}

pub fn log_det_na(m: &HermitianMatrix) -> f64 {
    to_na(m).determinant().re.ln()
}

pub fn scatter_na(batch: &DataBatch) -> CMat {
    let n = batch.n();
    let mut s = CMat::zeros(n, n);
    for z in &batch.secondary {
        s += col(z) * col(z).adjoint();
    }
    s
}

/// Default scene with a varied seed, CNR and correlation.
pub fn scene(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        master_seed: seed,
        rho: 0.3 + 0.6 * ((seed % 7) as f64 / 6.0),
        cnr_db: 10.0 + 10.0 * (seed % 5) as f64,
        ..ScenarioConfig::default()
    }
}

pub fn null_batch(cfg: &ScenarioConfig, trial: u64) -> (DataBatch, ComplexVector, HermitianMatrix) {
    let m = build_covariance(cfg);
    let b = sample_batch_from(cfg, &m, Stream::Auxiliary(1), trial).unwrap();
    (b, steering_vector(cfg.n, cfg.doppler_norm), m)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
