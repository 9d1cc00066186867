//! Adaptive radar detection in Gaussian interference of unknown covariance.
//!
//! The crate implements an EM-based joint Bayesian/maximum-likelihood
//! detector (EM-BML-D) alongside Kelly's GLRT, the AMF, the Rao test, the
//! ACE and a clairvoyant benchmark, plus the Monte Carlo machinery used to
//! characterize them: threshold calibration, CFAR sweeps, Pd curves,
//! mismatch contours, EM convergence traces, and a sliding-window runner
//! for recorded range-pulse data cubes.

pub mod config;
pub mod cube;
pub mod curve_csv;
pub mod detectors;
pub mod em;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod window;

pub use detectors::{DetectorId, DetectorKind, DetectorStatistic, SampleCovariance};
pub use em::{EmState, EmTrace, Posteriors};
pub use error::{Error, Result};
pub use harness::{Calibration, CurveResult, Harness, RateEstimate, ThresholdTable, TrialEnsemble};
pub use linalg::{ComplexVector, HermitianMatrix};
pub use scenario::{DataBatch, ScenarioConfig};
