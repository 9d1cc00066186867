//! Experiment configuration in TOML.
//!
//! Every field has a default, so an empty document is a valid spec:
//!
//! ```toml
//! command = "pd-curve"
//! detectors = ["GLRT", "AMF", "EM_BML_D"]
//! l_max = [5, 7]
//! pfa = 1e-3
//!
//! [scenario]
//! n = 8
//! k = 16
//!
//! [grids]
//! scnr_db = [0.0, 5.0, 10.0, 15.0, 20.0]
//!
//! [trials]
//! detection = 2000
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::detectors::{expand_detectors, DetectorId, DetectorKind};
use crate::error::{Error, Result};
use crate::harness::required_trials;
use crate::scenario::ScenarioConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Calibrate,
    PfaSweep,
    #[default]
    PdCurve,
    MismatchContour,
    Convergence,
    IngestRun,
}

impl Command {
    /// Commands that calibrate thresholds on synthetic null data.
    pub fn calibrates(self) -> bool {
        matches!(
            self,
            Command::Calibrate | Command::PfaSweep | Command::PdCurve | Command::MismatchContour
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubeFormat {
    #[default]
    InterleavedBinary,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub scnr_db: Vec<f64>,
    pub cnr_db: Vec<f64>,
    pub rho: Vec<f64>,
    pub cos_sq_phi: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            scnr_db: (0..=10).map(|i| 2.5 * i as f64).collect(),
            cnr_db: vec![30.0, 50.0, 70.0, 90.0, 110.0],
            rho: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            cos_sq_phi: (0..=10).map(|i| 0.1 * i as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Trials {
    /// Null trials for threshold calibration; `None` means `ceil(100 / pfa)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<usize>,
    pub detection: usize,
    pub convergence: usize,
}

impl Default for Trials {
    fn default() -> Self {
        Trials {
            calibration: None,
            detection: 1000,
            convergence: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    /// Include the target-free hypothesis.
    pub h0: bool,
    /// Target SCNRs to run under H1.
    pub scnr_db: Vec<f64>,
    pub iterations: u32,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            h0: true,
            scnr_db: vec![5.0, 10.0, 15.0, 20.0],
            iterations: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: CubeFormat,
    /// Range bin whose null statistics set the thresholds.
    pub calibration_bin: usize,
    /// Range bin on which the empirical Pfa (and Pd) is measured.
    pub evaluation_bin: usize,
    /// Pulses shared by consecutive windows.
    pub overlap: usize,
    /// Also measure Pd with targets injected at `grids.scnr_db`.
    pub inject_targets: bool,
}

impl Default for IngestSpec {
    fn default() -> Self {
        IngestSpec {
            path: None,
            format: CubeFormat::InterleavedBinary,
            calibration_bin: 28,
            evaluation_bin: 66,
            overlap: 5,
            inject_targets: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub command: Command,
    pub scenario: ScenarioConfig,
    pub detectors: Vec<DetectorKind>,
    pub l_max: Vec<u32>,
    pub pfa: f64,
    pub grids: Grids,
    pub trials: Trials,
    pub convergence: ConvergenceSpec,
    pub ingest: IngestSpec,
    /// Worker threads; 0 picks the number of cores.
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            command: Command::default(),
            scenario: ScenarioConfig::default(),
            detectors: DetectorKind::ALL.to_vec(),
            l_max: vec![5],
            pfa: 1e-3,
            grids: Grids::default(),
            trials: Trials::default(),
            convergence: ConvergenceSpec::default(),
            ingest: IngestSpec::default(),
            workers: 0,
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn detector_ids(&self) -> Vec<DetectorId> {
        expand_detectors(&self.detectors, &self.l_max)
    }

    pub fn calibration_trials(&self) -> usize {
        self.trials
            .calibration
            .unwrap_or_else(|| required_trials(self.pfa))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.pfa > 0.0 && self.pfa < 0.5) {
            return Err(Error::validation("pfa", "must lie in (0, 0.5)"));
        }
        if self.detectors.is_empty() {
            return Err(Error::validation(
                "detectors",
                "at least one detector is required",
            ));
        }
        if self.l_max.is_empty() || self.l_max.contains(&0) {
            return Err(Error::validation(
                "l_max",
                "needs at least one entry, each >= 1",
            ));
        }
        let g = &self.grids;
        for (name, grid) in [
            ("grids.scnr_db", &g.scnr_db),
            ("grids.cnr_db", &g.cnr_db),
            ("grids.rho", &g.rho),
            ("grids.cos_sq_phi", &g.cos_sq_phi),
        ] {
            if grid.is_empty() {
                return Err(Error::validation(name, "grid must be nonempty"));
            }
            if grid.iter().any(|x| x.is_nan()) {
                return Err(Error::validation(name, "grid contains NaN"));
            }
        }
        if g.rho.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::validation("grids.rho", "values must lie in [0, 1)"));
        }
        if g.cos_sq_phi.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::validation(
                "grids.cos_sq_phi",
                "values must lie in [0, 1]",
            ));
        }
        if self.command.calibrates() {
            let need = required_trials(self.pfa);
            if self.calibration_trials() < need {
                return Err(Error::validation(
                    "trials.calibration",
                    format!("need at least 100/pfa = {need} trials"),
                ));
            }
        }
        if self.trials.detection == 0 {
            return Err(Error::validation("trials.detection", "must be positive"));
        }
        if self.command == Command::Convergence {
            if self.trials.convergence == 0 {
                return Err(Error::validation("trials.convergence", "must be positive"));
            }
            if self.convergence.iterations == 0 {
                return Err(Error::validation(
                    "convergence.iterations",
                    "must be positive",
                ));
            }
            if !self.convergence.h0 && self.convergence.scnr_db.is_empty() {
                return Err(Error::validation("convergence", "no hypothesis selected"));
            }
        }
        if self.command == Command::IngestRun {
            if self.ingest.path.is_none() {
                return Err(Error::validation("ingest.path", "required for ingest-run"));
            }
            if self.ingest.overlap >= self.scenario.n {
                return Err(Error::validation(
                    "ingest.overlap",
                    "must be smaller than n",
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Parses and validates a TOML experiment spec.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let spec = parse_config_unvalidated(text)?;
    spec.validate()?;
    Ok(spec)
}

/// Parses with defaults applied but leaves validation to the caller, for
/// specs that are completed by command-line overrides.
pub fn parse_config_unvalidated(text: &str) -> Result<ExperimentSpec> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            line,
            message: e.message().to_string(),
        }
    })
}
