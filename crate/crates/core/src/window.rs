//! Sliding-window processing of a range-pulse data cube.
//!
//! Each trial takes `N` consecutive pulses. The cell under test is one range
//! bin and its secondary data are the `K/2` bins on either side, with no
//! guard cells. Consecutive windows share `overlap` pulses. Thresholds are
//! set on the null statistics of a calibration bin and applied to a second,
//! evaluation bin.
//!
//! Recorded data come without a true covariance, so the clairvoyant
//! benchmark is not evaluated here, and injected targets are normalized
//! with the sample covariance of the evaluation region.

use std::iter;

use num_complex::Complex64;

use crate::config::ExperimentSpec;
use crate::cube::DataCube;
use crate::detectors::DetectorId;
use crate::error::{Error, Result};
use crate::harness::{
    estimate_rate, required_trials, threshold_from_sorted, CurveResult, Evaluator, Harness,
};
use crate::linalg::HermitianMatrix;
use crate::scenario::{inject_amplitude, steering_vector, target_amplitude, DataBatch};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowPlan {
    pub n: usize,
    pub k: usize,
    pub overlap: usize,
    pub calibration_bin: usize,
    pub evaluation_bin: usize,
}

impl WindowPlan {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        WindowPlan {
            n: spec.scenario.n,
            k: spec.scenario.k,
            overlap: spec.ingest.overlap,
            calibration_bin: spec.ingest.calibration_bin,
            evaluation_bin: spec.ingest.evaluation_bin,
        }
    }

    pub fn step(&self) -> usize {
        self.n - self.overlap
    }

    /// `floor((P − N) / step) + 1`, or 0 if a single window does not fit.
    pub fn window_count(&self, pulses: usize) -> usize {
        if pulses < self.n || self.step() == 0 {
            0
        } else {
            (pulses - self.n) / self.step() + 1
        }
    }

    fn check(&self, cube: &DataCube) -> Result<()> {
        if self.overlap >= self.n {
            return Err(Error::validation(
                "ingest.overlap",
                "must be smaller than n",
            ));
        }
        if !self.k.is_multiple_of(2) {
            return Err(Error::validation(
                "k",
                "must be even to split secondary bins evenly",
            ));
        }
        if cube.pulses() < self.n {
            return Err(Error::InsufficientData(format!(
                "{} pulses cannot hold a {}-pulse window",
                cube.pulses(),
                self.n
            )));
        }
        let half = self.k / 2;
        for (name, bin) in [
            ("calibration", self.calibration_bin),
            ("evaluation", self.evaluation_bin),
        ] {
            if bin < half || bin + half >= cube.bins() {
                return Err(Error::InsufficientData(format!(
                    "{name} bin {bin} needs {half} bins on each side within {} range bins",
                    cube.bins()
                )));
            }
        }
        Ok(())
    }

    /// Trial `window` for the CUT at `bin`.
    pub fn batch(&self, cube: &DataCube, bin: usize, window: usize) -> DataBatch {
        let start = window * self.step();
        let half = self.k / 2;
        let secondary = (bin - half..bin)
            .chain(bin + 1..=bin + half)
            .map(|b| cube.snapshot(b, start, self.n))
            .collect();
        DataBatch {
            cut: cube.snapshot(bin, start, self.n),
            secondary,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WindowRun {
    pub trials: usize,
    pub detectors: Vec<DetectorId>,
    /// Threshold per detector at the configured Pfa, from the calibration bin.
    pub thresholds: Vec<f64>,
    /// Sample covariance of the evaluation region, used for SCNR.
    pub evaluation_covariance: HermitianMatrix,
    /// Axis `scnr_db`: a leading `-inf` row holds the empirical Pfa, the
    /// remaining rows (only with target injection) the Pd.
    pub curve: CurveResult,
}

/// Runs the sliding-window protocol on `cube` with the detectors, Pfa,
/// window geometry and (when `ingest.inject_targets` is set) the SCNR grid
/// of `spec`.
pub fn sliding_window_run(
    cube: &DataCube,
    spec: &ExperimentSpec,
    harness: &Harness,
) -> Result<WindowRun> {
    let plan = WindowPlan::from_spec(spec);
    plan.check(cube)?;
    let trials = plan.window_count(cube.pulses());
    let need = required_trials(spec.pfa);
    if trials < need {
        return Err(Error::InsufficientTrials {
            trials,
            required: need,
        });
    }
    let detectors: Vec<DetectorId> = spec
        .detector_ids()
        .into_iter()
        .filter(|&d| d != DetectorId::Benchmark)
        .collect();
    if detectors.is_empty() {
        return Err(Error::validation(
            "detectors",
            "no adaptive detector selected",
        ));
    }
    let n = plan.n;
    let v = steering_vector(n, spec.scenario.doppler_norm);

    let eval_batches: Vec<DataBatch> = (0..trials)
        .map(|t| plan.batch(cube, plan.evaluation_bin, t))
        .collect();
    let vectors = eval_batches
        .iter()
        .flat_map(|b| iter::once(&b.cut).chain(&b.secondary));
    let count = trials * (plan.k + 1);
    let m_eval = HermitianMatrix::outer_sum(n, vectors).scaled(1.0 / count as f64);
    m_eval.cholesky()?;

    let eval = Evaluator::from_parts(
        v.clone(),
        &detectors,
        m_eval.clone(),
        spec.scenario.target_phase,
    );
    let columns = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..detectors.len())
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect()
    };

    let cal_rows = harness.run_trials(trials, |t| {
        eval.evaluate(&plan.batch(cube, plan.calibration_bin, t as usize))
    })?;
    let thresholds = columns(cal_rows)
        .into_iter()
        .map(|mut col| {
            col.sort_by(f64::total_cmp);
            threshold_from_sorted(&col, spec.pfa)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut amplitudes = vec![(f64::NEG_INFINITY, Complex64::new(0.0, 0.0))];
    if spec.ingest.inject_targets {
        for &s in &spec.grids.scnr_db {
            amplitudes.push((
                s,
                target_amplitude(&v, &m_eval, s, spec.scenario.target_phase)?,
            ));
        }
    }
    let mut points = Vec::new();
    let mut estimates = Vec::new();
    for (scnr, alpha) in amplitudes {
        let rows = harness.run_trials(trials, |t| {
            eval.evaluate(&inject_amplitude(&eval_batches[t as usize], &v, alpha))
        })?;
        points.push(vec![scnr]);
        estimates.push(
            columns(rows)
                .iter()
                .zip(&thresholds)
                .map(|(col, &eta)| estimate_rate(col, eta))
                .collect(),
        );
    }
    Ok(WindowRun {
        trials,
        thresholds,
        evaluation_covariance: m_eval,
        curve: CurveResult {
            axis_names: vec!["scnr_db".into()],
            points,
            detectors: detectors.clone(),
            estimates,
        },
        detectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexVector;

    fn plan(n: usize, overlap: usize) -> WindowPlan {
        WindowPlan {
            n,
            k: 4,
            overlap,
            calibration_bin: 2,
            evaluation_bin: 7,
        }
    }

    #[test]
    fn window_counting() {
        assert_eq!(plan(8, 5).window_count(30_720), 10_238);
        assert_eq!(plan(8, 0).window_count(100), 100 / 8);
        assert_eq!(plan(8, 7).window_count(8), 1);
        assert_eq!(plan(8, 7).window_count(7), 0);
    }

    #[test]
    fn batch_geometry() {
        let data = (0..30).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let cube = DataCube::new(6, 5, data, "").unwrap();
        let p = WindowPlan {
            n: 2,
            k: 4,
            overlap: 1,
            calibration_bin: 2,
            evaluation_bin: 2,
        };
        let b = p.batch(&cube, 2, 1);
        assert_eq!(b.cut, ComplexVector::from_real(&[7.0, 12.0]));
        let firsts: Vec<f64> = b.secondary.iter().map(|s| s[0].re).collect();
        assert_eq!(firsts, vec![5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn undersized_cube() {
        let cube = DataCube::zeros(4, 5);
        assert!(matches!(
            plan(8, 5).check(&cube),
            Err(Error::InsufficientData(_))
        ));
        let cube = DataCube::zeros(40, 8);
        assert!(matches!(
            plan(8, 5).check(&cube),
            Err(Error::InsufficientData(_))
        ));
    }
}
