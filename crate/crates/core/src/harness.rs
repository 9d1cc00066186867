//! Monte Carlo engine: threshold calibration, Pfa/Pd estimation, CFAR
//! sweeps, detection curves, mismatch contours and convergence studies.
//!
//! Trials are independent: each draws a fresh CUT and fresh secondary data
//! from its own counter-based substream, so results do not depend on the
//! worker count or on scheduling. Grid points within one experiment reuse
//! the same trial indices (common random numbers).
//!
//! The clairvoyant benchmark is thresholded through its sufficient statistic
//! `Re(e^{-jφ} v†M⁻¹z) / √(v†M⁻¹v)`. For a fixed amplitude `α = |α|e^{jφ}`,
//! `|α| > 0`, the log-likelihood ratio is a strictly increasing affine
//! function of it, so both give identical decisions at matched thresholds,
//! and this form stays well defined as `|α| → 0`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::detectors::{sample_covariance, AdaptiveProducts, ClairvoyantProjection, DetectorId};
use crate::em::{em_statistics, run_em};
use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, HermitianMatrix};
use crate::rng::Stream;
use crate::scenario::{
    build_covariance, inject_amplitude, mismatched_steering, sample_batch_from, steering_vector,
    target_amplitude, DataBatch, ScenarioConfig,
};

/// Null statistics of one detector, sorted ascending.
#[derive(Clone, Debug)]
pub struct TrialEnsemble {
    pub detector: DetectorId,
    pub statistics: Vec<f64>,
    pub scenario: ScenarioConfig,
}

impl TrialEnsemble {
    pub fn new(detector: DetectorId, mut statistics: Vec<f64>, scenario: ScenarioConfig) -> Self {
        statistics.sort_by(f64::total_cmp);
        TrialEnsemble {
            detector,
            statistics,
            scenario,
        }
    }

    pub fn trial_count(&self) -> usize {
        self.statistics.len()
    }
}

/// Smallest number of null trials accepted for a given Pfa.
pub fn required_trials(pfa: f64) -> usize {
    (100.0 / pfa - 1e-9).ceil() as usize
}

/// Order statistic at rank `ceil(n (1 − pfa))` of sorted null statistics.
/// Decisions everywhere are "statistic > threshold".
pub fn threshold_from_sorted(sorted: &[f64], pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::validation("pfa", "must lie in (0, 1)"));
    }
    let n = sorted.len();
    let required = required_trials(pfa);
    if n < required {
        return Err(Error::InsufficientTrials {
            trials: n,
            required,
        });
    }
    // ceil(n(1 − p)) = n − floor(n p); the nudge absorbs representation error in n p.
    let exceed = ((n as f64) * pfa + 1e-9).floor() as usize;
    Ok(sorted[n - exceed - 1])
}

pub fn calibrate_threshold(ensemble: &TrialEnsemble, pfa: f64) -> Result<f64> {
    threshold_from_sorted(&ensemble.statistics, pfa)
}

/// Fraction of statistics strictly above a threshold, with a 95 % binomial
/// half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub ci: f64,
    pub trials: usize,
}

impl RateEstimate {
    pub fn from_count(count: usize, trials: usize) -> Self {
        let rate = count as f64 / trials as f64;
        RateEstimate {
            rate,
            ci: 1.96 * (rate * (1.0 - rate) / trials as f64).sqrt(),
            trials,
        }
    }
}

pub fn estimate_rate(statistics: &[f64], threshold: f64) -> RateEstimate {
    assert!(!statistics.is_empty(), "rate of an empty ensemble");
    let count = statistics.iter().filter(|&&s| s > threshold).count();
    RateEstimate::from_count(count, statistics.len())
}

/// Thresholds per detector and nominal Pfa.
#[derive(Clone, Debug)]
pub struct ThresholdTable {
    pub scenario: ScenarioConfig,
    pub entries: BTreeMap<DetectorId, Vec<(f64, f64)>>,
}

impl ThresholdTable {
    pub fn get(&self, detector: DetectorId, pfa: f64) -> Option<f64> {
        self.entries
            .get(&detector)?
            .iter()
            .find(|(p, _)| (p - pfa).abs() <= 1e-12 * pfa)
            .map(|&(_, eta)| eta)
    }
}

/// Figure data: per grid point, per detector rate estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveResult {
    pub axis_names: Vec<String>,
    /// Axis coordinates, one row per grid point.
    pub points: Vec<Vec<f64>>,
    pub detectors: Vec<DetectorId>,
    /// `estimates[point][detector]`
    pub estimates: Vec<Vec<RateEstimate>>,
}

impl CurveResult {
    pub fn detector_index(&self, detector: DetectorId) -> Option<usize> {
        self.detectors.iter().position(|&d| d == detector)
    }

    pub fn point_index(&self, coords: &[f64]) -> Option<usize> {
        self.points
            .iter()
            .position(|p| p.len() == coords.len() && p.iter().zip(coords).all(|(a, b)| a == b))
    }

    pub fn estimate(&self, point: usize, detector: DetectorId) -> Option<RateEstimate> {
        Some(self.estimates[point][self.detector_index(detector)?])
    }

    /// Rates of one detector in grid order.
    pub fn rates(&self, detector: DetectorId) -> Vec<f64> {
        let j = self
            .detector_index(detector)
            .expect("detector not in curve");
        self.estimates.iter().map(|row| row[j].rate).collect()
    }
}

/// Mean `ΔL(l)` over trials.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceResult {
    pub scnr_db: Option<f64>,
    pub trials: usize,
    /// `mean_delta_l[l − 1]` for `l = 1..=l_max`.
    pub mean_delta_l: Vec<f64>,
    /// Trials in which the mixture log-likelihood ever decreased by more than 1e-9.
    pub non_monotone_trials: usize,
}

/// Per-trial statistic evaluation for a fixed detector set.
pub(crate) struct Evaluator {
    detectors: Vec<DetectorId>,
    em_levels: Vec<u32>,
    v: ComplexVector,
    true_m: HermitianMatrix,
    phase: f64,
}

impl Evaluator {
    fn new(cfg: &ScenarioConfig, detectors: &[DetectorId], true_m: HermitianMatrix) -> Self {
        Self::from_parts(
            steering_vector(cfg.n, cfg.doppler_norm),
            detectors,
            true_m,
            cfg.target_phase,
        )
    }

    /// `true_m` and `phase` only matter for the benchmark column.
    pub(crate) fn from_parts(
        v: ComplexVector,
        detectors: &[DetectorId],
        true_m: HermitianMatrix,
        phase: f64,
    ) -> Self {
        let em_levels = detectors
            .iter()
            .filter_map(|d| match d {
                DetectorId::EmBml { l_max } => Some(*l_max),
                _ => None,
            })
            .collect();
        Evaluator {
            detectors: detectors.to_vec(),
            em_levels,
            v,
            true_m,
            phase,
        }
    }

    pub(crate) fn evaluate(&self, batch: &DataBatch) -> Result<Vec<f64>> {
        let s = sample_covariance(batch)?;
        let products = AdaptiveProducts::new(batch, &self.v, &s)?;
        let em = if self.em_levels.is_empty() {
            Vec::new()
        } else {
            em_statistics(batch, &self.v, &s, &self.em_levels)?
        };
        let mut em_iter = em.into_iter();
        self.detectors
            .iter()
            .map(|d| {
                Ok(match d {
                    DetectorId::Glrt => products.glrt(),
                    DetectorId::Amf => products.amf(),
                    DetectorId::Rao => products.rao(),
                    DetectorId::Ace => products.ace(),
                    DetectorId::Benchmark => {
                        ClairvoyantProjection::new(batch, &self.v, &self.true_m)?
                            .phase_matched(self.phase)
                    }
                    DetectorId::EmBml { .. } => {
                        em_iter.next().expect("one EM value per EM detector")
                    }
                })
            })
            .collect()
    }
}

/// Null ensembles and thresholds at one calibration scenario.
#[derive(Clone, Debug)]
pub struct Calibration {
    pub ensembles: Vec<TrialEnsemble>,
    pub table: ThresholdTable,
}

impl Calibration {
    pub fn scenario(&self) -> &ScenarioConfig {
        &self.table.scenario
    }

    pub fn detectors(&self) -> Vec<DetectorId> {
        self.ensembles.iter().map(|e| e.detector).collect()
    }

    pub fn ensemble(&self, detector: DetectorId) -> Option<&TrialEnsemble> {
        self.ensembles.iter().find(|e| e.detector == detector)
    }

    /// Threshold for any Pfa the ensemble size supports.
    pub fn threshold(&self, detector: DetectorId, pfa: f64) -> Result<f64> {
        if let Some(eta) = self.table.get(detector, pfa) {
            return Ok(eta);
        }
        let ens = self.ensemble(detector).ok_or_else(|| {
            Error::validation("detector", format!("{detector} was not calibrated"))
        })?;
        calibrate_threshold(ens, pfa)
    }

    fn thresholds(&self, detectors: &[DetectorId], pfa: f64) -> Result<Vec<f64>> {
        detectors.iter().map(|&d| self.threshold(d, pfa)).collect()
    }
}

/// Parallel trial runner.
pub struct Harness {
    pool: rayon::ThreadPool,
}

impl Harness {
    /// `workers == 0` uses one worker per available core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::validation("workers", e.to_string()))?;
        Ok(Harness { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(trial)` for every trial, in trial order.
    pub(crate) fn run_trials<T, F>(&self, trials: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync,
    {
        self.pool
            .install(|| (0..trials as u64).into_par_iter().map(&f).collect())
    }

    /// Null statistics for each detector, `[detector][trial]`.
    pub fn null_statistics(
        &self,
        cfg: &ScenarioConfig,
        detectors: &[DetectorId],
        stream: Stream,
        trials: usize,
    ) -> Result<Vec<Vec<f64>>> {
        cfg.validate()?;
        let m = build_covariance(cfg);
        let eval = Evaluator::new(cfg, detectors, m.clone());
        let rows = self.run_trials(trials, |t| {
            eval.evaluate(&sample_batch_from(cfg, &m, stream, t)?)
        })?;
        Ok(transpose(rows, detectors.len()))
    }

    /// Null ensembles from the calibration stream and thresholds at `pfas`.
    /// Detectors are kept in canonical order, without duplicates.
    pub fn calibrate(
        &self,
        cfg: &ScenarioConfig,
        detectors: &[DetectorId],
        pfas: &[f64],
        trials: usize,
    ) -> Result<Calibration> {
        for &pfa in pfas {
            if trials < required_trials(pfa) {
                return Err(Error::InsufficientTrials {
                    trials,
                    required: required_trials(pfa),
                });
            }
        }
        let mut detectors = detectors.to_vec();
        detectors.sort();
        detectors.dedup();
        let columns = self.null_statistics(cfg, &detectors, Stream::Calibration, trials)?;
        let ensembles: Vec<TrialEnsemble> = detectors
            .iter()
            .zip(columns)
            .map(|(&d, stats)| TrialEnsemble::new(d, stats, cfg.clone()))
            .collect();
        let mut entries = BTreeMap::new();
        for ens in &ensembles {
            let mut row = pfas
                .iter()
                .map(|&p| Ok((p, calibrate_threshold(ens, p)?)))
                .collect::<Result<Vec<_>>>()?;
            row.sort_by(|a, b| a.0.total_cmp(&b.0));
            entries.insert(ens.detector, row);
        }
        Ok(Calibration {
            ensembles,
            table: ThresholdTable {
                scenario: cfg.clone(),
                entries,
            },
        })
    }

    /// Empirical Pfa with calibrated thresholds while CNR (at the nominal ρ)
    /// and then ρ (at the nominal CNR) move away from the calibration point.
    /// Axes are `[cnr_db, rho]`; the nominal point appears once.
    pub fn cfar_sweep(
        &self,
        cal: &Calibration,
        pfa: f64,
        cnr_grid: &[f64],
        rho_grid: &[f64],
        trials: usize,
    ) -> Result<CurveResult> {
        let nominal = cal.scenario().clone();
        let detectors = cal.detectors();
        let thresholds = cal.thresholds(&detectors, pfa)?;
        let mut points: Vec<Vec<f64>> = Vec::new();
        for &cnr in cnr_grid {
            points.push(vec![cnr, nominal.rho]);
        }
        for &rho in rho_grid {
            let p = vec![nominal.cnr_db, rho];
            if !points.contains(&p) {
                points.push(p);
            }
        }
        let mut estimates = Vec::with_capacity(points.len());
        for p in &points {
            let cfg = ScenarioConfig {
                cnr_db: p[0],
                rho: p[1],
                scnr_db: None,
                ..nominal.clone()
            };
            let columns = self.null_statistics(&cfg, &detectors, Stream::Evaluation, trials)?;
            estimates.push(
                columns
                    .iter()
                    .zip(&thresholds)
                    .map(|(stats, &eta)| estimate_rate(stats, eta))
                    .collect(),
            );
        }
        Ok(CurveResult {
            axis_names: vec!["cnr_db".into(), "rho".into()],
            points,
            detectors,
            estimates,
        })
    }

    /// Pd over an SCNR grid for targets along `v_true` (the nominal steering
    /// vector when `None`). Returns `[scnr][detector]`.
    fn detection_rates(
        &self,
        cal: &Calibration,
        pfa: f64,
        scnr_grid: &[f64],
        v_true: Option<&ComplexVector>,
        trials: usize,
    ) -> Result<Vec<Vec<RateEstimate>>> {
        if trials == 0 {
            return Err(Error::validation(
                "trials",
                "need at least one detection trial",
            ));
        }
        let cfg = cal.scenario().clone();
        let detectors = cal.detectors();
        let thresholds = cal.thresholds(&detectors, pfa)?;
        let m = build_covariance(&cfg);
        let eval = Evaluator::new(&cfg, &detectors, m.clone());
        let v_true = v_true.cloned().unwrap_or_else(|| eval.v.clone());
        let alphas = scnr_grid
            .iter()
            .map(|&s| target_amplitude(&v_true, &m, s, cfg.target_phase))
            .collect::<Result<Vec<_>>>()?;

        let hits = self.run_trials(trials, |t| {
            let noise = sample_batch_from(&cfg, &m, Stream::Evaluation, t)?;
            alphas
                .iter()
                .map(|&alpha| {
                    let stats = eval.evaluate(&inject_amplitude(&noise, &v_true, alpha))?;
                    Ok(stats
                        .iter()
                        .zip(&thresholds)
                        .map(|(s, eta)| s > eta)
                        .collect::<Vec<bool>>())
                })
                .collect::<Result<Vec<_>>>()
        })?;

        Ok((0..scnr_grid.len())
            .map(|i| {
                (0..detectors.len())
                    .map(|j| {
                        let count = hits.iter().filter(|h| h[i][j]).count();
                        RateEstimate::from_count(count, trials)
                    })
                    .collect()
            })
            .collect())
    }

    /// Pd versus SCNR for matched targets.
    pub fn pd_curve(
        &self,
        cal: &Calibration,
        pfa: f64,
        scnr_grid: &[f64],
        trials: usize,
    ) -> Result<CurveResult> {
        let estimates = self.detection_rates(cal, pfa, scnr_grid, None, trials)?;
        Ok(CurveResult {
            axis_names: vec!["scnr_db".into()],
            points: scnr_grid.iter().map(|&s| vec![s]).collect(),
            detectors: cal.detectors(),
            estimates,
        })
    }

    /// Pd over the `(cos²φ, SCNR)` grid, `cos²φ` major.
    pub fn mismatch_contour(
        &self,
        cal: &Calibration,
        pfa: f64,
        scnr_grid: &[f64],
        cos_sq_grid: &[f64],
        trials: usize,
    ) -> Result<CurveResult> {
        let cfg = cal.scenario();
        let m = build_covariance(cfg);
        let v = steering_vector(cfg.n, cfg.doppler_norm);
        let mut points = Vec::new();
        let mut estimates = Vec::new();
        for &cos_sq in cos_sq_grid {
            let v_true = mismatched_steering(&v, &m, cos_sq)?;
            let rows = self.detection_rates(cal, pfa, scnr_grid, Some(&v_true), trials)?;
            for (&scnr, row) in scnr_grid.iter().zip(rows) {
                points.push(vec![cos_sq, scnr]);
                estimates.push(row);
            }
        }
        Ok(CurveResult {
            axis_names: vec!["cos_sq_phi".into(), "scnr_db".into()],
            points,
            detectors: cal.detectors(),
            estimates,
        })
    }

    /// Mean `ΔL(l)` under H0 (`scnr_db = None`) or with a matched target.
    pub fn convergence_study(
        &self,
        cfg: &ScenarioConfig,
        scnr_db: Option<f64>,
        trials: usize,
        l_max: u32,
    ) -> Result<ConvergenceResult> {
        cfg.validate()?;
        if trials == 0 || l_max == 0 {
            return Err(Error::validation(
                "trials",
                "need at least one trial and one iteration",
            ));
        }
        let m = build_covariance(cfg);
        let v = steering_vector(cfg.n, cfg.doppler_norm);
        let alpha = match scnr_db {
            Some(s) => target_amplitude(&v, &m, s, cfg.target_phase)?,
            None => Complex64::new(0.0, 0.0),
        };
        let runs = self.run_trials(trials, |t| {
            let batch = inject_amplitude(
                &sample_batch_from(cfg, &m, Stream::Evaluation, t)?,
                &v,
                alpha,
            );
            let trace = run_em(&batch, &v, l_max)?;
            let monotone = trace
                .mixture_log_lik
                .windows(2)
                .all(|w| w[1] >= w[0] - 1e-9);
            Ok((trace.delta_l, monotone))
        })?;
        let mut mean = vec![0.0; l_max as usize];
        for (dl, _) in &runs {
            for (acc, x) in mean.iter_mut().zip(dl) {
                *acc += x;
            }
        }
        mean.iter_mut().for_each(|x| *x /= trials as f64);
        Ok(ConvergenceResult {
            scnr_db,
            trials,
            mean_delta_l: mean,
            non_monotone_trials: runs.iter().filter(|(_, ok)| !ok).count(),
        })
    }
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (col, x) in cols.iter_mut().zip(row) {
            col.push(x);
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rank_arithmetic() {
        let sorted: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(threshold_from_sorted(&sorted, 0.01).unwrap(), 9900.0);
        assert_eq!(estimate_rate(&sorted, 9900.0).rate, 0.01);
        let big: Vec<f64> = (1..=100_000).map(|i| i as f64).collect();
        assert_eq!(threshold_from_sorted(&big, 1e-3).unwrap(), 99_900.0);
        let short = &sorted[..9_999];
        assert!(matches!(
            threshold_from_sorted(short, 0.01),
            Err(Error::InsufficientTrials {
                trials: 9_999,
                required: 10_000
            })
        ));
    }

    #[test]
    fn median_threshold_on_symmetric_data() {
        let sorted: Vec<f64> = (-500..=500).map(|i| i as f64).collect();
        let eta = threshold_from_sorted(&sorted, 0.5).unwrap();
        assert!(eta.abs() <= 1.0);
    }

    #[test]
    fn rate_saturation() {
        let stats = [1.0, 2.0, 3.0];
        assert_eq!(
            estimate_rate(&stats, 0.0),
            RateEstimate {
                rate: 1.0,
                ci: 0.0,
                trials: 3
            }
        );
        assert_eq!(
            estimate_rate(&stats, 3.0),
            RateEstimate {
                rate: 0.0,
                ci: 0.0,
                trials: 3
            }
        );
        let half = estimate_rate(&[0.0, 1.0, 2.0, 3.0], 1.5);
        assert_eq!(half.rate, 0.5);
        assert!((half.ci - 0.49).abs() < 1e-15);
    }

    #[test]
    fn thresholds_decrease_with_pfa() {
        let h = Harness::new(1).unwrap();
        let cfg = ScenarioConfig::default();
        let dets = [
            DetectorId::Glrt,
            DetectorId::Benchmark,
            DetectorId::EmBml { l_max: 2 },
        ];
        let cal = h.calibrate(&cfg, &dets, &[0.1, 0.05, 0.5], 2000).unwrap();
        for d in dets {
            let row = &cal.table.entries[&d];
            assert!(
                row.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1),
                "{d}: {row:?}"
            );
            assert_eq!(cal.table.get(d, 0.1), Some(row[1].1));
        }
        assert!(h.calibrate(&cfg, &dets, &[0.01], 2000).is_err());
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let cfg = ScenarioConfig::default();
        let dets = [
            DetectorId::Amf,
            DetectorId::Rao,
            DetectorId::EmBml { l_max: 3 },
        ];
        let a = Harness::new(1)
            .unwrap()
            .null_statistics(&cfg, &dets, Stream::Calibration, 300)
            .unwrap();
        let b = Harness::new(3)
            .unwrap()
            .null_statistics(&cfg, &dets, Stream::Calibration, 300)
            .unwrap();
        assert_eq!(a, b);
    }
}
