//! EM iteration over the latent target-presence class and the resulting
//! joint Bayesian/ML detector (EM-BML-D).
//!
//! The data model is the two-component mixture
//! `f(Z) = p0 f0(Z; M) + p1 f1(Z; α, M)` with both components sharing one
//! covariance. Because the determinant factors are shared, every
//! posterior ratio reduces to
//!
//! ```text
//! ln(q1/q0) = ln(p1/p0) + g(α, M),   g = z†M⁻¹z − (z−αv)†M⁻¹(z−αv)
//! ```
//!
//! which is evaluated in the log domain and never exponentiated except
//! through the logistic map.

use num_complex::Complex64;

use crate::detectors::{sample_covariance, DetectorId, DetectorStatistic, SampleCovariance};
use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, HermitianMatrix};
use crate::scenario::DataBatch;

/// Posteriors are kept inside `[FLOOR, 1 − FLOOR]` (to one rounding of `1 − FLOOR`).
pub const POSTERIOR_FLOOR: f64 = 1e-12;

/// Estimates after one M-step (or the initial guess).
#[derive(Clone, Debug)]
pub struct EmState {
    pub iteration: u32,
    /// `ln(p̂1 / p̂0)`
    pub log_prior_ratio: f64,
    pub alpha_hat: Complex64,
    pub m_hat: HermitianMatrix,
    /// `ln(q1 / q0)` implied by this state.
    pub log_post_ratio: f64,
}

impl EmState {
    /// `(ln p̂0, ln p̂1)`
    pub fn log_priors(&self) -> (f64, f64) {
        (
            -softplus(self.log_prior_ratio),
            -softplus(-self.log_prior_ratio),
        )
    }
}

/// E-step output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Posteriors {
    pub q0: f64,
    pub q1: f64,
    log_ratio: f64,
}

impl Posteriors {
    /// Clamped posteriors for a log ratio `ln(q1 / q0)`. `q0 + q1 == 1`
    /// holds exactly in floating point: the larger one comes from the
    /// logistic map and the smaller is its exact complement.
    pub fn from_log_ratio(x: f64) -> Self {
        let hi = 1.0 - POSTERIOR_FLOOR;
        let big = logistic(x.abs());
        let (big, log_ratio) = if big >= hi {
            (hi, hi.ln() - (1.0 - hi).ln())
        } else {
            (big, x.abs())
        };
        let small = 1.0 - big;
        if x >= 0.0 {
            Posteriors {
                q0: small,
                q1: big,
                log_ratio,
            }
        } else {
            Posteriors {
                q0: big,
                q1: small,
                log_ratio: -log_ratio,
            }
        }
    }

    /// `ln(q1 / q0)`, kept exact rather than recovered from the rounded
    /// complement.
    pub fn log_ratio(&self) -> f64 {
        self.log_ratio
    }
}

#[derive(Clone, Debug)]
pub struct EmTrace {
    /// States `0..=l_max`; index 0 is the initialization.
    pub states: Vec<EmState>,
    /// `ΔL(l)` for `l = 1..=l_max` (index `l − 1`).
    pub delta_l: Vec<f64>,
    /// Mixture log-likelihood of each state, `0..=l_max`.
    pub mixture_log_lik: Vec<f64>,
}

impl EmTrace {
    pub fn final_state(&self) -> &EmState {
        self.states
            .last()
            .expect("trace holds at least the initial state")
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    1.0 / (1.0 + (-x).exp())
}

/// `g(α, M)` through one whitening of `z` and `v`.
pub fn log_ratio_g(
    cut: &ComplexVector,
    v: &ComplexVector,
    m: &HermitianMatrix,
    alpha: Complex64,
) -> Result<f64> {
    let l = m.cholesky()?;
    let vw = l.forward_solve(v);
    let zw = l.forward_solve(cut);
    Ok(2.0 * (alpha.conj() * vw.dot(&zw)).re - alpha.norm_sqr() * vw.norm_sqr())
}

/// `v†A⁻¹z / v†A⁻¹v`.
fn projected_amplitude(
    a: &HermitianMatrix,
    v: &ComplexVector,
    z: &ComplexVector,
) -> Result<Complex64> {
    let l = a.cholesky()?;
    let vw = l.forward_solve(v);
    Ok(vw.dot(&l.forward_solve(z)) / vw.norm_sqr())
}

fn check_inputs(batch: &DataBatch, v: &ComplexVector) -> Result<()> {
    if v.len() != batch.n() {
        return Err(Error::DimensionMismatch {
            expected: batch.n(),
            actual: v.len(),
        });
    }
    Ok(())
}

/// Equal priors, `M̂ = S`, `α̂ = v†S⁻¹z / v†S⁻¹v`.
///
/// The implied log posterior ratio is `|v†S⁻¹z|² / v†S⁻¹v`, the AMF statistic.
pub fn initialize(batch: &DataBatch, v: &ComplexVector, s: &SampleCovariance) -> Result<EmState> {
    check_inputs(batch, v)?;
    let alpha_hat = projected_amplitude(&s.s, v, &batch.cut)?;
    let g = log_ratio_g(&batch.cut, v, &s.s, alpha_hat)?;
    Ok(EmState {
        iteration: 0,
        log_prior_ratio: 0.0,
        alpha_hat,
        m_hat: s.s.clone(),
        log_post_ratio: g,
    })
}

/// Posterior class probabilities from the state's log ratio, clamped.
pub fn e_step(state: &EmState) -> Posteriors {
    Posteriors::from_log_ratio(state.log_post_ratio)
}

/// Closed-form maximization of the expected complete-data log-likelihood.
///
/// With `ZZ† = zz† + S` and `q0 + q1 = 1`:
/// `A = q0 ZZ† + q1 S = S + q0 zz†`, then `α̂ = v†A⁻¹z / v†A⁻¹v`,
/// then `M̂ = (A + q1 (z−α̂v)(z−α̂v)†) / (K+1)` using the new `α̂`.
pub fn m_step(
    batch: &DataBatch,
    v: &ComplexVector,
    s: &SampleCovariance,
    post: Posteriors,
    iteration: u32,
) -> Result<EmState> {
    check_inputs(batch, v)?;
    let z = &batch.cut;
    let a = s.s.rank_one_update(post.q0, z);
    let alpha_hat = projected_amplitude(&a, v, z)?;
    let residual = z.add_scaled(-alpha_hat, v);
    let m_hat = a
        .rank_one_update(post.q1, &residual)
        .scaled(1.0 / (s.k as f64 + 1.0));
    let log_prior_ratio = post.log_ratio();
    let g = log_ratio_g(z, v, &m_hat, alpha_hat)?;
    Ok(EmState {
        iteration,
        log_prior_ratio,
        alpha_hat,
        m_hat,
        log_post_ratio: log_prior_ratio + g,
    })
}

/// `Tr(M⁻¹ S) = Σ_k z_k† M⁻¹ z_k`.
fn trace_inv_scatter(batch: &DataBatch, m: &HermitianMatrix) -> Result<f64> {
    let l = m.cholesky()?;
    Ok(batch
        .secondary
        .iter()
        .map(|zk| l.forward_solve(zk).norm_sqr())
        .sum())
}

/// M-step objective with the weights held fixed:
/// `−(K+1) ln det M − Tr(M⁻¹[q0 ZZ† + q1((z−αv)(z−αv)† + S)])`.
pub fn surrogate_objective(
    batch: &DataBatch,
    v: &ComplexVector,
    alpha: Complex64,
    m: &HermitianMatrix,
    post: Posteriors,
) -> Result<f64> {
    let k1 = batch.k() as f64 + 1.0;
    let zz = m.quad_form_real(&batch.cut)?;
    let rr = m.quad_form_real(&batch.cut.add_scaled(-alpha, v))?;
    let tr_s = trace_inv_scatter(batch, m)?;
    Ok(-k1 * m.log_det()? - (post.q0 * zz + post.q1 * rr + tr_s))
}

/// `ln(p̂0 f0 + p̂1 f1)` with full Gaussian densities, in the log domain.
pub fn mixture_log_likelihood(
    batch: &DataBatch,
    v: &ComplexVector,
    state: &EmState,
) -> Result<f64> {
    let (n, k1) = (batch.n() as f64, batch.k() as f64 + 1.0);
    let m = &state.m_hat;
    let norm = -k1 * (n * std::f64::consts::PI.ln() + m.log_det()?);
    let tr_s = trace_inv_scatter(batch, m)?;
    let log_f0 = norm - m.quad_form_real(&batch.cut)? - tr_s;
    let log_f1 = norm - m.quad_form_real(&batch.cut.add_scaled(-state.alpha_hat, v))? - tr_s;
    let (lp0, lp1) = state.log_priors();
    let (a, b) = (lp0 + log_f0, lp1 + log_f1);
    let hi = a.max(b);
    Ok(hi + ((a - hi).exp() + (b - hi).exp()).ln())
}

/// Full EM run with convergence diagnostics.
pub fn run_em(batch: &DataBatch, v: &ComplexVector, l_max: u32) -> Result<EmTrace> {
    let s = sample_covariance(batch)?;
    let mut state = initialize(batch, v, &s)?;
    let mut trace = EmTrace {
        states: Vec::with_capacity(l_max as usize + 1),
        delta_l: Vec::with_capacity(l_max as usize),
        mixture_log_lik: vec![mixture_log_likelihood(batch, v, &state)?],
    };
    for l in 1..=l_max {
        let post = e_step(&state);
        let before = surrogate_objective(batch, v, state.alpha_hat, &state.m_hat, post)?;
        let next = m_step(batch, v, &s, post, l)?;
        let after = surrogate_objective(batch, v, next.alpha_hat, &next.m_hat, post)?;
        trace.delta_l.push(((after - before) / after).abs());
        trace
            .mixture_log_lik
            .push(mixture_log_likelihood(batch, v, &next)?);
        trace.states.push(std::mem::replace(&mut state, next));
    }
    trace.states.push(state);
    Ok(trace)
}

/// Final-state log posterior ratio `ln(p̂1/p̂0) + g(α̂, M̂)`.
pub fn em_bml_statistic(trace: &EmTrace) -> DetectorStatistic {
    let last = trace.final_state();
    DetectorStatistic {
        detector: DetectorId::EmBml {
            l_max: last.iteration,
        },
        value: last.log_post_ratio,
    }
}

/// EM-BML-D statistics for several iteration counts from a single chain,
/// skipping diagnostics. `l_maxes` need not be sorted.
pub fn em_statistics(
    batch: &DataBatch,
    v: &ComplexVector,
    s: &SampleCovariance,
    l_maxes: &[u32],
) -> Result<Vec<f64>> {
    let deepest = l_maxes.iter().copied().max().unwrap_or(0);
    let mut by_iteration = Vec::with_capacity(deepest as usize + 1);
    let mut state = initialize(batch, v, s)?;
    by_iteration.push(state.log_post_ratio);
    for l in 1..=deepest {
        state = m_step(batch, v, s, e_step(&state), l)?;
        by_iteration.push(state.log_post_ratio);
    }
    Ok(l_maxes.iter().map(|&l| by_iteration[l as usize]).collect())
}
