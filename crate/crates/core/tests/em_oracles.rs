mod common;

use common::props::{self, em_states};
use common::*;
use embml::detectors::sample_covariance;
use embml::em::*;
use embml::linalg::{ComplexVector, HermitianMatrix};
use embml::scenario::*;
use num_complex::Complex64;

#[test]
fn e_step_matches_density_ratio() {
    let checked = props::e_step_matches_brute_force(0..100).unwrap();
    assert!(checked >= 100, "only {checked} unsaturated states");
}

#[test]
fn alpha_update_is_locally_optimal() {
    props::alpha_locally_optimal(0..100).unwrap();
}

#[test]
fn m_step_matches_direct_formula() {
    for seed in 0..30 {
        let (batch, v, states) = em_states(seed);
        let s = sample_covariance(&batch).unwrap();
        let post = e_step(&states[0]);
        let next = m_step(&batch, &v, &s, post, 1).unwrap();
        let z = col(&batch.cut);
        let zz = &z * z.adjoint() + scatter_na(&batch);
        let a =
            &zz * Complex64::new(post.q0, 0.0) + scatter_na(&batch) * Complex64::new(post.q1, 0.0);
        let ai = a.clone().try_inverse().unwrap();
        let alpha = form(&v, &ai, &batch.cut) / form(&v, &ai, &v);
        assert!((alpha - next.alpha_hat).norm() <= 1e-9 * alpha.norm().max(1.0));
        let r = col(&batch.cut.add_scaled(-alpha, &v));
        let k1 = Complex64::new(batch.k() as f64 + 1.0, 0.0);
        let m = (&zz * Complex64::new(post.q0, 0.0)
            + (&r * r.adjoint() + scatter_na(&batch)) * Complex64::new(post.q1, 0.0))
            / k1;
        let err = (to_na(&next.m_hat) - &m).norm() / m.norm();
        assert!(err < 1e-12, "seed {seed}: {err}");
        assert_eq!(next.log_prior_ratio, post.log_ratio());
    }
}

#[test]
fn m_step_null_limit() {
    let (batch, v, _) = em_states(0);
    let s = sample_covariance(&batch).unwrap();
    let post = Posteriors::from_log_ratio(f64::NEG_INFINITY);
    let next = m_step(&batch, &v, &s, post, 1).unwrap();
    let z = col(&batch.cut);
    let h0 = (&z * z.adjoint() + scatter_na(&batch)) / Complex64::new(batch.k() as f64 + 1.0, 0.0);
    assert!((to_na(&next.m_hat) - &h0).norm() / h0.norm() < 1e-10);
}

#[test]
fn final_statistic_matches_direct_formula() {
    for seed in 0..100 {
        let (batch, v, _) = em_states(seed);
        let trace = run_em(&batch, &v, 5).unwrap();
        let last = trace.final_state();
        let mi = inverse(&last.m_hat);
        let z = &batch.cut;
        let r = z.add_scaled(-last.alpha_hat, &v);
        let direct = last.log_prior_ratio + form(z, &mi, z).re - form(&r, &mi, &r).re;
        let ours = em_bml_statistic(&trace);
        assert_eq!(ours.detector, embml::DetectorId::EmBml { l_max: 5 });
        assert!(
            rel_err(ours.value, direct) < 1e-8,
            "seed {seed}: {} vs {direct}",
            ours.value
        );
        let s = sample_covariance(&batch).unwrap();
        let fast = em_statistics(&batch, &v, &s, &[5, 2]).unwrap();
        assert_eq!(fast[0], ours.value);
        assert_eq!(fast[1], trace.states[2].log_post_ratio);
    }
}

#[test]
fn null_state_gives_zero() {
    let st = EmState {
        iteration: 3,
        log_prior_ratio: 0.0,
        alpha_hat: Complex64::new(0.0, 0.0),
        m_hat: HermitianMatrix::identity(4),
        log_post_ratio: 0.0,
    };
    let v = ComplexVector::basis(4, 0);
    assert_eq!(
        log_ratio_g(&ComplexVector::basis(4, 1), &v, &st.m_hat, st.alpha_hat).unwrap(),
        0.0
    );
    let q = e_step(&st);
    assert_eq!((q.q0, q.q1), (0.5, 0.5));
}

#[test]
fn posteriors_sum_to_one_and_likelihood_is_monotone() {
    props::posteriors_and_monotone_likelihood(0..1000).unwrap();
}

#[test]
fn mismatch_round_trip() {
    props::mismatch_round_trip(0..25).unwrap();
    let v = steering_vector(8, 0.1);
    assert!(mismatched_steering(&v, &build_covariance(&scene(0)), 1.5).is_err());
}

// Red: under H0 the chain keeps pushing p̂1 toward 1, so iterations 5 and 7
// differ by more than 1e-3 on most unsaturated trials.
#[test]
#[ignore = "known failure, reported by the acceptance property check"]
fn five_and_seven_iterations_agree_under_h0() {
    let close = props::h0_variant_agreement(2000);
    assert!(close as f64 >= 0.99 * 2000.0, "{close} of 2000 within 1e-3");
}
