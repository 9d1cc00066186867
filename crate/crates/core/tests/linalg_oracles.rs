mod common;

use common::*;
use embml::linalg::{ComplexVector, HermitianMatrix};
use embml::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn eigenvalues(m: &CMat) -> Vec<f64> {
    let mut e: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_reconstructs(seed in any::<u64>(), n in 1usize..12) {
        let m = random_pd(&mut rng(seed), n, 0.1);
        let l = m.cholesky().unwrap();
        let dense = CMat::from_row_slice(n, n, &l.to_dense());
        let err = max_abs(&(&dense * dense.adjoint() - to_na(&m)));
        prop_assert!(err <= 1e-12 * max_abs(&to_na(&m)).max(1.0), "err {err}");
        for i in 0..n {
            prop_assert!(l.get(i, i).re > 0.0 && l.get(i, i).im == 0.0);
            for j in i + 1..n {
                prop_assert_eq!(l.get(i, j), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn solve_residual(seed in any::<u64>(), n in 1usize..12) {
        let mut r = rng(seed);
        let m = random_pd(&mut r, n, 0.1);
        let b = random_vector(&mut r, n);
        let x = m.solve(&b).unwrap();
        let resid = (to_na(&m) * col(&x) - col(&b)).norm();
        prop_assert!(resid <= 1e-9 * (max_abs(&to_na(&m)) * x.norm()).max(b.norm()), "resid {resid}");
    }

    #[test]
    fn log_det_matches_eigenvalues(seed in any::<u64>(), n in 1usize..12) {
        let m = random_pd(&mut rng(seed), n, 0.1);
        let from_eig: f64 = eigenvalues(&to_na(&m)).iter().map(|l| l.ln()).sum();
        let ours = m.log_det().unwrap();
        prop_assert!((ours - from_eig).abs() <= 1e-9 * from_eig.abs().max(1.0));
    }

    #[test]
    fn log_det_scaling(seed in any::<u64>(), n in 1usize..12, c in 0.01f64..100.0) {
        let m = random_pd(&mut rng(seed), n, 0.1);
        let lhs = m.scaled(c).log_det().unwrap();
        let rhs = n as f64 * c.ln() + m.log_det().unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn rank_one_update_interlaces(seed in any::<u64>(), n in 1usize..10, w in 0.0f64..5.0) {
        let mut r = rng(seed);
        let m = random_pd(&mut r, n, 0.5);
        let x = random_vector(&mut r, n);
        let before = eigenvalues(&to_na(&m));
        let after = eigenvalues(&to_na(&m.rank_one_update(w, &x)));
        let bump = w * x.norm_sqr();
        let tol = 1e-9 * (before[n - 1] + bump);
        for i in 0..n {
            prop_assert!(after[i] >= before[i] - tol);
            prop_assert!(after[i] <= before[i] + bump + tol);
            if i + 1 < n {
                prop_assert!(after[i] <= before[i + 1] + tol);
            }
        }
    }

    #[test]
    fn quad_form_conjugate_symmetry(seed in any::<u64>(), n in 1usize..12) {
        let mut r = rng(seed);
        let m = random_pd(&mut r, n, 0.1);
        let a = random_vector(&mut r, n);
        let b = random_vector(&mut r, n);
        let ab = m.quad_form(&a, &b).unwrap();
        let ba = m.quad_form(&b, &a).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-10 * ab.norm().max(1.0));
        let direct = form(&a, &inverse(&m), &b);
        prop_assert!((ab - direct).norm() <= 1e-8 * direct.norm().max(1.0));
        prop_assert!(m.quad_form_real(&a).unwrap() >= 0.0);
    }

    #[test]
    fn congruence_matches_dense(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let m = random_pd(&mut r, n, 0.1);
        let b = random_square(&mut r, n, 1.0);
        let bn = rows_to_na(n, &b);
        let expected = &bn * to_na(&m) * bn.adjoint();
        let err = max_abs(&(to_na(&m.congruence(&b)) - &expected));
        prop_assert!(err <= 1e-12 * max_abs(&expected).max(1.0));
    }
}

#[test]
fn non_positive_definite_is_rejected() {
    let m = HermitianMatrix::diagonal(&[1.0, -1.0]);
    assert!(matches!(
        m.cholesky(),
        Err(Error::NotPositiveDefinite { pivot: 1, .. })
    ));
    let x = ComplexVector::from_real(&[1.0, 1.0]);
    let singular = HermitianMatrix::zeros(2).rank_one_update(1.0, &x);
    assert!(!singular.is_positive_definite());
    assert!(matches!(
        HermitianMatrix::identity(2).solve(&ComplexVector::zeros(3)),
        Err(Error::DimensionMismatch {
            expected: 2,
            actual: 3
        })
    ));
}
