use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use toda::field::McConfig;
use toda::gaussian::{
    coupled_circle_chaos, gauss_hermite, girsanov_verify, kahane_compare, negatively_coupled_pair,
    oracle_suite, random_quadratic_case, spot_check, CertifiedFunctional, GirsanovFunctional, QuadraticForm,
    SmallGaussianModel,
};
use toda::Error;

#[test]
fn kahane_is_an_equality_without_coupling() {
    let m = negatively_coupled_pair(0.0).unwrap();
    let r = kahane_compare(&m, &CertifiedFunctional::exp_product(), &McConfig::new(2000, 3)).unwrap();
    assert_eq!(r.lhs, r.rhs);
    assert_eq!(r.ratio, 1.0);
}

#[test]
fn kahane_pair_ratio_tracks_closed_form() {
    let m = negatively_coupled_pair(0.6).unwrap();
    let r = kahane_compare(&m, &CertifiedFunctional::exp_product(), &McConfig::new(40_000, 4)).unwrap();
    assert!(r.sigma <= 3.0);
    assert!((r.ratio - (-0.6f64).exp()).abs() <= 3.0 * r.ratio_stderr);
}

#[test]
fn kahane_holds_for_circle_chaos() {
    let m = coupled_circle_chaos(0.5).unwrap();
    let f = CertifiedFunctional::chaos_negative_moment(&m, vec![1.0 / 16.0; 16], 0.7);
    let r = kahane_compare(&m, &f, &McConfig::new(20_000, 5)).unwrap();
    assert!(r.sigma <= 3.0, "sigma {}", r.sigma);
}

#[test]
fn positive_coupling_is_rejected() {
    let m = negatively_coupled_pair(-0.3).unwrap();
    assert!(matches!(
        kahane_compare(&m, &CertifiedFunctional::exp_product(), &McConfig::new(10, 0)),
        Err(Error::Model(_))
    ));
}

#[test]
fn wrong_certificates_are_caught() {
    let m = negatively_coupled_pair(0.3).unwrap();
    let bad = CertifiedFunctional::new("minus_product", true, |x| -x[0] * x[1]);
    assert!(matches!(spot_check(&m, &bad, 1), Err(Error::Certificate(_))));
    let none = CertifiedFunctional::new("uncertified", false, |x| x[0] * x[1]);
    assert!(matches!(spot_check(&m, &none, 1), Err(Error::Certificate(_))));
    assert!(spot_check(&m, &CertifiedFunctional::new("product", true, |x| x[0] * x[1]), 1).is_ok());
}

#[test]
fn invalid_covariances_are_rejected() {
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
    assert!(SmallGaussianModel::new(2, 1, asym).is_err());
    let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(SmallGaussianModel::new(2, 1, indefinite).is_err());
    assert!(SmallGaussianModel::new(65, 1, DMatrix::identity(65, 65)).is_err());
}

#[test]
fn girsanov_closed_forms_agree_on_random_models() {
    for k in 0..50 {
        let (m, l, q) = random_quadratic_case(92, k).unwrap();
        let r = girsanov_verify(&m, &l, &GirsanovFunctional::Quadratic(q), &McConfig::new(2, 0)).unwrap();
        assert!(r.closed_form_deviation.unwrap() <= 1e-10, "case {k}: {:?}", r.closed_form_deviation);
    }
}

#[test]
fn girsanov_linear_functional_shift() {
    // F(x) = x: E[e^{Z−σ²/2} X] = Σλ.
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let m = SmallGaussianModel::new(1, 2, cov).unwrap();
    let q = QuadraticForm::new(0.0, DVector::from_column_slice(&[1.0, 0.0]), DMatrix::zeros(2, 2)).unwrap();
    let r = girsanov_verify(&m, &[0.5, -0.2], &GirsanovFunctional::Quadratic(q), &McConfig::new(20_000, 9)).unwrap();
    assert!((r.closed_form_shift.unwrap() - (0.5 - 0.06)).abs() < 1e-14);
    assert!(r.sigma.abs() <= 4.0);
}

#[test]
fn girsanov_general_functional_by_sampling() {
    let m = SmallGaussianModel::new(1, 1, DMatrix::from_element(1, 1, 1.0)).unwrap();
    let f = GirsanovFunctional::General(Arc::new(|x: &[f64]| if x[0].abs() < 1.0 { 1.0 } else { 0.0 }));
    let r = girsanov_verify(&m, &[0.8], &f, &McConfig::new(20_000, 10)).unwrap();
    assert!(r.closed_form_shift.is_none());
    assert!(r.sigma.abs() <= 4.0);
}

#[test]
fn hermite_rule_integrates_polynomials() {
    let (t, w) = gauss_hermite(20);
    let m = |p: i32| t.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
    let sp = std::f64::consts::PI.sqrt();
    assert!((m(0) - sp).abs() < 1e-13);
    assert!(m(3).abs() < 1e-13);
    assert!((m(4) - 0.75 * sp).abs() < 1e-12);
}

#[test]
fn oracle_suite_passes() {
    let l = oracle_suite(7, 20_000).unwrap();
    assert!(l.pass, "{:#?}", l.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn samples_are_reproducible(seed in any::<u64>(), k in 0u64..1000) {
        let m = coupled_circle_chaos(0.2).unwrap();
        prop_assert_eq!(m.sample(seed, k), m.sample(seed, k));
    }
}
