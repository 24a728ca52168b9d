mod common;

use common::*;
use proptest::prelude::*;
use thinrein_core::{derive_constants, ClaimClass, ClaimDistribution, Error, GeneralClaims, Model, ModelParams};

fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    // composite Simpson, fine enough for smooth integrands on short ranges
    let n = 20_000;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn truncated_moments_match_quadrature() {
    for rate in [1.0, 2.0] {
        let d = ClaimDistribution::exponential(rate);
        for q in [0.05, 0.5, 1.0, 3.7, 12.0] {
            let g = quad(|x| (-rate * x).exp(), 0.0, q);
            let big_g = quad(|x| 2.0 * x * (-rate * x).exp(), 0.0, q);
            assert!((d.g(q) - g).abs() < 1e-10, "g({q})");
            assert!((d.g2m(q) - big_g).abs() < 1e-10, "G({q})");
        }
        assert_eq!(d.g(f64::INFINITY), 1.0 / rate);
    }
}

#[test]
fn general_survival_reproduces_exponential_moments() {
    let exact = ClaimDistribution::exponential(2.0);
    let general = ClaimDistribution::General(GeneralClaims::new(|x| (-2.0 * x).exp(), 1e-12).unwrap());
    assert!((general.mean() - 0.5).abs() < 1e-10);
    assert!((general.second_moment() - 0.5).abs() < 1e-10);
    for q in [1e-3, 0.3, 2.0, 9.0] {
        assert!((general.g(q) - exact.g(q)).abs() < 1e-10);
        assert!((general.g2m(q) - exact.g2m(q)).abs() < 1e-10);
    }
}

#[test]
fn invalid_survival_is_rejected() {
    assert!(GeneralClaims::new(|x| 0.5 * (-x).exp(), 1e-10).is_err());
}

#[test]
fn base_constants() {
    let c = derive_constants(&base()).unwrap();
    assert_eq!((c.c1, c.c2, c.c3), (5.0, 6.0, 2.0));
    assert!((c.big_k2 - 7.4).abs() < 1e-12);
    assert!((c.big_k1 - 7.5).abs() < 1e-12);
    assert!((c.r_plus - 0.0635).abs() < 1e-4 && (c.r_minus + 1.0501).abs() < 1e-4);
    for r in [c.r_plus, c.r_minus] {
        assert!((c.big_k1 * r * r + c.big_k2 * r - ECON.discount).abs() < 1e-12);
    }
}

#[test]
fn validation_names_the_field() {
    let mut p = base();
    p.econ.tax_retention = 1.5;
    match p.validate() {
        Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "economics.tax_retention"),
        other => panic!("{other:?}"),
    }
    let mut p = base();
    p.classes[1] = ClaimClass::exponential(2.0, 1.0, 0.9);
    match p.validate() {
        Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "classes[1].reinsurer_loading"),
        other => panic!("{other:?}"),
    }
    let mut p = base();
    p.thinning.intensities[0] = -1.0;
    assert!(matches!(Model::new(&p), Err(Error::InvalidParameter { .. })));
}

fn swapped(p: &ModelParams) -> ModelParams {
    let mut q = p.clone();
    q.classes.swap(0, 1);
    for pr in &mut q.thinning.probabilities {
        pr.swap(0, 1);
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_moments_are_monotone_and_bounded(rate in 0.1f64..10.0, a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let d = ClaimDistribution::exponential(rate);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(d.g(lo) <= d.g(hi));
        prop_assert!(d.g2m(lo) <= d.g2m(hi) + 1e-15);
        prop_assert!(d.g(hi) <= hi.min(d.mean()) + 1e-15);
        prop_assert!(d.g2m(hi) <= d.second_moment() * (1.0 + 1e-12));
        prop_assert!(d.g(hi) * d.g(hi) <= d.g2m(hi) * (1.0 + 1e-12));
    }

    #[test]
    fn relabeling_is_invisible(lambda3 in 0.1f64..5.0, theta1 in 1.05f64..3.0) {
        let p = example(lambda3, theta1);
        let a = derive_constants(&p).unwrap();
        let b = derive_constants(&swapped(&p)).unwrap();
        prop_assert!((a.big_k1 - b.big_k1).abs() < 1e-12);
        prop_assert!((a.r_plus - b.r_plus).abs() < 1e-12);
        prop_assert_eq!(a.case, b.case);
    }

    #[test]
    fn drift_and_variance_grow_with_retention(q1 in 0.0f64..10.0, q2 in 0.0f64..10.0, dq in 0.0f64..1.0) {
        let m = Model::new(&base()).unwrap();
        prop_assert!(m.drift(q1 + dq, q2) >= m.drift(q1, q2) - 1e-12);
        prop_assert!(m.variance(q1 + dq, q2) >= m.variance(q1, q2) - 1e-12);
        prop_assert!(m.drift(q1, q2) >= m.k0() - 1e-12 && m.drift(q1, q2) <= m.big_k2() + 1e-12);
        prop_assert!(m.variance(q1, q2) <= m.big_k1() * 2.0 * (1.0 + 1e-12));
    }
}
