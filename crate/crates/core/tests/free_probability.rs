use approx::assert_abs_diff_eq;
use mismatch_core::free_prob::*;
use mismatch_core::Error;
use proptest::prelude::*;

#[test]
fn semicircle_edges_and_mass() {
    let sc = semicircle_measure();
    assert_eq!(sc.support(), (-2.0, 2.0));
    assert_abs_diff_eq!(sc.hilbert(2.0).unwrap(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(sc.hilbert(-2.0).unwrap(), -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(sc.expect(&mut |_| 1.0).unwrap(), 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(sc.variance().unwrap(), 1.0, epsilon = 1e-10);
}

#[test]
fn semicircle_hilbert_matches_quadrature() {
    let sc = semicircle_measure();
    assert_abs_diff_eq!(sc.hilbert(2.5).unwrap(), 0.5, epsilon = 1e-14);
    let dm = DensityMeasure::normalized(-2.0, 2.0, |t| (4.0 - t * t).max(0.0).sqrt()).unwrap();
    for z in [-7.0, -2.5, 2.0, 2.5, 3.0, 10.0] {
        assert_abs_diff_eq!(dm.hilbert(z).unwrap(), sc.hilbert(z).unwrap(), epsilon = 1e-10);
    }
    assert!(matches!(sc.hilbert(0.3), Err(Error::InsideSupport { .. })));
}

#[test]
fn hilbert_decays_like_inverse() {
    let sc = semicircle_measure();
    for z in [1e3, 1e5, -1e4] {
        assert_abs_diff_eq!(sc.hilbert(z).unwrap() * z, 1.0, epsilon = 1e-5);
    }
}

#[test]
fn r_transform_examples() {
    let sc = semicircle_measure();
    assert_abs_diff_eq!(r_transform(&sc, 0.5).unwrap(), 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(r_transform(&sc, 1e-9).unwrap(), 0.0, epsilon = 1e-8);
    assert_abs_diff_eq!(r_transform(&sc, 1.0).unwrap(), 1.0, epsilon = 1e-9);
    assert!(matches!(r_transform(&sc, 1.2), Err(Error::OutOfRange { .. })));
}

#[test]
fn nu_examples() {
    let sc = semicircle_measure();
    let nu = |two_theta: f64| gm_nu(&GMInput::from_measure(&sc, two_theta / 2.0).unwrap()).unwrap();
    assert_abs_diff_eq!(nu(0.5), 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(nu(1.0), 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(nu(2.0), 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(nu(-2.0), -1.5, epsilon = 1e-12);
}

fn closed_form_limit(theta: f64) -> f64 {
    let a = (2.0 * theta).abs();
    if a <= 1.0 {
        theta * theta
    } else {
        a - 0.75 - 0.5 * a.ln()
    }
}

#[test]
fn gm_limit_examples() {
    let sc = semicircle_measure();
    assert_eq!(gm_limit(&GMInput::from_measure(&sc, 0.0).unwrap()).unwrap(), 0.0);
    for two_theta in [0.5, 2.0] {
        let theta = two_theta / 2.0;
        let nu = gm_nu(&GMInput::from_measure(&sc, theta).unwrap()).unwrap();
        let direct = theta * nu - 0.5 * sc.expect(&mut |t| (1.0 + 2.0 * theta * nu - 2.0 * theta * t).ln()).unwrap();
        let v = gm_limit(&GMInput::from_measure(&sc, theta).unwrap()).unwrap();
        assert_abs_diff_eq!(v, direct, epsilon = 1e-10);
        assert_abs_diff_eq!(v, closed_form_limit(theta), epsilon = 1e-9);
    }
}

#[test]
fn gm_limit_on_numeric_measure() {
    let sc = semicircle_measure();
    let dm = DensityMeasure::normalized(-2.0, 2.0, |t| (4.0 - t * t).max(0.0).sqrt()).unwrap();
    for theta in [0.1, 0.4, 1.0, -0.8] {
        let a = gm_limit(&GMInput::from_measure(&dm, theta).unwrap()).unwrap();
        let b = gm_limit(&GMInput::from_measure(&sc, theta).unwrap()).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
    }
}

#[test]
fn deformed_edge_examples() {
    let e = deformed_edge(0.5).unwrap();
    assert_eq!((e.gamma_min, e.gamma_max, e.h_min, e.h_max), (-2.0, 2.0, -1.0, 1.0));
    assert_eq!(deformed_edge(1.0).unwrap().gamma_max, 2.0);
    assert_abs_diff_eq!(deformed_edge(1.0 + 1e-12).unwrap().gamma_max, 2.0, epsilon = 1e-12);
    let e = deformed_edge(2.0).unwrap();
    assert_eq!((e.gamma_max, e.h_max), (2.5, 0.5));
    assert!(deformed_edge(-0.1).is_err());
}

#[test]
fn spiked_edges_shift_the_saturation_point() {
    let sc = semicircle_measure();
    let edges = deformed_edge(2.0).unwrap();
    // 2θ = 0.8 > H_max = 0.5: ν = γ_max - 1/(2θ).
    let input = GMInput::with_edges(&sc, 0.4, edges).unwrap();
    assert_abs_diff_eq!(gm_nu(&input).unwrap(), 2.5 - 1.25, epsilon = 1e-12);
    assert!(gm_limit(&input).unwrap().is_finite());
}

proptest! {
    #[test]
    fn hilbert_round_trip(z in -0.999f64..0.999) {
        prop_assume!(z.abs() > 1e-3);
        let sc = semicircle_measure();
        let x = r_transform(&sc, z).unwrap() + 1.0 / z;
        prop_assert!((sc.hilbert(x).unwrap() - z).abs() <= 1e-8);
    }

    #[test]
    fn hilbert_is_decreasing(a in 2.0f64..50.0, d in 1e-3f64..10.0) {
        let sc = semicircle_measure();
        prop_assert!(sc.hilbert(a + d).unwrap() < sc.hilbert(a).unwrap());
        prop_assert!(sc.hilbert(-a).unwrap() < sc.hilbert(-a - d).unwrap());
    }

    #[test]
    fn nu_is_continuous_at_saturation(eps in 1e-12f64..1e-9, side in prop::bool::ANY) {
        let sc = semicircle_measure();
        let edge = if side { 0.5 } else { -0.5 };
        let lo = gm_nu(&GMInput::from_measure(&sc, edge - eps).unwrap()).unwrap();
        let hi = gm_nu(&GMInput::from_measure(&sc, edge + eps).unwrap()).unwrap();
        prop_assert!((lo - hi).abs() <= 1e-8);
    }

    #[test]
    fn gm_limit_is_nondecreasing(t in 0.0f64..3.0, d in 1e-3f64..0.5) {
        let sc = semicircle_measure();
        let a = gm_limit(&GMInput::from_measure(&sc, t).unwrap()).unwrap();
        let b = gm_limit(&GMInput::from_measure(&sc, t + d).unwrap()).unwrap();
        prop_assert!(b >= a - 1e-12);
    }
}
