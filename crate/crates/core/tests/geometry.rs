use num_complex::Complex64;
use proptest::prelude::*;

use toda::geometry::{
    chordal_distance, from_sphere, green_mobius_check, green_round, liouville_functional, round_metric, to_sphere,
    ConformalFactor, GeneralKernel, MobiusMap, SphereGrid,
};

fn point() -> impl Strategy<Value = Complex64> {
    (-4.0f64..4.0, -4.0f64..4.0).prop_map(|(a, b)| Complex64::new(a, b))
}

fn mobius() -> impl Strategy<Value = MobiusMap> {
    (point(), point(), point(), point()).prop_filter_map("degenerate", |(a, b, c, d)| {
        if (a * d - b * c).norm() < 0.1 {
            return None;
        }
        MobiusMap::new(a, b, c, d).ok()
    })
}

proptest! {
    #[test]
    fn green_is_symmetric(x in point(), y in point()) {
        prop_assume!(x != y);
        prop_assert_eq!(green_round(x, y).unwrap(), green_round(y, x).unwrap());
    }

    #[test]
    fn green_transforms_under_mobius(psi in mobius(), x in point(), y in point()) {
        prop_assume!((x - y).norm() > 1e-3);
        if let Ok(r) = green_mobius_check(&psi, x, y) {
            prop_assert!(r.abs() < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn mobius_inverse_and_composition(psi in mobius(), phi in mobius(), x in point()) {
        let y = psi.apply(x);
        prop_assume!(y.is_ok());
        let y = y.unwrap();
        prop_assume!(y.norm() < 1e6);
        let back = psi.inverse().apply(y).unwrap();
        prop_assert!((back - x).norm() < 1e-7 * (1.0 + x.norm() + y.norm()));
        if let (Ok(a), Ok(b)) = (psi.compose(&phi).apply(x), phi.apply(x).and_then(|w| psi.apply(w))) {
            prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()).powi(2));
        }
    }

    #[test]
    fn pullback_preserves_round_metric_under_rotation(x in point(), t in 0.0f64..6.28) {
        // z ↦ (cos t z − sin t)/(sin t z + cos t) is a rotation of the sphere.
        let (c, s) = (t.cos(), t.sin());
        let psi = MobiusMap::new(c.into(), (-s).into(), s.into(), c.into()).unwrap();
        prop_assume!(!psi.is_pole(x) && (s * x + c).norm() > 1e-3);
        let y = psi.apply(x).unwrap();
        let lhs = psi.pullback_factor(x).unwrap() * round_metric(y);
        prop_assert!((lhs / round_metric(x) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stereographic_round_trip(x in point()) {
        prop_assert!((from_sphere(to_sphere(x)) - x).norm() < 1e-12 * (1.0 + x.norm_sqr()));
    }

    #[test]
    fn chordal_distance_is_a_metric(x in point(), y in point(), z in point()) {
        prop_assert!(chordal_distance(x, y) <= 2.0 + 1e-15);
        prop_assert!(chordal_distance(x, z) <= chordal_distance(x, y) + chordal_distance(y, z) + 1e-12);
    }
}

#[test]
fn grid_volume_and_resolution() {
    for n in [64, 500, 2048] {
        let g = SphereGrid::fibonacci(n).unwrap();
        assert!((g.total_volume() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((g.cell_radius() - 2.0 / (n as f64).sqrt()).abs() < 1e-15);
    }
    assert!(SphereGrid::fibonacci(3).is_err());
}

#[test]
fn liouville_functional_of_constants_and_bumps() {
    let g = SphereGrid::fibonacci(4096).unwrap();
    let c = liouville_functional(&ConformalFactor::constant(0.7), &g);
    assert!((c - 16.0 * std::f64::consts::PI * 0.7).abs() < 1e-10);
    // S_L(a/(1+|x|²)) = 2πa²/3 + 8πa.
    let a = 0.4;
    let s = liouville_functional(&ConformalFactor::bump(a), &g);
    let exact = 2.0 * std::f64::consts::PI * a * a / 3.0 + 8.0 * std::f64::consts::PI * a;
    assert!((s / exact - 1.0).abs() < 1e-3, "{s} vs {exact}");
}

#[test]
fn general_kernel_of_constant_factor_is_shifted_round_kernel() {
    // For g = e^c ĝ, the v_g-mean-zero Green kernel is the round one.
    let g = SphereGrid::fibonacci(2048).unwrap();
    let k0 = GeneralKernel::new(&ConformalFactor::zero(), &g).unwrap();
    let kc = GeneralKernel::new(&ConformalFactor::constant(0.9), &g).unwrap();
    let (x, y) = (Complex64::new(0.3, -0.2), Complex64::new(-1.1, 0.8));
    assert!((k0.green(x, y).unwrap() - kc.green(x, y).unwrap()).abs() < 1e-10);
    assert!((kc.volume() - 4.0 * std::f64::consts::PI * 0.9f64.exp()).abs() < 1e-9);
}
