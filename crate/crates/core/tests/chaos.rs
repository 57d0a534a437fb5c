use num_complex::Complex64;

use toda::chaos::{gmc_from_sample, shift_measure, vertex_threshold_probe, Regime};
use toda::field::{build_covariance, map_replicas, pair_with_girsanov_shift, sample, FieldSample, McConfig};
use toda::geometry::SphereGrid;
use toda::insertion::Insertion;
use toda::lie::{AlgebraData, Basis, CartanVector};
use toda::stats::mean_stderr;

#[test]
fn shifted_measure_equals_measure_of_shifted_field() {
    let grid = SphereGrid::fibonacci(256).unwrap();
    let d = AlgebraData::from_name("A2").unwrap();
    let model = build_covariance(&grid, &d, None).unwrap();
    let alpha = CartanVector::new(&d, Basis::SimpleRoot, &[0.7, 0.3]).unwrap();
    let z = Complex64::new(0.31, -0.17);
    let gamma = 0.6;
    let shift = pair_with_girsanov_shift(&model, &alpha, z).unwrap();
    for k in 0..5 {
        let s = sample(&model, 12, k);
        let shifted = shift_measure(&gmc_from_sample(&s, &model, gamma).unwrap(), &[Insertion::new(z, alpha.clone())], &model).unwrap();
        let values: Vec<f64> = s.values.iter().zip(&shift).map(|(x, h)| x + h).collect();
        let moved = gmc_from_sample(&FieldSample { values, ..s }, &model, gamma).unwrap();
        for i in 0..2 {
            for n in 0..model.len() {
                assert!((shifted.log_mass(i, n) - moved.log_mass(i, n)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn tilting_by_a_node_value_shifts_the_field_in_law() {
    // Z = a X_1(x_m) on sl_2, so E[Z X_1(x_n)] = 2a K_nm.
    let grid = SphereGrid::fibonacci(256).unwrap();
    let d = AlgebraData::from_name("A1").unwrap();
    let model = build_covariance(&grid, &d, None).unwrap();
    let (a, m, gamma) = (0.4, 37, 0.5);
    let k = model.spatial_factor();
    let var = 2.0 * a * a * k[(m, m)];
    let n = model.len();
    let shift: Vec<f64> = (0..n).map(|j| 2.0 * a * k[(j, m)]).collect();
    let mc = McConfig::new(40_000, 21);
    let rows = map_replicas(&model, &mc, |r, v| {
        let s = FieldSample { values: v.to_vec(), rank: 1, n, seed: 21, replica_index: r };
        let tilt = (a * v[m] - 0.5 * var).exp();
        let plain = gmc_from_sample(&s, &model, gamma).unwrap().total_mass(0);
        let moved: Vec<f64> = v.iter().zip(&shift).map(|(x, h)| x + h).collect();
        let shifted = gmc_from_sample(&FieldSample { values: moved, ..s }, &model, gamma).unwrap().total_mass(0);
        [tilt * plain, tilt * plain * plain, shifted, shifted * shifted]
    });
    for p in 0..2 {
        let lhs = mean_stderr(&rows.iter().map(|r| r[p]).collect::<Vec<_>>());
        let rhs = mean_stderr(&rows.iter().map(|r| r[p + 2]).collect::<Vec<_>>());
        let z = (lhs.mean - rhs.mean) / lhs.stderr.hypot(rhs.stderr);
        assert!(z.abs() <= 4.0, "moment {}: {} vs {} ({z:.2}σ)", p + 1, lhs.mean, rhs.mean);
    }
}

#[test]
fn threshold_probe_regimes() {
    let mc = McConfig::new(400, 5);
    let sub = vertex_threshold_probe(1.0, 1024, &mc).unwrap();
    assert_eq!(sub.regime, Regime::Subcritical);
    assert_eq!(sub.consistent, Some(true), "{sub:?}");
    let sup = vertex_threshold_probe(9.0, 1024, &mc).unwrap();
    assert_eq!(sup.regime, Regime::Supercritical);
    assert_eq!(sup.consistent, Some(true), "{sup:?}");
    let edge = vertex_threshold_probe(4.1, 1024, &McConfig::new(20, 5)).unwrap();
    assert_eq!(edge.consistent, None);
    assert!(vertex_threshold_probe(0.0, 1024, &mc).is_err());
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let grid = SphereGrid::fibonacci(256).unwrap();
    let d = AlgebraData::from_name("A2").unwrap();
    let model = build_covariance(&grid, &d, None).unwrap();
    let f = |w: usize| {
        map_replicas(&model, &McConfig::new(130, 8).with_workers(w), |_, v| {
            v.iter().map(|x| x.to_bits()).fold(0u64, |h, b| h.rotate_left(5) ^ b)
        })
    };
    let one = f(1);
    assert_eq!(one, f(2));
    assert_eq!(one, f(5));
}
