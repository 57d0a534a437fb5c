use std::time::Instant;

use num_complex::Complex64;

use toda::correlation::{estimate_correlation, prefactor, si_vector, zero_mode_oracle};
use toda::field::{build_covariance, McConfig};
use toda::geometry::{green_round, log_round_metric, SphereGrid};
use toda::insertion::{Insertion, InsertionSet};
use toda::lie::{conformal_weight, AlgebraData, Basis, CartanVector, CouplingParams};
use toda::special::ln_gamma;
use toda::Error;

/// Moves `z` to the nearby point farthest from every grid node.
fn clear_of_nodes(grid: &SphereGrid, z: Complex64) -> Complex64 {
    let h = 0.2 * grid.cell_radius();
    let mut best = (z, grid.nearest_node(z).1);
    for a in -5..=5 {
        for b in -5..=5 {
            let w = z + Complex64::new(a as f64 * h, b as f64 * h) * 0.2;
            let d = grid.nearest_node(w).1;
            if d > best.1 {
                best = (w, d);
            }
        }
    }
    best.0
}

fn sl2_set(grid: &SphereGrid, root: f64, pts: &[(f64, f64)]) -> (AlgebraData, InsertionSet) {
    let d = AlgebraData::from_name("A1").unwrap();
    let a = CartanVector::new(&d, Basis::SimpleRoot, &[root]).unwrap();
    let set = pts
        .iter()
        .map(|&(x, y)| Insertion::new(clear_of_nodes(grid, Complex64::new(x, y)), a.clone()))
        .collect();
    (d, InsertionSet::new(set).unwrap())
}

const PTS: [(f64, f64); 3] = [(0.5, 0.0), (-0.5, 0.3), (0.2, -0.6)];

#[test]
fn estimate_is_invariant_under_insertion_order() {
    let grid = SphereGrid::fibonacci(256).unwrap();
    let (d, set) = sl2_set(&grid, 1.1, &PTS);
    let model = build_covariance(&grid, &d, None).unwrap();
    let p = CouplingParams::uniform(0.8, 1.0, 1).unwrap();
    let mc = McConfig::new(200, 5);
    let a = estimate_correlation(&set, &p, &model, &mc).unwrap();
    let mut rev = set.entries().to_vec();
    rev.reverse();
    let b = estimate_correlation(&InsertionSet::new(rev).unwrap(), &p, &model, &mc).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn cosmological_constant_scales_exactly() {
    let grid = SphereGrid::fibonacci(256).unwrap();
    let (d, set) = sl2_set(&grid, 1.1, &PTS);
    let model = build_covariance(&grid, &d, None).unwrap();
    let mc = McConfig::new(200, 6);
    let one = estimate_correlation(&set, &CouplingParams::uniform(0.8, 1.0, 1).unwrap(), &model, &mc).unwrap();
    let two = estimate_correlation(&set, &CouplingParams::uniform(0.8, 2.0, 1).unwrap(), &model, &mc).unwrap();
    assert_eq!(one.log_moment.to_bits(), two.log_moment.to_bits());
    let s: f64 = one.s.iter().sum();
    assert!((two.value / one.value / 2f64.powf(-s) - 1.0).abs() < 1e-12);
}

#[test]
fn rejected_insertions_are_never_sampled() {
    let grid = SphereGrid::fibonacci(256).unwrap();
    let (d, set) = sl2_set(&grid, 1.0, &PTS);
    let model = build_covariance(&grid, &d, None).unwrap();
    let p = CouplingParams::uniform(1.0, 1.0, 1).unwrap();
    // A billion replicas would take hours if any were drawn.
    let mc = McConfig::new(1_000_000_000, 0);
    let t = Instant::now();
    match estimate_correlation(&set, &p, &model, &mc) {
        Err(Error::Seiberg(r)) => {
            assert!(!r.pass);
            assert_eq!(r.s, vec![0.0]);
        }
        other => panic!("expected a Seiberg rejection, got {other:?}"),
    }
    assert!(t.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn insertions_on_nodes_are_refused() {
    let grid = SphereGrid::fibonacci(256).unwrap();
    let d = AlgebraData::from_name("A1").unwrap();
    let a = CartanVector::new(&d, Basis::SimpleRoot, &[1.1]).unwrap();
    let mut pts: Vec<Insertion> = PTS.iter().map(|&(x, y)| Insertion::new(clear_of_nodes(&grid, Complex64::new(x, y)), a.clone())).collect();
    pts[1].z = grid.points()[17];
    let set = InsertionSet::new(pts).unwrap();
    let model = build_covariance(&grid, &d, None).unwrap();
    let p = CouplingParams::uniform(0.8, 1.0, 1).unwrap();
    match estimate_correlation(&set, &p, &model, &McConfig::new(1_000_000_000, 0)) {
        Err(Error::Proximity(v)) => assert!(v.iter().any(|x| x.node == 17 && x.insertion == 1)),
        other => panic!("expected a proximity error, got {other:?}"),
    }
}

#[test]
fn prefactor_of_three_equal_insertions() {
    let d = AlgebraData::from_name("A1").unwrap();
    let p = CouplingParams::uniform(1.0, 1.0, 1).unwrap();
    let a = CartanVector::new(&d, Basis::SimpleRoot, &[1.1]).unwrap();
    let z: Vec<Complex64> = PTS.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
    let set = InsertionSet::new(z.iter().map(|&w| Insertion::new(w, a.clone())).collect()).unwrap();
    // s = (3·1.1·2 − 2·3·1)/(2·1) from ⟨α, ω⟩ = 1.1 and ⟨Q, ω⟩ = 3/2.
    let s = si_vector(&set, &d, &p).unwrap().s[0];
    assert!((s - 0.3).abs() < 1e-15);
    assert!((d.inner_product(&a, &a).unwrap() - 2.42).abs() < 1e-15);
    let delta = conformal_weight(&a, &d, &p).unwrap();
    let mut expected = ln_gamma(s);
    for k in 0..3 {
        expected += delta * log_round_metric(z[k]);
        for l in k + 1..3 {
            expected += 2.42 * green_round(z[k], z[l]).unwrap();
        }
    }
    assert!((prefactor(&set, &d, &p).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn zero_mode_integral_closed_form() {
    for (z, s, mu, g) in [(1.0, 0.5, 1.0, 1.0), (3.0, 2.0, 0.5, 0.4), (0.2, 9.0, 1.0, 1.3)] {
        let dev = zero_mode_oracle(z, s, mu, g).unwrap();
        assert!(dev <= 1e-8, "z {z} s {s} μ {mu} γ {g}: {dev:.3e}");
    }
    assert!(zero_mode_oracle(1.0, 0.0, 1.0, 1.0).is_err());
    assert!(zero_mode_oracle(-1.0, 1.0, 1.0, 1.0).is_err());
}
