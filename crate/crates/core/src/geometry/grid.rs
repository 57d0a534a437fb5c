use num_complex::Complex64;

use super::{chordal_distance, from_sphere};
use crate::error::{Error, ProximityViolation, Result};
use crate::stats::neumaier_sum;

/// Fibonacci point set on the sphere, carried to the plane by stereographic
/// projection, with equal round-metric weights `4π/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    points: Vec<Complex64>,
    unit: Vec<[f64; 3]>,
    cell_volume: Vec<f64>,
}

impl SphereGrid {
    /// `n` Fibonacci nodes. Heights are `1 − (2k+1)/n` and azimuths are
    /// centred so the set is invariant under `z ↦ 1/z`.
    pub fn fibonacci(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Grid(format!("need at least 4 nodes, got {n}")));
        }
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mid = (n as f64 - 1.0) / 2.0;
        let mut unit = Vec::with_capacity(n);
        let mut points = Vec::with_capacity(n);
        for k in 0..n {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let rad = (1.0 - z * z).sqrt();
            let theta = (k as f64 - mid) * golden;
            let p = [rad * theta.cos(), rad * theta.sin(), z];
            points.push(from_sphere(p));
            unit.push(p);
        }
        let w = 4.0 * std::f64::consts::PI / n as f64;
        Ok(SphereGrid { points, unit, cell_volume: vec![w; n] })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn unit_vectors(&self) -> &[[f64; 3]] {
        &self.unit
    }

    pub fn cell_volume(&self) -> &[f64] {
        &self.cell_volume
    }

    pub fn total_volume(&self) -> f64 {
        neumaier_sum(self.cell_volume.iter().copied())
    }

    /// Chordal radius of a spherical cap with the area of one cell.
    pub fn cell_radius(&self) -> f64 {
        2.0 / (self.len() as f64).sqrt()
    }

    /// Minimum chordal distance an insertion must keep from every node.
    pub fn exclusion_radius(&self) -> f64 {
        0.5 * self.cell_radius()
    }

    /// Mean chordal distance from each node to its nearest neighbour.
    pub fn mean_nearest_neighbor(&self) -> f64 {
        let n = self.len();
        let total: f64 = (0..n)
            .map(|i| {
                let a = self.unit[i];
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist3(a, self.unit[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / n as f64
    }

    /// Round-metric quadrature `Σ w_n f(x_n)`.
    pub fn integrate(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        neumaier_sum(self.points.iter().zip(&self.cell_volume).map(|(&x, &w)| w * f(x)))
    }

    /// Index of the node closest to `z` in chordal distance.
    pub fn nearest_node(&self, z: Complex64) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &x)| (i, chordal_distance(x, z)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Every (node, insertion) pair closer than the exclusion radius.
    pub fn proximity_violations(&self, zs: &[Complex64]) -> Vec<ProximityViolation> {
        let r = self.exclusion_radius();
        let mut out = Vec::new();
        for (k, &z) in zs.iter().enumerate() {
            for (n, &x) in self.points.iter().enumerate() {
                let d = chordal_distance(x, z);
                if d <= r {
                    out.push(ProximityViolation { node: n, insertion: k, distance: d });
                }
            }
        }
        out
    }

    pub fn check_proximity(&self, zs: &[Complex64]) -> Result<()> {
        let v = self.proximity_violations(zs);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Proximity(v))
        }
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sphere_area() {
        for n in [256, 1000, 4096, 8192] {
            let g = SphereGrid::fibonacci(n).unwrap();
            let rel = (g.total_volume() / (4.0 * std::f64::consts::PI) - 1.0).abs();
            assert!(rel <= 1e-12, "n={n} rel={rel}");
        }
    }

    #[test]
    fn symmetric_under_inversion() {
        let g = SphereGrid::fibonacci(300).unwrap();
        for (k, &x) in g.points().iter().enumerate() {
            let y = g.points()[g.len() - 1 - k];
            assert!((1.0 / x - y).norm() <= 1e-9 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn points_distinct_and_finite() {
        let g = SphereGrid::fibonacci(512).unwrap();
        for (i, a) in g.points().iter().enumerate() {
            assert!(a.re.is_finite() && a.im.is_finite());
            for b in &g.points()[i + 1..] {
                assert!(a != b);
            }
        }
    }
}
