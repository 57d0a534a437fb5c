//! Discrete Gaussian multiplicative chaos per simple-root direction.
//!
//! Cell masses are kept as logarithms and exponentiated only when totals
//! are formed.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{build_covariance, map_replicas, CovarianceModel, FieldSample, McConfig};
use crate::geometry::SphereGrid;
use crate::insertion::{validate_points, Insertion};
use crate::lie::AlgebraData;
use crate::stats::{log_sum_exp, mean_stderr, median};

/// Largest admissible log-mass of a single cell.
pub const LOG_MASS_LIMIT: f64 = 700.0;

/// Per-cell masses `M_i(cell n)` for each direction `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosMeasure {
    log_masses: Vec<f64>,
    rank: usize,
    n: usize,
    gamma: f64,
    insertions: Vec<Insertion>,
    pub epsilon: f64,
    pub seed: u64,
    pub replica_index: u64,
}

impl ChaosMeasure {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn insertions(&self) -> &[Insertion] {
        &self.insertions
    }

    pub fn log_mass(&self, i: usize, n: usize) -> f64 {
        self.log_masses[i * self.n + n]
    }

    pub fn mass(&self, i: usize, n: usize) -> f64 {
        self.log_mass(i, n).exp()
    }

    /// Masses of direction `i`.
    pub fn masses(&self, i: usize) -> Vec<f64> {
        self.log_masses[i * self.n..(i + 1) * self.n].iter().map(|l| l.exp()).collect()
    }

    pub fn log_total_mass(&self, i: usize) -> f64 {
        log_sum_exp(&self.log_masses[i * self.n..(i + 1) * self.n])
    }

    pub fn total_mass(&self, i: usize) -> f64 {
        self.log_total_mass(i).exp()
    }

    /// Mass of direction `i` carried by the listed cells.
    pub fn subset_mass(&self, i: usize, cells: &[usize]) -> f64 {
        self.log_subset_mass(i, cells).exp()
    }

    pub fn log_subset_mass(&self, i: usize, cells: &[usize]) -> f64 {
        let v: Vec<f64> = cells.iter().map(|&c| self.log_mass(i, c)).collect();
        log_sum_exp(&v)
    }
}

fn check_limit(log_masses: &[f64], n: usize) -> Result<()> {
    if let Some(k) = log_masses.iter().position(|&l| !(l <= LOG_MASS_LIMIT)) {
        return Err(Error::MassOverflow { direction: k / n, cell: k % n, value: log_masses[k] });
    }
    Ok(())
}

/// `M_i(cell n) = exp(γ X_i(x_n) − γ² K_nn) · w_n`, i.e. Wick normalized
/// with `Var⟨γe_i, X⟩ = 2γ² K_nn`.
pub fn gmc_from_sample(sample: &FieldSample, model: &CovarianceModel, gamma: f64) -> Result<ChaosMeasure> {
    let (r, n) = (model.rank(), model.len());
    if sample.rank != r || sample.n != n {
        return Err(Error::Dimension("sample was not drawn from this model".into()));
    }
    let offsets = wick_offsets(model, gamma);
    let mut log_masses = vec![0.0; r * n];
    for i in 0..r {
        for k in 0..n {
            log_masses[i * n + k] = offsets[k] + gamma * sample.values[i * n + k];
        }
    }
    check_limit(&log_masses, n)?;
    Ok(ChaosMeasure {
        log_masses,
        rank: r,
        n,
        gamma,
        insertions: Vec::new(),
        epsilon: model.epsilon(),
        seed: sample.seed,
        replica_index: sample.replica_index,
    })
}

/// `ln w_n − γ² K_nn` for every node.
pub(crate) fn wick_offsets(model: &CovarianceModel, gamma: f64) -> Vec<f64> {
    let w = model.volume_weights();
    (0..model.len()).map(|k| w[k].ln() - gamma * gamma * model.variance(k)).collect()
}

/// `γ Σ_k ⟨α_k, e_i⟩ G(x_n, z_k)` as an `r × N` array.
pub(crate) fn insertion_log_weights(insertions: &[&Insertion], model: &CovarianceModel, gamma: f64) -> Result<Vec<f64>> {
    let (r, n) = (model.rank(), model.len());
    let alg = model.algebra();
    let mut out = vec![0.0; r * n];
    for e in insertions {
        alg.check(&e.alpha)?;
        let pairing = e.alpha.coords_f64_weight(alg);
        if pairing.iter().all(|&p| p == 0.0) {
            continue;
        }
        let col = model.green_column(e.z)?;
        for i in 0..r {
            let c = gamma * pairing[i];
            for k in 0..n {
                out[i * n + k] += c * col[k];
            }
        }
    }
    Ok(out)
}

/// Multiplies masses by `exp(γ Σ_k ⟨α_k, e_i⟩ G(x_n, z_k))`.
pub fn shift_measure(measure: &ChaosMeasure, insertions: &[Insertion], model: &CovarianceModel) -> Result<ChaosMeasure> {
    if measure.len() != model.len() || measure.rank() != model.rank() {
        return Err(Error::Dimension("measure was not built from this model".into()));
    }
    validate_points(insertions)?;
    let zs: Vec<_> = insertions.iter().map(|e| e.z).collect();
    model.grid().check_proximity(&zs)?;
    let refs: Vec<&Insertion> = insertions.iter().collect();
    let add = insertion_log_weights(&refs, model, measure.gamma)?;
    let log_masses: Vec<f64> = measure.log_masses.iter().zip(&add).map(|(a, b)| a + b).collect();
    check_limit(&log_masses, measure.n)?;
    let mut all = measure.insertions.clone();
    all.extend_from_slice(insertions);
    Ok(ChaosMeasure { log_masses, insertions: all, ..measure.clone() })
}

/// `E[M_i(C)²] = Σ_{m,n ∈ C} w_m w_n exp(2γ² K_mn)` for a set of cells `C`.
pub fn cap_second_moment(model: &CovarianceModel, gamma: f64, cells: &[usize]) -> f64 {
    let w = model.volume_weights();
    let k = model.spatial_factor();
    let terms = cells
        .iter()
        .flat_map(|&m| cells.iter().map(move |&n| (m, n)))
        .map(|(m, n)| w[m] * w[n] * (2.0 * gamma * gamma * k[(m, n)]).exp());
    crate::stats::neumaier_sum(terms)
}

/// One rung of the threshold ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdLevel {
    pub grid_n: usize,
    pub epsilon: f64,
    pub median: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Boundary,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub alpha_sq: f64,
    pub regime: Regime,
    /// Ladder rungs ordered from coarse to fine.
    pub levels: Vec<ThresholdLevel>,
    pub strictly_decreasing: bool,
    pub relative_spread: f64,
    /// `None` inside the boundary band, where no claim is made.
    pub consistent: Option<bool>,
}

/// Width of the band around `|α|² = 4` where no verdict is given.
pub const THRESHOLD_BAND: f64 = 0.2;

/// Medians above this relative spread are not called stable.
pub const STABLE_SPREAD: f64 = 0.15;

/// Total mass of `exp(aY − ½a²K_nn)` with `Var Y = K` and `a² = |α|²`,
/// on grids of `n/4`, `n/2` and `n` nodes (coarse to fine), each with its
/// default ε. Above the threshold the median should fall strictly under
/// refinement; below it the medians should agree.
pub fn vertex_threshold_probe(alpha_sq: f64, n: usize, mc: &McConfig) -> Result<ThresholdReport> {
    if !(alpha_sq.is_finite() && alpha_sq > 0.0) {
        return Err(Error::Domain(format!("|α|² must be positive, got {alpha_sq}")));
    }
    let a = alpha_sq.sqrt();
    let alg = AlgebraData::from_name("A1")?;
    let mut levels = Vec::new();
    for m in [n / 4, n / 2, n] {
        let grid = SphereGrid::fibonacci(m)?;
        let model = build_covariance(&grid, &alg, None)?;
        let w = model.volume_weights();
        let offs: Vec<f64> = (0..m).map(|k| w[k].ln() - 0.5 * alpha_sq * model.variance(k)).collect();
        // values = √2 · Y for the rank-one model (A = [2]).
        let scale = a / std::f64::consts::SQRT_2;
        let totals: Vec<f64> = map_replicas(&model, mc, |_, v| {
            let logs: Vec<f64> = v.iter().zip(&offs).map(|(x, o)| o + scale * x).collect();
            log_sum_exp(&logs).exp()
        });
        let ms = mean_stderr(&totals);
        levels.push(ThresholdLevel {
            grid_n: m,
            epsilon: model.epsilon(),
            median: median(&totals),
            mean: ms.mean,
            stderr: ms.stderr,
        });
    }
    let med: Vec<f64> = levels.iter().map(|l| l.median).collect();
    let strictly_decreasing = med.windows(2).all(|p| p[0] > p[1]);
    let (lo, hi) = med.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let relative_spread = hi / lo - 1.0;
    let regime = if (alpha_sq - 4.0).abs() <= THRESHOLD_BAND {
        Regime::Boundary
    } else if alpha_sq < 4.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    };
    let consistent = match regime {
        Regime::Boundary => None,
        Regime::Subcritical => Some(relative_spread <= STABLE_SPREAD),
        Regime::Supercritical => Some(strictly_decreasing),
    };
    Ok(ThresholdReport { alpha_sq, regime, levels, strictly_decreasing, relative_spread, consistent })
}

/// Row of a replica trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassRecord {
    pub replica: u64,
    pub direction: usize,
    pub total_mass: f64,
}

/// Writes `replica,direction,total_mass` rows.
pub fn write_mass_csv(path: &Path, rows: &[MassRecord]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io { path: path.display().to_string(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample;

    fn model(n: usize, alg: &str) -> CovarianceModel {
        let g = SphereGrid::fibonacci(n).unwrap();
        build_covariance(&g, &AlgebraData::from_name(alg).unwrap(), None).unwrap()
    }

    #[test]
    fn zero_gamma_gives_cell_volumes() {
        let m = model(64, "A2");
        let s = sample(&m, 1, 0);
        let c = gmc_from_sample(&s, &m, 0.0).unwrap();
        for i in 0..2 {
            for (k, w) in m.grid().cell_volume().iter().enumerate() {
                // ln/exp round trip only
                assert!((c.mass(i, k) / w - 1.0).abs() <= 4.0 * f64::EPSILON);
            }
        }
    }

    #[test]
    fn empty_and_zero_weight_shifts_are_identity() {
        let m = model(64, "A1");
        let c = gmc_from_sample(&sample(&m, 2, 0), &m, 0.5).unwrap();
        let same = shift_measure(&c, &[], &m).unwrap();
        assert_eq!(same.masses(0), c.masses(0));
        let z = crate::lie::CartanVector::zero(m.algebra());
        let e = Insertion::new(num_complex::Complex64::new(0.013, 0.021), z);
        let shifted = shift_measure(&c, &[e], &m).unwrap();
        assert_eq!(shifted.masses(0), c.masses(0));
    }

    #[test]
    fn overflow_is_reported_with_location() {
        let m = model(32, "A1");
        let mut s = sample(&m, 3, 0);
        s.values[5] = 1e4;
        match gmc_from_sample(&s, &m, 1.0) {
            Err(Error::MassOverflow { direction, cell, .. }) => assert_eq!((direction, cell), (0, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn proximity_is_enforced() {
        let m = model(64, "A1");
        let c = gmc_from_sample(&sample(&m, 2, 0), &m, 0.5).unwrap();
        let e = Insertion::new(m.grid().points()[7], m.algebra().simple_root(0));
        assert!(matches!(shift_measure(&c, &[e], &m), Err(Error::Proximity(_))));
    }
}
