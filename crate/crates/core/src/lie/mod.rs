//! Cartan data of simply-laced Lie algebras and the constants derived from it.
//!
//! Everything here is exact: Cartan matrices are integers, inverses and
//! norms are rationals, and vectors store exact rational coordinates. Real
//! inputs are promoted to the dyadic rational they represent.

mod rational;
mod seiberg;
mod spec;
mod vector;

pub use rational::Rational;
pub use seiberg::{
    extended_seiberg_check, seiberg_check, ExtendedReport, ExtendedVerdict, FirstCondition,
    SecondCondition, SeibergReport,
};
pub use spec::{AlgebraSpec, Family, Summand};
pub use vector::{Basis, CartanVector};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use rational::{from_f64, int, to_f64};

/// Exact Cartan data of a (semi)simple simply-laced algebra.
#[derive(Debug, Clone)]
pub struct AlgebraData {
    spec: AlgebraSpec,
    cartan: Vec<Vec<i64>>,
    cartan_q: rational::Matrix,
    cartan_inv: rational::Matrix,
    weyl_norm_sq: Rational,
    dual_coxeter: Vec<u32>,
    cartan_f: Vec<f64>,
    cartan_inv_f: Vec<f64>,
}

/// Builds the Cartan matrix from Dynkin adjacency and derives its inverse.
///
/// Fails if the Freudenthal–de Vries cross-check `‖ρ‖² = Σ g·dim/12` does
/// not hold exactly.
pub fn build_algebra(spec: &AlgebraSpec) -> Result<AlgebraData> {
    let r = spec.rank();
    let mut cartan = vec![vec![0i64; r]; r];
    let mut offset = 0;
    for s in spec.summands() {
        for i in 0..s.rank {
            cartan[offset + i][offset + i] = 2;
        }
        for (i, j) in s.dynkin_edges() {
            cartan[offset + i][offset + j] = -1;
            cartan[offset + j][offset + i] = -1;
        }
        offset += s.rank;
    }
    let cartan_q: rational::Matrix = cartan
        .iter()
        .map(|row| row.iter().map(|&x| int(x)).collect())
        .collect();
    let cartan_inv = rational::inverse(&cartan_q)
        .ok_or_else(|| Error::Algebra(format!("Cartan matrix of {spec} is singular")))?;
    let weyl_norm_sq = cartan_inv
        .iter()
        .flatten()
        .fold(Rational::zero(), |acc, x| acc + x);
    let fdv = spec.summands().iter().fold(Rational::zero(), |acc, s| {
        acc + rational::frac(i64::from(s.dual_coxeter()) * i64::from(s.dimension()), 12)
    });
    if fdv != weyl_norm_sq {
        return Err(Error::Algebra(format!(
            "{spec}: Σ(A⁻¹)_ij = {weyl_norm_sq} disagrees with g·dim/12 = {fdv}"
        )));
    }
    let cartan_f = cartan.iter().flatten().map(|&x| x as f64).collect();
    let cartan_inv_f = cartan_inv.iter().flatten().map(to_f64).collect();
    Ok(AlgebraData {
        dual_coxeter: spec.summands().iter().map(|s| s.dual_coxeter()).collect(),
        spec: spec.clone(),
        cartan,
        cartan_q,
        cartan_inv,
        weyl_norm_sq,
        cartan_f,
        cartan_inv_f,
    })
}

impl AlgebraData {
    /// Parses and builds in one step.
    pub fn from_name(name: &str) -> Result<Self> {
        build_algebra(&AlgebraSpec::parse(name)?)
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn rank(&self) -> usize {
        self.cartan.len()
    }

    pub fn cartan(&self) -> &[Vec<i64>] {
        &self.cartan
    }

    pub fn cartan_exact(&self) -> &[Vec<Rational>] {
        &self.cartan_q
    }

    pub fn cartan_inv(&self) -> &[Vec<Rational>] {
        &self.cartan_inv
    }

    /// `A_ij` as a double.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.cartan_f[i * self.rank() + j]
    }

    /// `(A⁻¹)_ij` as a double.
    pub fn a_inv(&self, i: usize, j: usize) -> f64 {
        self.cartan_inv_f[i * self.rank() + j]
    }

    pub fn weyl_norm_sq(&self) -> &Rational {
        &self.weyl_norm_sq
    }

    /// Dual Coxeter numbers, one per summand.
    pub fn dual_coxeter(&self) -> &[u32] {
        &self.dual_coxeter
    }

    pub fn dimension(&self) -> u32 {
        self.spec.summands().iter().map(|s| s.dimension()).sum()
    }

    pub fn determinant(&self) -> Rational {
        rational::determinant(&self.cartan_q)
    }

    pub fn leading_minors(&self) -> Vec<Rational> {
        rational::leading_minors(&self.cartan_q)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.leading_minors().iter().all(rational::is_positive)
    }

    /// Simple root `e_i` (0-based).
    pub fn simple_root(&self, i: usize) -> CartanVector {
        let mut c = vec![Rational::zero(); self.rank()];
        c[i] = Rational::one();
        CartanVector::from_exact(self, Basis::SimpleRoot, c).expect("rank matches")
    }

    /// Fundamental weight `ω_i` (0-based).
    pub fn fundamental_weight(&self, i: usize) -> CartanVector {
        let mut c = vec![Rational::zero(); self.rank()];
        c[i] = Rational::one();
        CartanVector::from_exact(self, Basis::FundamentalWeight, c).expect("rank matches")
    }

    /// Weyl vector `ρ = Σ ω_i`.
    pub fn weyl_vector(&self) -> CartanVector {
        CartanVector::from_exact(self, Basis::FundamentalWeight, vec![Rational::one(); self.rank()])
            .expect("rank matches")
    }

    /// Index ranges of the simple summands inside `0..rank`.
    pub fn summand_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut o = 0;
        for s in self.spec.summands() {
            out.push(o..o + s.rank);
            o += s.rank;
        }
        out
    }

    pub fn inner_product(&self, u: &CartanVector, v: &CartanVector) -> Result<f64> {
        Ok(to_f64(&self.inner_product_exact(u, v)?))
    }

    /// `⟨u, v⟩` exactly: `A` in root coordinates, `A⁻¹` in weight
    /// coordinates, the identity pairing in mixed coordinates.
    pub fn inner_product_exact(&self, u: &CartanVector, v: &CartanVector) -> Result<Rational> {
        self.check(u)?;
        self.check(v)?;
        let (a, b) = (u.coords_exact(), v.coords_exact());
        Ok(match (u.basis(), v.basis()) {
            (Basis::SimpleRoot, Basis::SimpleRoot) => {
                rational::dot(a, &rational::mat_vec(&self.cartan_q, b))
            }
            (Basis::FundamentalWeight, Basis::FundamentalWeight) => {
                rational::dot(a, &rational::mat_vec(&self.cartan_inv, b))
            }
            _ => rational::dot(a, b),
        })
    }

    pub(crate) fn check(&self, v: &CartanVector) -> Result<()> {
        if v.algebra() != &self.spec {
            return Err(Error::Dimension(format!(
                "vector belongs to {} but the algebra is {}",
                v.algebra(),
                self.spec
            )));
        }
        Ok(())
    }

    pub(crate) fn cartan_matrix(&self) -> &rational::Matrix {
        &self.cartan_q
    }

    pub(crate) fn cartan_inv_matrix(&self) -> &rational::Matrix {
        &self.cartan_inv
    }
}

pub fn weyl_norm_sq(data: &AlgebraData) -> Rational {
    data.weyl_norm_sq.clone()
}

pub fn inner_product(data: &AlgebraData, u: &CartanVector, v: &CartanVector) -> Result<f64> {
    data.inner_product(u, v)
}

/// Coupling constant `γ ∈ (0, √2)` and cosmological constants `μ_i > 0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CouplingParams {
    gamma: f64,
    mu: Vec<f64>,
}

impl CouplingParams {
    pub fn new(gamma: f64, mu: Vec<f64>) -> Result<Self> {
        let g = from_f64(gamma).map_err(|_| Error::Params(format!("gamma {gamma} is not finite")))?;
        if !(gamma > 0.0) || &g * &g >= int(2) {
            return Err(Error::Params(format!("gamma {gamma} must lie strictly inside (0, √2)")));
        }
        if mu.is_empty() {
            return Err(Error::Params("mu must have one entry per simple root".into()));
        }
        if let Some((i, m)) = mu.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Params(format!("mu[{i}] = {m} must be finite and positive")));
        }
        Ok(CouplingParams { gamma, mu })
    }

    /// Same `μ` in every direction.
    pub fn uniform(gamma: f64, mu: f64, rank: usize) -> Result<Self> {
        Self::new(gamma, vec![mu; rank])
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        Self::new(self.gamma, mu)
    }

    /// `q = γ + 2/γ` as a double.
    pub fn q(&self) -> f64 {
        self.gamma + 2.0 / self.gamma
    }

    pub fn gamma_exact(&self) -> Rational {
        from_f64(self.gamma).expect("validated")
    }

    /// `q = γ + 2/γ`, exact for the dyadic value of `γ`.
    pub fn q_exact(&self) -> Rational {
        let g = self.gamma_exact();
        &g + int(2) / &g
    }

    pub(crate) fn check_rank(&self, data: &AlgebraData) -> Result<()> {
        if self.mu.len() != data.rank() {
            return Err(Error::Params(format!(
                "mu has {} entries but {} has rank {}",
                self.mu.len(),
                data.spec(),
                data.rank()
            )));
        }
        Ok(())
    }
}

/// `Q = (γ + 2/γ)ρ`, returned in the fundamental-weight basis.
pub fn background_charge(data: &AlgebraData, params: &CouplingParams) -> CartanVector {
    CartanVector::from_exact(data, Basis::FundamentalWeight, vec![params.q_exact(); data.rank()])
        .expect("rank matches")
}

/// Coefficients `(r, 6‖ρ‖²)` of `c_T = r + 6‖ρ‖² q²`.
pub fn central_charge_coefficients(data: &AlgebraData) -> (Rational, Rational) {
    (int(data.rank() as i64), int(6) * data.weyl_norm_sq())
}

pub fn central_charge_exact(data: &AlgebraData, params: &CouplingParams) -> Rational {
    let (c0, c2) = central_charge_coefficients(data);
    let q = params.q_exact();
    c0 + c2 * &q * &q
}

/// `c_T = r + 6|Q|²`.
pub fn central_charge(data: &AlgebraData, params: &CouplingParams) -> f64 {
    to_f64(&central_charge_exact(data, params))
}

pub fn conformal_weight_exact(
    alpha: &CartanVector,
    data: &AlgebraData,
    params: &CouplingParams,
) -> Result<Rational> {
    let q = background_charge(data, params);
    let half = rational::frac(1, 2);
    let a2 = alpha.scaled(&half);
    let diff = q.to_basis(data, Basis::SimpleRoot).sub(&a2.to_basis(data, Basis::SimpleRoot))?;
    data.inner_product_exact(&a2, &diff)
}

/// `Δ_α = ⟨α/2, Q − α/2⟩`.
pub fn conformal_weight(alpha: &CartanVector, data: &AlgebraData, params: &CouplingParams) -> Result<f64> {
    Ok(to_f64(&conformal_weight_exact(alpha, data, params)?))
}
