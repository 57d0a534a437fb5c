use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::rational::{self, Rational};
use super::{AlgebraData, AlgebraSpec};
use crate::error::{Error, Result};

/// Coordinate basis of a Cartan vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "root")]
    SimpleRoot,
    #[serde(rename = "weight")]
    FundamentalWeight,
}

/// A vector of the Cartan subalgebra in root or weight coordinates.
///
/// Weight coordinates are `A · (root coordinates)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanVector {
    basis: Basis,
    coords: Vec<Rational>,
    algebra: AlgebraSpec,
}

impl CartanVector {
    /// Builds a vector from double coordinates, taken at their exact value.
    pub fn new(data: &AlgebraData, basis: Basis, coords: &[f64]) -> Result<Self> {
        let exact = coords
            .iter()
            .map(|&x| rational::from_f64(x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_exact(data, basis, exact)
    }

    pub fn from_exact(data: &AlgebraData, basis: Basis, coords: Vec<Rational>) -> Result<Self> {
        if coords.len() != data.rank() {
            return Err(Error::Dimension(format!(
                "{} coordinates given for rank-{} algebra {}",
                coords.len(),
                data.rank(),
                data.spec()
            )));
        }
        Ok(CartanVector { basis, coords, algebra: data.spec().clone() })
    }

    pub fn zero(data: &AlgebraData) -> Self {
        CartanVector {
            basis: Basis::SimpleRoot,
            coords: vec![Rational::zero(); data.rank()],
            algebra: data.spec().clone(),
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn algebra(&self) -> &AlgebraSpec {
        &self.algebra
    }

    pub fn coords_exact(&self) -> &[Rational] {
        &self.coords
    }

    pub fn coords(&self) -> Vec<f64> {
        self.coords.iter().map(rational::to_f64).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }

    pub fn to_basis(&self, data: &AlgebraData, basis: Basis) -> CartanVector {
        if basis == self.basis {
            return self.clone();
        }
        let coords = match basis {
            Basis::FundamentalWeight => rational::mat_vec(data.cartan_matrix(), &self.coords),
            Basis::SimpleRoot => rational::mat_vec(data.cartan_inv_matrix(), &self.coords),
        };
        CartanVector { basis, coords, algebra: self.algebra.clone() }
    }

    /// Root coordinates `a` with `v = Σ a_j e_j`.
    pub fn root_coords(&self, data: &AlgebraData) -> Vec<Rational> {
        self.to_basis(data, Basis::SimpleRoot).coords
    }

    /// `⟨v, e_i⟩ = (A a)_i`, i.e. the weight coordinates.
    pub fn weight_coords(&self, data: &AlgebraData) -> Vec<Rational> {
        self.to_basis(data, Basis::FundamentalWeight).coords
    }

    /// `⟨v, e_i⟩` as doubles.
    pub fn coords_f64_weight(&self, data: &AlgebraData) -> Vec<f64> {
        self.weight_coords(data).iter().map(rational::to_f64).collect()
    }

    pub fn scaled(&self, c: &Rational) -> CartanVector {
        CartanVector {
            basis: self.basis,
            coords: self.coords.iter().map(|x| x * c).collect(),
            algebra: self.algebra.clone(),
        }
    }

    fn combine(&self, other: &CartanVector, sign: i64) -> Result<CartanVector> {
        if self.algebra != other.algebra || self.basis != other.basis {
            return Err(Error::Dimension(
                "vectors must share algebra and basis to be combined".into(),
            ));
        }
        let s = rational::int(sign);
        Ok(CartanVector {
            basis: self.basis,
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + &s * b).collect(),
            algebra: self.algebra.clone(),
        })
    }

    pub fn add(&self, other: &CartanVector) -> Result<CartanVector> {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &CartanVector) -> Result<CartanVector> {
        self.combine(other, -1)
    }
}

impl Serialize for CartanVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CartanVector", 2)?;
        st.serialize_field("basis", &self.basis)?;
        st.serialize_field("coords", &self.coords())?;
        st.end()
    }
}
