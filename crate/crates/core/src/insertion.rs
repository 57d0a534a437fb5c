use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::CartanVector;

/// A vertex insertion: a point of the plane and its Cartan weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Insertion {
    #[serde(serialize_with = "ser_complex")]
    pub z: Complex64,
    pub alpha: CartanVector,
}

impl Insertion {
    pub fn new(z: Complex64, alpha: CartanVector) -> Self {
        Insertion { z, alpha }
    }
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// A non-empty list of insertions at finite, pairwise distinct points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct InsertionSet {
    entries: Vec<Insertion>,
}

impl InsertionSet {
    pub fn new(entries: Vec<Insertion>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Insertions("at least one insertion is required".into()));
        }
        validate_points(&entries)?;
        let alg = entries[0].alpha.algebra();
        if let Some(k) = entries.iter().position(|e| e.alpha.algebra() != alg) {
            return Err(Error::Insertions(format!(
                "insertion {k} has weight in {} but insertion 0 in {alg}",
                entries[k].alpha.algebra()
            )));
        }
        Ok(InsertionSet { entries })
    }

    pub fn entries(&self) -> &[Insertion] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.z).collect()
    }

    /// A copy with every point mapped by `f`; weights unchanged.
    pub fn map_points(&self, mut f: impl FnMut(Complex64) -> Result<Complex64>) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| Ok(Insertion { z: f(e.z)?, alpha: e.alpha.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Entries sorted by point (real part, then imaginary part). Internal
    /// sums run in this order so results do not depend on input order.
    pub fn canonical(&self) -> Vec<&Insertion> {
        let mut v: Vec<&Insertion> = self.entries.iter().collect();
        v.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
        v
    }
}

pub(crate) fn validate_points(entries: &[Insertion]) -> Result<()> {
    for (k, e) in entries.iter().enumerate() {
        if !(e.z.re.is_finite() && e.z.im.is_finite()) {
            return Err(Error::Insertions(format!(
                "insertion {k} is at infinity or not finite; only finite points are supported"
            )));
        }
    }
    for k in 0..entries.len() {
        for l in k + 1..entries.len() {
            if entries[k].z == entries[l].z {
                return Err(Error::Insertions(format!(
                    "insertions {k} and {l} share the point {}",
                    entries[k].z
                )));
            }
        }
    }
    Ok(())
}
