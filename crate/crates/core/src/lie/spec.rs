use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simply-laced family tag of a simple summand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    D,
    E6,
    E7,
    E8,
}

/// One simple summand: `A_n` (sl_{n+1}), `D_n` (so_{2n}) or an exceptional `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Summand {
    pub family: Family,
    pub rank: usize,
}

impl Summand {
    pub fn new(family: Family, rank: usize) -> Result<Self> {
        let ok = match family {
            Family::A => rank >= 1,
            Family::D => rank >= 4,
            Family::E6 => rank == 6,
            Family::E7 => rank == 7,
            Family::E8 => rank == 8,
        };
        if !ok {
            return Err(Error::Algebra(format!(
                "summand {} has invalid rank {rank}",
                family_letter(family)
            )));
        }
        Ok(Summand { family, rank })
    }

    /// Dual Coxeter number from the fixed table.
    pub fn dual_coxeter(&self) -> u32 {
        let n = self.rank as u32;
        match self.family {
            Family::A => n + 1,
            Family::D => 2 * n - 2,
            Family::E6 => 12,
            Family::E7 => 18,
            Family::E8 => 30,
        }
    }

    /// Dimension of the Lie algebra.
    pub fn dimension(&self) -> u32 {
        let n = self.rank as u32;
        match self.family {
            Family::A => n * (n + 2),
            Family::D => n * (2 * n - 1),
            Family::E6 => 78,
            Family::E7 => 133,
            Family::E8 => 248,
        }
    }

    /// Edges of the Dynkin diagram, 0-based, Bourbaki labelling.
    pub fn dynkin_edges(&self) -> Vec<(usize, usize)> {
        let n = self.rank;
        match self.family {
            Family::A => (0..n - 1).map(|i| (i, i + 1)).collect(),
            Family::D => {
                let mut e: Vec<_> = (0..n - 2).map(|i| (i, i + 1)).collect();
                e.push((n - 3, n - 1));
                e
            }
            Family::E6 | Family::E7 | Family::E8 => {
                let mut e = vec![(0, 2), (1, 3)];
                e.extend((2..n - 1).map(|i| (i, i + 1)));
                e
            }
        }
    }
}

fn family_letter(f: Family) -> &'static str {
    match f {
        Family::A => "A",
        Family::D => "D",
        Family::E6 | Family::E7 | Family::E8 => "E",
    }
}

impl fmt::Display for Summand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", family_letter(self.family), self.rank)
    }
}

/// An ordered direct sum of simple summands, e.g. `"A1+A1"` or `"E8"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgebraSpec {
    summands: Vec<Summand>,
}

impl AlgebraSpec {
    pub fn new(summands: Vec<Summand>) -> Result<Self> {
        if summands.is_empty() {
            return Err(Error::Algebra("at least one summand is required".into()));
        }
        for s in &summands {
            Summand::new(s.family, s.rank)?;
        }
        Ok(AlgebraSpec { summands })
    }

    pub fn simple(family: Family, rank: usize) -> Result<Self> {
        Self::new(vec![Summand::new(family, rank)?])
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut summands = Vec::new();
        for part in text.split('+') {
            let part = part.trim();
            let mut chars = part.chars();
            let letter = chars
                .next()
                .ok_or_else(|| Error::Algebra(format!("empty summand in {text:?}")))?;
            let digits = chars.as_str();
            let rank: usize = digits.parse().map_err(|_| {
                Error::Algebra(format!("summand {part:?}: expected a rank after the family letter"))
            })?;
            let family = match letter.to_ascii_uppercase() {
                'A' => Family::A,
                'D' => Family::D,
                'E' => match rank {
                    6 => Family::E6,
                    7 => Family::E7,
                    8 => Family::E8,
                    _ => {
                        return Err(Error::Algebra(format!(
                            "summand {part:?}: E requires rank 6, 7 or 8"
                        )))
                    }
                },
                _ => {
                    return Err(Error::Algebra(format!(
                        "summand {part:?}: unsupported family (simply-laced only: A, D, E)"
                    )))
                }
            };
            summands.push(Summand::new(family, rank).map_err(|e| match e {
                Error::Algebra(m) => Error::Algebra(format!("{m} in {text:?}")),
                other => other,
            })?);
        }
        Self::new(summands)
    }

    pub fn summands(&self) -> &[Summand] {
        &self.summands
    }

    pub fn rank(&self) -> usize {
        self.summands.iter().map(|s| s.rank).sum()
    }
}

impl fmt::Display for AlgebraSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.summands.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for AlgebraSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for AlgebraSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AlgebraSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AlgebraSpec::parse(&s).map_err(serde::de::Error::custom)
    }
}
