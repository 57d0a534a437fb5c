use num_traits::{Signed, Zero};
use serde::Serialize;

use super::rational::{self, Rational};
use super::{AlgebraData, CouplingParams};
use crate::error::Result;
use crate::insertion::InsertionSet;

/// First bound for index `i` (1-based): `s_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstCondition {
    pub i: usize,
    pub s: f64,
    pub pass: bool,
}

/// Second bound for insertion `k` and index `i` (both 1-based):
/// `⟨α_k, e_i⟩ < γ + 2/γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondCondition {
    pub k: usize,
    pub i: usize,
    pub pairing: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeibergReport {
    pub s: Vec<f64>,
    pub first: Vec<FirstCondition>,
    pub second: Vec<SecondCondition>,
    pub pass: bool,
}

impl SeibergReport {
    /// Human-readable list of every failed condition.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .first
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("s_{} = {} is not positive", c.i, c.s))
            .collect();
        out.extend(self.second.iter().filter(|c| !c.pass).map(|c| {
            format!("⟨α_{}, e_{}⟩ = {} is not below γ+2/γ (margin {})", c.k, c.i, c.pairing, c.margin)
        }));
        out
    }
}

/// `s_i = ⟨Σα_k − 2Q, ω_i⟩/γ` in exact arithmetic.
pub(crate) fn s_exact(
    insertions: &InsertionSet,
    data: &AlgebraData,
    params: &CouplingParams,
) -> Result<Vec<Rational>> {
    let r = data.rank();
    let mut total = vec![Rational::zero(); r];
    for e in insertions.entries() {
        data.check(&e.alpha)?;
        for (t, a) in total.iter_mut().zip(e.alpha.root_coords(data)) {
            *t += a;
        }
    }
    let q = params.q_exact();
    let g = params.gamma_exact();
    let two = rational::int(2);
    Ok((0..r)
        .map(|i| {
            // ⟨Q, ω_i⟩ = q Σ_j (A⁻¹)_ji
            let rho_i = data.cartan_inv()[i].iter().fold(Rational::zero(), |a, x| a + x);
            (&total[i] - &two * &q * rho_i) / &g
        })
        .collect())
}

/// Both Seiberg bounds for every index and insertion, decided exactly.
pub fn seiberg_check(
    insertions: &InsertionSet,
    data: &AlgebraData,
    params: &CouplingParams,
) -> Result<SeibergReport> {
    let s = s_exact(insertions, data, params)?;
    let q = params.q_exact();
    let first: Vec<FirstCondition> = s
        .iter()
        .enumerate()
        .map(|(i, si)| FirstCondition { i: i + 1, s: rational::to_f64(si), pass: si.is_positive() })
        .collect();
    let mut second = Vec::new();
    for (k, e) in insertions.entries().iter().enumerate() {
        for (i, p) in e.alpha.weight_coords(data).iter().enumerate() {
            let margin = &q - p;
            second.push(SecondCondition {
                k: k + 1,
                i: i + 1,
                pairing: rational::to_f64(p),
                margin: rational::to_f64(&margin),
                pass: margin.is_positive(),
            });
        }
    }
    let pass = first.iter().all(|c| c.pass) && second.iter().all(|c| c.pass);
    Ok(SeibergReport { s: first.iter().map(|c| c.s).collect(), first, second, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedVerdict {
    pub i: usize,
    pub minus_s: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtendedReport {
    pub verdicts: Vec<ExtendedVerdict>,
    pub pass: bool,
}

/// `−s_i < min(2/γ², min_k ⟨Q − α_k, e_i⟩/γ)` for every `i`.
pub fn extended_seiberg_check(
    insertions: &InsertionSet,
    data: &AlgebraData,
    params: &CouplingParams,
) -> Result<ExtendedReport> {
    let s = s_exact(insertions, data, params)?;
    let q = params.q_exact();
    let g = params.gamma_exact();
    let weights: Vec<Vec<Rational>> =
        insertions.entries().iter().map(|e| e.alpha.weight_coords(data)).collect();
    let verdicts: Vec<ExtendedVerdict> = s
        .iter()
        .enumerate()
        .map(|(i, si)| {
            let mut bound = rational::int(2) / (&g * &g);
            for w in &weights {
                let b = (&q - &w[i]) / &g;
                if b < bound {
                    bound = b;
                }
            }
            let minus_s = -si;
            ExtendedVerdict {
                i: i + 1,
                pass: minus_s < bound,
                minus_s: rational::to_f64(&minus_s),
                bound: rational::to_f64(&bound),
            }
        })
        .collect();
    let pass = verdicts.iter().all(|v| v.pass);
    Ok(ExtendedReport { verdicts, pass })
}
