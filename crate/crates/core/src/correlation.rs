//! Monte Carlo estimation of vertex correlation functions.
//!
//! With `s_i = ⟨Σα_k − 2Q, ω_i⟩/γ`, integrating out the zero mode gives
//!
//! ```text
//! ⟨Π V_{α_k}(z_k)⟩ = Π_i Γ(s_i) μ_i^{−s_i}/γ · Π_k ĝ(z_k)^{Δ_k}
//!                   · e^{Σ_{k<l} ⟨α_k,α_l⟩ G(z_k,z_l)} · E[Π_i Z_i^{−s_i}]
//! ```
//!
//! where `Z_i` is the total mass of the insertion-shifted chaos in
//! direction `i`. The expectation is estimated by a plain replica mean.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::chaos::{insertion_log_weights, wick_offsets, MassRecord, LOG_MASS_LIMIT};
use crate::error::{Error, Result};
use crate::field::{build_general_covariance, map_replicas, CovarianceModel, McConfig};
use crate::geometry::{
    curvature, liouville_functional, log_round_metric, round_regular_part, ConformalFactor, GeneralKernel,
    MobiusMap, SphereGrid,
};
pub use crate::insertion::{Insertion, InsertionSet};
use crate::lie::{
    central_charge, conformal_weight, seiberg_check, AlgebraData, AlgebraSpec, Basis, CartanVector, CouplingParams,
    Rational, SeibergReport,
};
use crate::rng::derive_seed;
use crate::special::{integrate, ln_gamma};
use crate::stats::{covariance, log_sum_exp, mean_stderr, neumaier_sum};

/// `s_i = ⟨Σα_k − 2Q, ω_i⟩/γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiVector {
    pub s: Vec<f64>,
}

pub fn si_vector(insertions: &InsertionSet, data: &AlgebraData, params: &CouplingParams) -> Result<SiVector> {
    params.check_rank(data)?;
    Ok(SiVector { s: seiberg_check(insertions, data, params)?.s })
}

/// Discretization metadata attached to every estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMetadata {
    pub grid_n: usize,
    pub epsilon: f64,
    pub theta_eta: f64,
    pub clipped_fraction: f64,
    pub kernel: String,
    pub warnings: Vec<String>,
}

impl EstimateMetadata {
    fn from_model(model: &CovarianceModel) -> Self {
        let m = model.metadata();
        EstimateMetadata {
            grid_n: m.grid_n,
            epsilon: m.epsilon,
            theta_eta: m.theta_eta,
            clipped_fraction: m.clipped_fraction,
            kernel: m.kernel.clone(),
            warnings: m.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub log_value: f64,
    /// `ln` of the deterministic prefactor.
    pub log_prefactor: f64,
    /// `ln` of the replica mean of `Π_i Z_i^{−s_i}`.
    pub log_moment: f64,
    /// Standard error of the moment relative to its value.
    pub relative_stderr: f64,
    pub replicas: usize,
    pub seed: u64,
    pub s: Vec<f64>,
    pub metadata: EstimateMetadata,
}

fn require_seiberg(insertions: &InsertionSet, data: &AlgebraData, params: &CouplingParams) -> Result<SeibergReport> {
    params.check_rank(data)?;
    let report = seiberg_check(insertions, data, params)?;
    if !report.pass {
        return Err(Error::Seiberg(Box::new(report)));
    }
    Ok(report)
}

fn gamma_factor(s: &[f64], params: &CouplingParams) -> f64 {
    let lg = params.gamma().ln();
    neumaier_sum(s.iter().zip(params.mu()).map(|(&si, &mu)| ln_gamma(si) - si * mu.ln() - lg))
}

/// Pairwise `⟨α_k, α_l⟩ G(z_k, z_l)` over `k < l` in canonical order.
fn pair_sum(
    sorted: &[&Insertion],
    data: &AlgebraData,
    green: impl Fn(Complex64, Complex64) -> Result<f64>,
) -> Result<f64> {
    let mut terms = Vec::new();
    for k in 0..sorted.len() {
        for l in k + 1..sorted.len() {
            let ip = data.inner_product(&sorted[k].alpha, &sorted[l].alpha)?;
            if ip != 0.0 {
                terms.push(ip * green(sorted[k].z, sorted[l].z)?);
            }
        }
    }
    Ok(neumaier_sum(terms))
}

/// `ln` of `Π_i Γ(s_i) μ_i^{−s_i}/γ · Π_k ĝ(z_k)^{Δ_k} · e^{Σ_{k<l} ⟨α_k,α_l⟩ G(z_k,z_l)}`.
///
/// Fails with the Seiberg report when some `s_i ≤ 0`.
pub fn prefactor(insertions: &InsertionSet, data: &AlgebraData, params: &CouplingParams) -> Result<f64> {
    params.check_rank(data)?;
    let report = seiberg_check(insertions, data, params)?;
    if report.first.iter().any(|c| !c.pass) {
        return Err(Error::Seiberg(Box::new(report)));
    }
    let sorted = insertions.canonical();
    let mut weights = Vec::new();
    for e in &sorted {
        weights.push(conformal_weight(&e.alpha, data, params)? * log_round_metric(e.z));
    }
    Ok(gamma_factor(&report.s, params) + neumaier_sum(weights) + pair_sum(&sorted, data, crate::geometry::green_round)?)
}

/// Per-replica `ln Π_i Z_i^{−s_i}` from precomputed log offsets.
fn replica_log_integrand(
    vals: &[f64],
    offsets: &[f64],
    s: &[f64],
    gamma: f64,
    n: usize,
    totals: Option<&mut Vec<f64>>,
) -> Result<f64> {
    let mut buf = vec![0.0; n];
    let mut acc = 0.0;
    let mut out = Vec::new();
    for (i, &si) in s.iter().enumerate() {
        let (v, o) = (&vals[i * n..(i + 1) * n], &offsets[i * n..(i + 1) * n]);
        let mut mx = f64::NEG_INFINITY;
        for k in 0..n {
            buf[k] = o[k] + gamma * v[k];
            mx = mx.max(buf[k]);
        }
        if !(mx <= LOG_MASS_LIMIT) {
            let k = buf.iter().position(|&b| !(b <= LOG_MASS_LIMIT)).unwrap_or(0);
            return Err(Error::MassOverflow { direction: i, cell: k, value: buf[k] });
        }
        let lz = log_sum_exp(&buf);
        out.push(lz);
        acc -= si * lz;
    }
    if let Some(t) = totals {
        *t = out;
    }
    Ok(acc)
}

/// Replica values of `ln Π_i Z_i^{−s_i}`, plus `ln Z_i` per replica when
/// `keep_totals` is set.
pub(crate) struct MomentRun {
    pub logs: Vec<f64>,
    pub log_totals: Option<Vec<Vec<f64>>>,
}

pub(crate) fn negative_moment(
    model: &CovarianceModel,
    offsets: &[f64],
    s: &[f64],
    gamma: f64,
    mc: &McConfig,
    keep_totals: bool,
) -> Result<MomentRun> {
    if mc.replicas < 2 {
        return Err(Error::Config("at least two replicas are needed for a standard error".into()));
    }
    let n = model.len();
    let results = map_replicas(model, mc, |_, vals| {
        let mut t = Vec::new();
        let l = replica_log_integrand(vals, offsets, s, gamma, n, keep_totals.then_some(&mut t))?;
        Ok((l, t))
    });
    let mut logs = Vec::with_capacity(results.len());
    let mut totals = keep_totals.then(Vec::new);
    for r in results {
        let (l, t) = r?;
        logs.push(l);
        if let Some(v) = totals.as_mut() {
            v.push(t);
        }
    }
    Ok(MomentRun { logs, log_totals: totals })
}

fn finish(log_prefactor: f64, logs: &[f64], mc: &McConfig, s: Vec<f64>, model: &CovarianceModel) -> McEstimate {
    let (log_moment, rel) = crate::stats::log_mean_exp(logs);
    let log_value = log_prefactor + log_moment;
    let value = log_value.exp();
    McEstimate {
        value,
        stderr: value * rel,
        log_value,
        log_prefactor,
        log_moment,
        relative_stderr: rel,
        replicas: mc.replicas,
        seed: mc.seed,
        s,
        metadata: EstimateMetadata::from_model(model),
    }
}

/// Estimate together with the per-replica shifted total masses.
#[derive(Debug, Clone)]
pub struct TracedEstimate {
    pub estimate: McEstimate,
    pub traces: Vec<MassRecord>,
}

fn round_offsets(insertions: &InsertionSet, model: &CovarianceModel, gamma: f64) -> Result<Vec<f64>> {
    let (r, n) = (model.rank(), model.len());
    let base = wick_offsets(model, gamma);
    let mut off = insertion_log_weights(&insertions.canonical(), model, gamma)?;
    for i in 0..r {
        for k in 0..n {
            off[i * n + k] += base[k];
        }
    }
    Ok(off)
}

fn check_model(model: &CovarianceModel, data: &AlgebraData) -> Result<()> {
    if model.algebra().spec() != data.spec() {
        return Err(Error::Dimension(format!(
            "model is built for {} but insertions belong to {}",
            model.algebra().spec(),
            data.spec()
        )));
    }
    Ok(())
}

/// `exp(prefactor) × mean_replicas Π_i Z_i^{−s_i}` on a round-metric model.
///
/// No sampling happens unless both Seiberg bounds hold and every insertion
/// respects the proximity rule.
pub fn estimate_correlation(
    insertions: &InsertionSet,
    params: &CouplingParams,
    model: &CovarianceModel,
    mc: &McConfig,
) -> Result<McEstimate> {
    Ok(estimate_correlation_traced(insertions, params, model, mc, false)?.estimate)
}

pub fn estimate_correlation_traced(
    insertions: &InsertionSet,
    params: &CouplingParams,
    model: &CovarianceModel,
    mc: &McConfig,
    keep_traces: bool,
) -> Result<TracedEstimate> {
    let data = model.algebra();
    if model.general_kernel().is_some() {
        return Err(Error::Config("estimate_correlation expects a round-metric model".into()));
    }
    check_model(model, data)?;
    let report = require_seiberg(insertions, data, params)?;
    model.grid().check_proximity(&insertions.points())?;
    let lp = prefactor(insertions, data, params)?;
    let offsets = round_offsets(insertions, model, params.gamma())?;
    let run = negative_moment(model, &offsets, &report.s, params.gamma(), mc, keep_traces)?;
    let traces = traces_from(&run);
    Ok(TracedEstimate { estimate: finish(lp, &run.logs, mc, report.s, model), traces })
}

fn traces_from(run: &MomentRun) -> Vec<MassRecord> {
    let mut out = Vec::new();
    if let Some(t) = &run.log_totals {
        for (k, row) in t.iter().enumerate() {
            for (i, lz) in row.iter().enumerate() {
                out.push(MassRecord { replica: k as u64, direction: i, total_mass: lz.exp() });
            }
        }
    }
    out
}

/// Both sides of the Möbius covariance identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    /// Correlation at the image points `ψ(z_k)`.
    pub left: McEstimate,
    /// `Π_k |ψ′(z_k)|^{−2Δ_k}` times the correlation at `z_k`.
    pub right: McEstimate,
    pub log_jacobian: f64,
    pub difference: f64,
    pub combined_stderr: f64,
    pub sigma: f64,
    pub ratio: f64,
}

/// Compares the correlation at `ψ(z_k)` with the covariance-scaled
/// correlation at `z_k`, using independent seeds on the two sides.
pub fn covariance_test(
    insertions: &InsertionSet,
    psi: &MobiusMap,
    params: &CouplingParams,
    model: &CovarianceModel,
    mc: &McConfig,
) -> Result<CovarianceReport> {
    let data = model.algebra();
    for (k, e) in insertions.entries().iter().enumerate() {
        if psi.is_pole(e.z) {
            return Err(Error::Pole(format!("insertion {k} at {}", e.z)));
        }
    }
    let image = insertions.map_points(|z| psi.apply(z))?;
    // Validate both sides before any sampling.
    require_seiberg(insertions, data, params)?;
    model.grid().check_proximity(&insertions.points())?;
    model.grid().check_proximity(&image.points())?;
    let mut jac = Vec::new();
    for e in insertions.canonical() {
        jac.push(-conformal_weight(&e.alpha, data, params)? * psi.pullback_factor(e.z)?.ln());
    }
    let log_jacobian = neumaier_sum(jac);
    let right_mc = McConfig { seed: mc.seed, ..*mc };
    let left_mc = McConfig { seed: derive_seed(mc.seed, 0x4c45_4654), ..*mc };
    let left = estimate_correlation(&image, params, model, &left_mc)?;
    let mut right = estimate_correlation(insertions, params, model, &right_mc)?;
    right.log_prefactor += log_jacobian;
    right.log_value += log_jacobian;
    right.value = right.log_value.exp();
    right.stderr = right.value * right.relative_stderr;
    let difference = left.value - right.value;
    let combined_stderr = (left.stderr.powi(2) + right.stderr.powi(2)).sqrt();
    Ok(CovarianceReport {
        sigma: difference / combined_stderr,
        ratio: left.value / right.value,
        left,
        right,
        log_jacobian,
        difference,
        combined_stderr,
    })
}

/// Estimate of the correlation in the metric `e^φ ĝ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub estimate: McEstimate,
    pub liouville_action: f64,
    /// `(r/96π) S_L(φ)`.
    pub log_determinant: f64,
    #[serde(skip)]
    logs: Vec<f64>,
}

/// Correlation in the metric `g = e^φ ĝ` with the covariance built from the
/// general kernel, masses weighted by `v_g`, and the curvature coupling
/// `−(1/4π)∫ R_g ⟨Q, X⟩ dv_g` applied as a Girsanov shift.
pub fn metric_correlation(
    insertions: &InsertionSet,
    phi: &ConformalFactor,
    params: &CouplingParams,
    grid: &SphereGrid,
    data: &AlgebraData,
    epsilon: Option<f64>,
    mc: &McConfig,
) -> Result<MetricEstimate> {
    let report = require_seiberg(insertions, data, params)?;
    grid.check_proximity(&insertions.points())?;
    let kernel = GeneralKernel::new(phi, grid)?;
    let model = build_general_covariance(grid, data, epsilon, kernel)?;
    let kern = model.general_kernel().expect("general model");
    let (r, n) = (data.rank(), grid.len());
    let gamma = params.gamma();
    let q = params.q();
    let rho2 = data.weyl_norm_sq().to_f64().unwrap_or(f64::NAN);
    let pts = grid.points();
    let phi_n = kern.phi_values().to_vec();
    let wg = kern.weights();
    let dh: Vec<f64> = (0..n).map(|k| kern.node_regular_part(k) - round_regular_part(pts[k])).collect();
    let beta: Vec<f64> =
        (0..n).map(|k| -curvature(phi, pts[k]) * wg[k] / (4.0 * std::f64::consts::PI)).collect();
    let kmat = model.spatial_factor();
    let kb: Vec<f64> = (0..n).map(|m| neumaier_sum((0..n).map(|j| kmat[(m, j)] * beta[j]))).collect();
    let var_c = q * q * rho2 * neumaier_sum(beta.iter().zip(&kb).map(|(b, x)| b * x));

    let sorted = insertions.canonical();
    let mut off = insertion_log_weights(&sorted, &model, gamma)?;
    let w = grid.cell_volume();
    for k in 0..n {
        let base = w[k].ln() - gamma * gamma * model.variance(k)
            + gamma * gamma * dh[k]
            + (1.0 + 0.5 * gamma * gamma) * phi_n[k]
            + gamma * q * kb[k];
        for i in 0..r {
            off[i * n + k] += base;
        }
    }

    let mut terms = vec![gamma_factor(&report.s, params)];
    let qv = crate::lie::background_charge(data, params);
    for e in &sorted {
        let delta = conformal_weight(&e.alpha, data, params)?;
        let a2 = data.inner_product(&e.alpha, &e.alpha)?;
        let aq = data.inner_product(&e.alpha, &qv)?;
        let hz = kern.regular_part(e.z) - round_regular_part(e.z);
        terms.push(delta * log_round_metric(e.z) + 0.5 * a2 * hz + 0.5 * aq * phi.eval(e.z));
        let col = model.green_column(e.z)?;
        terms.push(aq * neumaier_sum(beta.iter().zip(&col).map(|(b, g)| b * g)));
    }
    terms.push(pair_sum(&sorted, data, |x, y| kern.green(x, y))?);
    terms.push(0.5 * var_c);
    let s_l = liouville_functional(phi, grid);
    let log_det = r as f64 / (96.0 * std::f64::consts::PI) * s_l;
    terms.push(log_det);
    let lp = neumaier_sum(terms);
    let run = negative_moment(&model, &off, &report.s, gamma, mc, false)?;
    Ok(MetricEstimate {
        estimate: finish(lp, &run.logs, mc, report.s, &model),
        liouville_action: s_l,
        log_determinant: log_det,
        logs: run.logs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylReport {
    pub reference: MetricEstimate,
    pub deformed: MetricEstimate,
    pub central_charge: f64,
    pub liouville_action: f64,
    /// `(c_T/96π) S_L(φ)`.
    pub log_anomaly: f64,
    pub expected_ratio: f64,
    pub observed_ratio: f64,
    pub ratio_stderr: f64,
    pub relative_deviation: f64,
    pub sigma: f64,
}

/// Compares the correlation in `e^φ ĝ` with `e^{(c_T/96π) S_L(φ)}` times
/// the correlation in `ĝ`, both on the same grid and the same seed.
pub fn weyl_anomaly_test(
    insertions: &InsertionSet,
    phi: &ConformalFactor,
    params: &CouplingParams,
    grid: &SphereGrid,
    data: &AlgebraData,
    epsilon: Option<f64>,
    mc: &McConfig,
) -> Result<WeylReport> {
    let reference = metric_correlation(insertions, &ConformalFactor::zero(), params, grid, data, epsilon, mc)?;
    let deformed = metric_correlation(insertions, phi, params, grid, data, epsilon, mc)?;
    let c_t = central_charge(data, params);
    let s_l = liouville_functional(phi, grid);
    let log_anomaly = c_t / (96.0 * std::f64::consts::PI) * s_l;
    // Paired delta method on the moment ratio.
    let shift = reference.logs.iter().chain(&deformed.logs).copied().fold(f64::NEG_INFINITY, f64::max);
    let ya: Vec<f64> = reference.logs.iter().map(|l| (l - shift).exp()).collect();
    let yb: Vec<f64> = deformed.logs.iter().map(|l| (l - shift).exp()).collect();
    let (ma, mb) = (mean_stderr(&ya), mean_stderr(&yb));
    let cab = covariance(&ya, &yb) / ya.len() as f64;
    let rel_var = (mb.stderr / mb.mean).powi(2) + (ma.stderr / ma.mean).powi(2) - 2.0 * cab / (ma.mean * mb.mean);
    let observed_ratio = (deformed.estimate.log_value - reference.estimate.log_value).exp();
    let expected_ratio = log_anomaly.exp();
    let ratio_stderr = observed_ratio * rel_var.max(0.0).sqrt();
    Ok(WeylReport {
        central_charge: c_t,
        liouville_action: s_l,
        log_anomaly,
        expected_ratio,
        observed_ratio,
        ratio_stderr,
        relative_deviation: observed_ratio / expected_ratio - 1.0,
        sigma: (observed_ratio - expected_ratio) / ratio_stderr,
        reference,
        deformed,
    })
}

/// Relative deviation between `∫ e^{sγc − μ e^{γc} z} dc` over
/// `[−40/γ, 40/γ]` and `Γ(s)(μz)^{−s}/γ`.
pub fn zero_mode_oracle(z_total_mass: f64, s: f64, mu: f64, gamma: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s = {s} must be positive; the zero-mode integral diverges")));
    }
    if !(z_total_mass > 0.0 && mu > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("z, μ and γ must be positive".into()));
    }
    let mz = mu * z_total_mass;
    let f = |c: f64| (s * gamma * c - mz * (gamma * c).exp()).exp();
    let lim = 40.0 / gamma;
    // Split at the peak e^{γc} = s/(μz) so bisection starts near it.
    let peak = ((s / mz).ln() / gamma).clamp(-lim + 1e-9, lim - 1e-9);
    let (a, _) = integrate(f, -lim, peak, 0.0, 1e-13)?;
    let (b, _) = integrate(f, peak, lim, 0.0, 1e-13)?;
    let exact = (ln_gamma(s) - s * mz.ln() - gamma.ln()).exp();
    Ok(((a + b) / exact - 1.0).abs())
}

/// Restriction of an insertion set on a direct sum to one simple summand.
pub fn restrict_to_summand(
    insertions: &InsertionSet,
    data: &AlgebraData,
    summand: usize,
) -> Result<(AlgebraData, InsertionSet)> {
    let ranges = data.summand_ranges();
    let range = ranges
        .get(summand)
        .cloned()
        .ok_or_else(|| Error::Algebra(format!("no summand {summand} in {}", data.spec())))?;
    let sub = crate::lie::build_algebra(&AlgebraSpec::new(vec![data.spec().summands()[summand]])?)?;
    let entries = insertions
        .entries()
        .iter()
        .map(|e| {
            let coords: Vec<Rational> = e.alpha.root_coords(data)[range.clone()].to_vec();
            Ok(Insertion::new(e.z, CartanVector::from_exact(&sub, Basis::SimpleRoot, coords)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sub, InsertionSet::new(entries)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sl2_three(a: f64) -> (AlgebraData, InsertionSet) {
        let d = AlgebraData::from_name("A1").unwrap();
        let al = CartanVector::new(&d, Basis::SimpleRoot, &[a]).unwrap();
        let pts = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let set = InsertionSet::new(pts.iter().map(|&z| Insertion::new(z, al.clone())).collect()).unwrap();
        (d, set)
    }

    #[test]
    fn prefactor_mu_scaling() {
        let (d, set) = sl2_three(1.1);
        let p1 = CouplingParams::new(1.0, vec![1.0]).unwrap();
        let p2 = CouplingParams::new(1.0, vec![2.0]).unwrap();
        let s = si_vector(&set, &d, &p1).unwrap().s;
        let diff = prefactor(&set, &d, &p2).unwrap() - prefactor(&set, &d, &p1).unwrap();
        assert!((diff + std::f64::consts::LN_2 * s.iter().sum::<f64>()).abs() < 1e-13);
    }

    #[test]
    fn prefactor_rejects_nonpositive_s() {
        let (d, set) = sl2_three(1.0);
        let p = CouplingParams::new(1.0, vec![1.0]).unwrap();
        assert!(matches!(prefactor(&set, &d, &p), Err(Error::Seiberg(_))));
    }

    #[test]
    fn zero_mode_basic_cases() {
        assert!(zero_mode_oracle(1.0, 1.0, 1.0, 1.0).unwrap() <= 1e-8);
        assert!(zero_mode_oracle(3.0, 0.5, 2.0, 0.7).unwrap() <= 1e-8);
        assert!(zero_mode_oracle(1.0, -0.1, 1.0, 1.0).is_err());
    }
}
