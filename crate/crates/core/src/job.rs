//! JSON job files and the task runner behind the `toda` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chaos::{gmc_from_sample, write_mass_csv, MassRecord};
use crate::correlation::{covariance_test, estimate_correlation_traced, weyl_anomaly_test};
use crate::error::{Error, Result};
use crate::field::{build_covariance, map_replicas, McConfig};
use crate::gaussian;
use crate::geometry::{ConformalFactor, MobiusMap, PhiSpec, SphereGrid};
use crate::insertion::{Insertion, InsertionSet};
use crate::lie::{
    central_charge, central_charge_coefficients, extended_seiberg_check, seiberg_check, AlgebraData, AlgebraSpec,
    Basis, CartanVector, CouplingParams,
};
use crate::stats::mean_stderr;

pub const MIN_GRID: usize = 256;
pub const MAX_GRID: usize = 8192;
pub const MAX_REPLICAS: usize = 100_000_000;
/// Version of the result layout described in `schema/result.schema.json`.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    AlgebraInfo,
    Seiberg,
    Correlate,
    CovarianceTest,
    WeylTest,
    GmcStats,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub basis: Basis,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionConfig {
    pub z: [f64; 2],
    pub alpha: AlphaConfig,
}

fn default_grid() -> usize {
    1024
}

fn default_replicas() -> usize {
    10_000
}

fn default_mu() -> Vec<f64> {
    Vec::new()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub task: Task,
    pub algebra: AlgebraSpec,
    #[serde(default)]
    pub gamma: Option<f64>,
    /// One cosmological constant per simple root; empty means all ones.
    #[serde(default = "default_mu")]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub insertions: Vec<InsertionConfig>,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    /// `"a,b,c,d"` for `z ↦ (az+b)/(cz+d)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobius: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Everything a task needs, checked before any computation.
#[derive(Debug, Clone)]
pub struct ResolvedJob {
    pub config: JobConfig,
    pub algebra: AlgebraData,
    pub params: Option<CouplingParams>,
    pub insertions: Option<InsertionSet>,
    pub mobius: Option<MobiusMap>,
    pub phi: Option<ConformalFactor>,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed job JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }

    fn needs_params(&self) -> bool {
        !matches!(self.task, Task::AlgebraInfo | Task::Verify)
    }

    fn needs_insertions(&self) -> bool {
        matches!(self.task, Task::Seiberg | Task::Correlate | Task::CovarianceTest | Task::WeylTest)
    }

    fn samples(&self) -> bool {
        !matches!(self.task, Task::AlgebraInfo | Task::Seiberg)
    }

    pub fn resolve(&self) -> Result<ResolvedJob> {
        let range = |m: String| Err(Error::Config(format!("range violation: {m}")));
        let algebra = crate::lie::build_algebra(&self.algebra)?;
        let r = algebra.rank();
        if self.samples() {
            if !(MIN_GRID..=MAX_GRID).contains(&self.grid_n) {
                return range(format!("grid_n = {} outside [{MIN_GRID}, {MAX_GRID}]", self.grid_n));
            }
            if !(2..=MAX_REPLICAS).contains(&self.replicas) {
                return range(format!("replicas = {} outside [2, {MAX_REPLICAS}]", self.replicas));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0 && e < 1.0) {
                return range(format!("epsilon = {e} must lie in (0, 1)"));
            }
        }
        let params = if self.needs_params() || self.gamma.is_some() {
            let g = match self.gamma {
                Some(g) => g,
                None => return range("gamma is required for this task".into()),
            };
            let mu = if self.mu.is_empty() { vec![1.0; r] } else { self.mu.clone() };
            if mu.len() != r {
                return range(format!("{} values of mu for rank {r}", mu.len()));
            }
            Some(CouplingParams::new(g, mu)?)
        } else {
            None
        };
        let insertions = if self.needs_insertions() {
            if self.insertions.is_empty() {
                return range("at least one insertion is required".into());
            }
            let entries = self
                .insertions
                .iter()
                .map(|c| {
                    let alpha = CartanVector::new(&algebra, c.alpha.basis, &c.alpha.coords)?;
                    Ok(Insertion::new(Complex64::new(c.z[0], c.z[1]), alpha))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(InsertionSet::new(entries)?)
        } else {
            None
        };
        let mobius = match (&self.mobius, self.task) {
            (Some(m), _) => Some(MobiusMap::parse(m)?),
            (None, Task::CovarianceTest) => return range("covariance-test needs a mobius map".into()),
            _ => None,
        };
        let phi = match (&self.phi, self.task) {
            (Some(p), _) => {
                let v = match p {
                    PhiSpec::Zero => 0.0,
                    PhiSpec::Constant { c } => *c,
                    PhiSpec::Bump { amplitude } => *amplitude,
                };
                if !(v.is_finite() && v.abs() <= 10.0) {
                    return range(format!("phi parameter {v} must be finite with magnitude at most 10"));
                }
                Some(ConformalFactor::from_spec(p.clone()))
            }
            (None, Task::WeylTest) => return range("weyl-test needs phi".into()),
            _ => None,
        };
        Ok(ResolvedJob { config: self.clone(), algebra, params, insertions, mobius, phi })
    }
}

/// Outcome of a task: the result document and the process exit code.
#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub document: Value,
    pub exit_code: i32,
}

fn ratio_string(x: &crate::lie::Rational) -> String {
    x.to_string()
}

fn algebra_info(a: &AlgebraData, params: Option<&CouplingParams>) -> Value {
    let (c0, c2) = central_charge_coefficients(a);
    let mut v = json!({
        "algebra": a.spec().to_string(),
        "rank": a.rank(),
        "dimension": a.dimension(),
        "dual_coxeter": a.dual_coxeter(),
        "cartan": a.cartan(),
        "cartan_inverse": a.cartan_inv().iter().map(|row| row.iter().map(ratio_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "determinant": ratio_string(&a.determinant()),
        "weyl_norm_sq": ratio_string(a.weyl_norm_sq()),
        "central_charge_coefficients": [ratio_string(&c0), ratio_string(&c2)],
    });
    if let Some(p) = params {
        v["central_charge"] = json!(central_charge(a, p));
    }
    v
}

fn seiberg_value(report: &crate::lie::SeibergReport) -> Value {
    let mut v = serde_json::to_value(report).expect("serializable");
    v["failures"] = json!(report.failures());
    v
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// Runs a validated job. Seiberg rejections produce exit code 2 with the
/// verdict in the document; other failures are returned as errors.
pub fn run(job: &ResolvedJob, workers: usize) -> Result<JobOutcome> {
    let cfg = &job.config;
    let mc = McConfig::new(cfg.replicas, cfg.seed).with_workers(workers);
    let a = &job.algebra;
    let p = job.params.as_ref();
    let grid = || SphereGrid::fibonacci(cfg.grid_n);
    let params = || p.ok_or_else(|| Error::Config("gamma is required".into()));
    let ins = || job.insertions.as_ref().ok_or_else(|| Error::Config("insertions are required".into()));
    let mut exit_code = 0;
    let result = match cfg.task {
        Task::AlgebraInfo => algebra_info(a, p),
        Task::Seiberg => {
            let report = seiberg_check(ins()?, a, params()?)?;
            let ext = extended_seiberg_check(ins()?, a, params()?)?;
            if !report.pass {
                exit_code = 2;
            }
            json!({ "seiberg": seiberg_value(&report), "extended": to_value(&ext) })
        }
        Task::Correlate => {
            let report = seiberg_check(ins()?, a, params()?)?;
            if !report.pass {
                exit_code = 2;
                json!({ "seiberg": seiberg_value(&report) })
            } else {
                let model = build_covariance(&grid()?, a, cfg.epsilon)?;
                let traced = estimate_correlation_traced(ins()?, params()?, &model, &mc, cfg.trace_csv.is_some())?;
                if let Some(path) = &cfg.trace_csv {
                    write_mass_csv(path, &traced.traces)?;
                }
                let e = &traced.estimate;
                json!({
                    "value": e.value,
                    "stderr": e.stderr,
                    "log_value": e.log_value,
                    "estimate": to_value(e),
                    "seiberg": seiberg_value(&report),
                    "metadata": to_value(&e.metadata),
                })
            }
        }
        Task::CovarianceTest | Task::WeylTest => {
            let report = seiberg_check(ins()?, a, params()?)?;
            if !report.pass {
                exit_code = 2;
                json!({ "seiberg": seiberg_value(&report) })
            } else if cfg.task == Task::CovarianceTest {
                let psi = job.mobius.as_ref().expect("resolved");
                let model = build_covariance(&grid()?, a, cfg.epsilon)?;
                let r = covariance_test(ins()?, psi, params()?, &model, &mc)?;
                json!({ "report": to_value(&r), "seiberg": seiberg_value(&report) })
            } else {
                let phi = job.phi.as_ref().expect("resolved");
                let r = weyl_anomaly_test(ins()?, phi, params()?, &grid()?, a, cfg.epsilon, &mc)?;
                json!({ "report": to_value(&r), "seiberg": seiberg_value(&report) })
            }
        }
        Task::GmcStats => gmc_stats(job, &mc)?,
        Task::Verify => {
            let ledger = gaussian::oracle_suite(cfg.seed, cfg.replicas)?;
            if !ledger.pass {
                exit_code = 1;
            }
            to_value(&ledger)
        }
    };
    let mut config = to_value(cfg);
    if let Some(o) = config.as_object_mut() {
        o.remove("output");
    }
    Ok(JobOutcome {
        document: json!({
            "task": cfg.task,
            "result": result,
            "config": config,
            "versions": { "toda": env!("CARGO_PKG_VERSION"), "format": FORMAT_VERSION },
        }),
        exit_code,
    })
}

fn gmc_stats(job: &ResolvedJob, mc: &McConfig) -> Result<Value> {
    let cfg = &job.config;
    let gamma = job.params.as_ref().map(|p| p.gamma()).expect("resolved");
    let model = build_covariance(&SphereGrid::fibonacci(cfg.grid_n)?, &job.algebra, cfg.epsilon)?;
    let r = model.rank();
    let rows = map_replicas(&model, mc, |k, vals| {
        let sample = crate::field::FieldSample { values: vals.to_vec(), rank: r, n: model.len(), seed: mc.seed, replica_index: k };
        gmc_from_sample(&sample, &model, gamma).map(|m| (0..r).map(|i| m.total_mass(i)).collect::<Vec<_>>())
    });
    let mut totals = Vec::with_capacity(rows.len());
    for row in rows {
        totals.push(row?);
    }
    let expected = 4.0 * std::f64::consts::PI;
    let directions: Vec<Value> = (0..r)
        .map(|i| {
            let col: Vec<f64> = totals.iter().map(|t| t[i]).collect();
            let m = mean_stderr(&col);
            json!({
                "direction": i + 1,
                "mean_total_mass": m.mean,
                "stderr": m.stderr,
                "expected": expected,
                "sigma": (m.mean - expected) / m.stderr,
            })
        })
        .collect();
    if let Some(path) = &cfg.trace_csv {
        let recs: Vec<MassRecord> = totals
            .iter()
            .enumerate()
            .flat_map(|(k, t)| t.iter().enumerate().map(move |(i, &m)| MassRecord { replica: k as u64, direction: i, total_mass: m }))
            .collect();
        write_mass_csv(path, &recs)?;
    }
    Ok(json!({ "directions": directions, "metadata": to_value(model.metadata()) }))
}

/// Attaches the `timing` sub-object, the only part of a result that may
/// differ between identical runs.
pub fn with_timing(mut document: Value, started: Instant, workers: usize) -> Value {
    document["timing"] = json!({ "wall_seconds": started.elapsed().as_secs_f64(), "workers": workers });
    document
}

/// Serialized result with a trailing newline.
pub fn render(document: &Value) -> String {
    let mut s = serde_json::to_string_pretty(document).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_job() {
        let j = JobConfig::from_json(r#"{"task":"algebra-info","algebra":"E8"}"#).unwrap();
        assert_eq!(j.task, Task::AlgebraInfo);
        assert_eq!(j.grid_n, 1024);
        let r = j.resolve().unwrap();
        let out = run(&r, 1).unwrap();
        assert_eq!(out.document["result"]["weyl_norm_sq"], "620");
        assert_eq!(out.document["result"]["central_charge_coefficients"], json!(["8", "3720"]));
    }

    #[test]
    fn rejects_unknown_fields_and_ranges() {
        assert!(JobConfig::from_json(r#"{"task":"algebra-info","algebra":"A1","bogus":1}"#).is_err());
        let j = JobConfig::from_json(r#"{"task":"gmc-stats","algebra":"A1","gamma":0.5,"grid_n":100}"#).unwrap();
        assert!(matches!(j.resolve(), Err(Error::Config(_))));
        let j = JobConfig::from_json(r#"{"task":"gmc-stats","algebra":"A1","gamma":0.5,"mu":[1,2]}"#).unwrap();
        assert!(j.resolve().is_err());
    }
}
