use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{log_round_metric, round_metric, SphereGrid};
use crate::error::{Error, Result};
use crate::stats::neumaier_sum;

type ScalarFn = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(Complex64) -> [f64; 2] + Send + Sync>;

/// Serializable description of the built-in conformal factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Zero,
    Constant { c: f64 },
    /// `φ(x) = amplitude / (1 + |x|²)`.
    Bump { amplitude: f64 },
}

/// A conformal factor `φ`, defining the metric `g = e^φ ĝ`.
///
/// Providers may supply an analytic gradient and flat Laplacian. Otherwise
/// central differences are used.
#[derive(Clone)]
pub struct ConformalFactor {
    name: String,
    phi: ScalarFn,
    gradient: Option<GradFn>,
    laplacian: Option<ScalarFn>,
    spec: Option<PhiSpec>,
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalFactor").field("name", &self.name).finish()
    }
}

impl ConformalFactor {
    pub fn new(name: impl Into<String>, phi: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        ConformalFactor {
            name: name.into(),
            phi: Arc::new(phi),
            gradient: None,
            laplacian: None,
            spec: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(Complex64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Flat Laplacian `∂²_x φ + ∂²_y φ`.
    pub fn with_laplacian(mut self, l: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Arc::new(l));
        self
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        let mut f = ConformalFactor::new(format!("constant({c})"), move |_| c)
            .with_gradient(|_| [0.0, 0.0])
            .with_laplacian(|_| 0.0);
        f.spec = Some(if c == 0.0 { PhiSpec::Zero } else { PhiSpec::Constant { c } });
        f
    }

    /// `a/(1+|x|²)`, smooth at infinity.
    pub fn bump(a: f64) -> Self {
        let mut f = ConformalFactor::new(format!("bump({a})"), move |x| a / (1.0 + x.norm_sqr()))
            .with_gradient(move |x| {
                let s = 1.0 + x.norm_sqr();
                let k = -2.0 * a / (s * s);
                [k * x.re, k * x.im]
            })
            .with_laplacian(move |x| {
                let r2 = x.norm_sqr();
                4.0 * a * (r2 - 1.0) / (1.0 + r2).powi(3)
            });
        f.spec = Some(PhiSpec::Bump { amplitude: a });
        f
    }

    pub fn from_spec(spec: PhiSpec) -> Self {
        match spec {
            PhiSpec::Zero => Self::zero(),
            PhiSpec::Constant { c } => Self::constant(c),
            PhiSpec::Bump { amplitude } => Self::bump(amplitude),
        }
    }

    pub fn spec(&self) -> Option<PhiSpec> {
        self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.spec, Some(PhiSpec::Zero))
    }

    /// `Some(c)` when `φ ≡ c`.
    pub fn constant_value(&self) -> Option<f64> {
        match self.spec {
            Some(PhiSpec::Zero) => Some(0.0),
            Some(PhiSpec::Constant { c }) => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, x: Complex64) -> f64 {
        (self.phi)(x)
    }

    pub fn on_grid(&self, grid: &SphereGrid) -> Result<Vec<f64>> {
        let v: Vec<f64> = grid.points().iter().map(|&x| self.eval(x)).collect();
        if let Some(n) = v.iter().position(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("φ is not finite at grid node {n}")));
        }
        Ok(v)
    }

    /// Flat gradient; central differences with `h = 10⁻⁵(1+|x|)` if no
    /// analytic gradient was supplied.
    pub fn gradient(&self, x: Complex64) -> [f64; 2] {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let h = 1e-5 * (1.0 + x.norm());
        let dx = (self.eval(x + h) - self.eval(x - h)) / (2.0 * h);
        let ih = Complex64::new(0.0, h);
        let dy = (self.eval(x + ih) - self.eval(x - ih)) / (2.0 * h);
        [dx, dy]
    }

    /// Flat Laplacian; five-point stencil with `h = 10⁻³(1+|x|)` if no
    /// analytic one was supplied.
    pub fn flat_laplacian(&self, x: Complex64) -> f64 {
        if let Some(l) = &self.laplacian {
            return l(x);
        }
        let h = 1e-3 * (1.0 + x.norm());
        let ih = Complex64::new(0.0, h);
        (self.eval(x + h) + self.eval(x - h) + self.eval(x + ih) + self.eval(x - ih) - 4.0 * self.eval(x))
            / (h * h)
    }

    /// Laplace–Beltrami operator of `ĝ`: `Δ_ĝ = ĝ⁻¹ Δ_flat`.
    pub fn round_laplacian(&self, x: Complex64) -> f64 {
        self.flat_laplacian(x) / round_metric(x)
    }
}

/// Scalar curvature of `g = e^φ ĝ`: `R_g = e^{−φ}(2 − Δ_ĝ φ)`.
pub fn curvature(phi: &ConformalFactor, x: Complex64) -> f64 {
    (-phi.eval(x)).exp() * (2.0 - phi.round_laplacian(x))
}

/// Quadrature of `S_L(φ) = ∫ (|∂φ|²_ĝ + 2R_ĝ φ) dv_ĝ` with `R_ĝ = 2`.
///
/// The gradient term is `|∇φ|²/ĝ` against `v_ĝ`, i.e. the flat Dirichlet
/// energy.
pub fn liouville_functional(phi: &ConformalFactor, grid: &SphereGrid) -> f64 {
    grid.integrate(|x| {
        let [gx, gy] = phi.gradient(x);
        (gx * gx + gy * gy) / round_metric(x) + 4.0 * phi.eval(x)
    })
}

/// Green kernel of `g = e^φ ĝ` discretized on a grid:
/// `G_g(x,y) = ln 1/|x−y| − m_g(ln 1/|x−·|) − m_g(ln 1/|y−·|) + θ_g`.
///
/// Each cell is the plane disk of equal `ĝ`-volume around its node, and the
/// cell containing a singularity contributes its analytic disk average.
#[derive(Debug, Clone)]
pub struct GeneralKernel {
    points: Vec<Complex64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
    volume: f64,
    radius: Vec<f64>,
    node_mean: Vec<f64>,
    theta: f64,
}

/// Mean of `ln 1/|x−y|` over `y` in the plane disk of radius `rho` centred
/// at distance `d` from `x`.
fn disk_mean_log(d: f64, rho: f64) -> f64 {
    if d >= rho {
        -d.ln()
    } else {
        -rho.ln() + 0.5 * (1.0 - d * d / (rho * rho))
    }
}

impl GeneralKernel {
    pub fn new(phi: &ConformalFactor, grid: &SphereGrid) -> Result<Self> {
        let phi_v = phi.on_grid(grid)?;
        let points = grid.points().to_vec();
        let weights: Vec<f64> = grid.cell_volume().iter().zip(&phi_v).map(|(w, p)| w * p.exp()).collect();
        let volume = neumaier_sum(weights.iter().copied());
        let radius: Vec<f64> = points
            .iter()
            .zip(grid.cell_volume())
            .map(|(&x, &w)| (w / (std::f64::consts::PI * round_metric(x))).sqrt())
            .collect();
        let n = points.len();
        let mut node_mean = Vec::with_capacity(n);
        let mut theta_terms = Vec::with_capacity(n);
        for m in 0..n {
            let terms = (0..n).map(|j| {
                let d = (points[m] - points[j]).norm();
                weights[j] * disk_mean_log(d, radius[j])
            });
            let s = neumaier_sum(terms);
            node_mean.push(s / volume);
            // Double disk average for the self cell.
            let self_fix = weights[m] * (0.25 - 0.5);
            theta_terms.push(weights[m] * (s + self_fix) / volume);
        }
        let theta = neumaier_sum(theta_terms) / volume;
        Ok(GeneralKernel { points, phi: phi_v, weights, volume, radius, node_mean, theta })
    }

    /// `m_g(f) = v_g(S²)⁻¹ ∫ f dv_g` applied to `ln 1/|x−·|`.
    pub fn mean_log(&self, x: Complex64) -> f64 {
        let terms = self
            .points
            .iter()
            .zip(&self.weights)
            .zip(&self.radius)
            .map(|((&p, &w), &r)| w * disk_mean_log((x - p).norm(), r));
        neumaier_sum(terms) / self.volume
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Cell weights `e^{φ(x_n)} w_n` of `v_g`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    /// `m_g(ln 1/|x_n − ·|)` at the grid nodes.
    pub fn node_mean_log(&self) -> &[f64] {
        &self.node_mean
    }

    pub fn green(&self, x: Complex64, y: Complex64) -> Result<f64> {
        let d = (x - y).norm();
        if d == 0.0 {
            return Err(Error::Diagonal(format!("{x}")));
        }
        Ok(-d.ln() - self.mean_log(x) - self.mean_log(y) + self.theta)
    }

    /// Kernel between two grid nodes, `m ≠ n`.
    pub fn node_green(&self, m: usize, n: usize) -> f64 {
        -(self.points[m] - self.points[n]).norm().ln() - self.node_mean[m] - self.node_mean[n] + self.theta
    }

    /// Kernel between node `n` and an arbitrary point, given `mean_log(z)`.
    pub(crate) fn node_point_green(&self, n: usize, z: Complex64, mean_log_z: f64) -> f64 {
        -(self.points[n] - z).norm().ln() - self.node_mean[n] - mean_log_z + self.theta
    }

    /// Regular part `lim_{y→x} G_g(x,y) + ln|x−y| = θ_g − 2 m_g(ln 1/|x−·|)`.
    pub fn regular_part(&self, x: Complex64) -> f64 {
        self.theta - 2.0 * self.mean_log(x)
    }

    pub fn node_regular_part(&self, n: usize) -> f64 {
        self.theta - 2.0 * self.node_mean[n]
    }
}

/// Regular part of the round kernel, `−½ ln ĝ(x) + ln 2 − ½`.
pub fn round_regular_part(x: Complex64) -> f64 {
    -0.5 * log_round_metric(x) + super::ROUND_GREEN_CONSTANT
}

/// One-off evaluation of the general kernel. Prefer [`GeneralKernel`] for
/// repeated use.
pub fn green_general(x: Complex64, y: Complex64, phi: &ConformalFactor, grid: &SphereGrid) -> Result<f64> {
    GeneralKernel::new(phi, grid)?.green(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_functional_is_sixteen_pi_c() {
        let g = SphereGrid::fibonacci(512).unwrap();
        let s = liouville_functional(&ConformalFactor::constant(0.3), &g);
        assert!((s - 16.0 * std::f64::consts::PI * 0.3).abs() < 1e-12);
        assert_eq!(liouville_functional(&ConformalFactor::zero(), &g), 0.0);
    }

    #[test]
    fn round_curvature_is_two() {
        let x = Complex64::new(0.4, -0.7);
        assert_eq!(curvature(&ConformalFactor::zero(), x), 2.0);
        assert!((curvature(&ConformalFactor::constant(1.0), x) - 2.0 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_matches_analytic_bump() {
        let a = ConformalFactor::bump(0.3);
        let f = ConformalFactor::new("bump-fd", |x| 0.3 / (1.0 + x.norm_sqr()));
        for x in [Complex64::new(0.2, 0.1), Complex64::new(-1.5, 2.0)] {
            let (ga, gf) = (a.gradient(x), f.gradient(x));
            assert!((ga[0] - gf[0]).abs() < 1e-8 && (ga[1] - gf[1]).abs() < 1e-8);
            assert!((a.flat_laplacian(x) - f.flat_laplacian(x)).abs() < 1e-5);
        }
    }

    #[test]
    fn disk_average_continuous_at_rim() {
        let r = 0.1;
        assert!((disk_mean_log(r, r) - disk_mean_log(r * (1.0 - 1e-12), r)).abs() < 1e-10);
    }
}
