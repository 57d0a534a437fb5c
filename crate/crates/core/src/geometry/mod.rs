//! Round metric, Green kernels, Möbius maps and quadrature on the sphere.
//!
//! Points live in the stereographic chart of the plane. Infinity is never a
//! valid input.

mod conformal;
mod grid;
mod mobius;

pub use conformal::{
    curvature, green_general, liouville_functional, round_regular_part, ConformalFactor,
    GeneralKernel, PhiSpec,
};
pub use grid::SphereGrid;
pub use mobius::{green_mobius_check, parse_complex, MobiusMap};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `ln 2 − ½`, the constant term of the round Green kernel.
pub const ROUND_GREEN_CONSTANT: f64 = std::f64::consts::LN_2 - 0.5;

/// Density `ĝ(x) = 4/(1+|x|²)²` of the round metric.
pub fn round_metric(x: Complex64) -> f64 {
    let s = 1.0 + x.norm_sqr();
    4.0 / (s * s)
}

/// `ln ĝ(x)`, accurate for large `|x|`.
pub fn log_round_metric(x: Complex64) -> f64 {
    4f64.ln() - 2.0 * x.norm_sqr().ln_1p()
}

/// Green function of the round metric, mean zero against `v_ĝ`.
pub fn green_round(x: Complex64, y: Complex64) -> Result<f64> {
    if !(x.re.is_finite() && x.im.is_finite() && y.re.is_finite() && y.im.is_finite()) {
        return Err(Error::Domain("green_round needs finite points".into()));
    }
    let d = (x - y).norm();
    if d == 0.0 {
        return Err(Error::Diagonal(format!("{x}")));
    }
    Ok(green_round_unchecked(x, y))
}

#[inline]
pub(crate) fn green_round_unchecked(x: Complex64, y: Complex64) -> f64 {
    -(x - y).norm().ln() - 0.25 * (log_round_metric(x) + log_round_metric(y)) + ROUND_GREEN_CONSTANT
}

/// Inverse stereographic projection onto the unit sphere.
pub fn to_sphere(x: Complex64) -> [f64; 3] {
    let s = 1.0 + x.norm_sqr();
    [2.0 * x.re / s, 2.0 * x.im / s, (x.norm_sqr() - 1.0) / s]
}

/// Stereographic projection from the north pole.
pub fn from_sphere(p: [f64; 3]) -> Complex64 {
    Complex64::new(p[0], p[1]) / (1.0 - p[2])
}

/// Euclidean distance in `R³` between the sphere images of `x` and `y`.
pub fn chordal_distance(x: Complex64, y: Complex64) -> f64 {
    2.0 * (x - y).norm() / ((1.0 + x.norm_sqr()) * (1.0 + y.norm_sqr())).sqrt()
}
