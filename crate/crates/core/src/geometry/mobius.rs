use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::{green_round, log_round_metric};
use crate::error::{Error, Result};

/// `ψ(z) = (az + b)/(cz + d)` with `ad − bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl MobiusMap {
    /// Normalizes by a square root of `ad − bc`.
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 0.0) || !det.is_finite() {
            return Err(Error::Mobius(format!("ad − bc = {det} must be finite and nonzero")));
        }
        let s = det.sqrt();
        Ok(MobiusMap { a: a / s, b: b / s, c: c / s, d: d / s })
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        MobiusMap { a: one, b: zero, c: zero, d: one }
    }

    /// `z ↦ λz`.
    pub fn scaling(lambda: Complex64) -> Result<Self> {
        Self::new(lambda, 0.0.into(), 0.0.into(), 1.0.into())
    }

    /// `z ↦ 1/z`.
    pub fn inversion() -> Self {
        Self::new(0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()).expect("det = −1")
    }

    pub fn coefficients(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Parses `"a,b,c,d"` where each entry is a complex literal such as
    /// `2`, `-i`, `0.5+1.5i`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Mobius(format!("expected four comma-separated entries in {text:?}")));
        }
        let v = parts.iter().map(|p| parse_complex(p)).collect::<Result<Vec<_>>>()?;
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_pole(&self, x: Complex64) -> bool {
        (self.c * x + self.d).norm() == 0.0
    }

    pub fn apply(&self, x: Complex64) -> Result<Complex64> {
        let den = self.c * x + self.d;
        let y = (self.a * x + self.b) / den;
        if den.norm() == 0.0 || !y.is_finite() {
            return Err(Error::Pole(format!("{x}")));
        }
        Ok(y)
    }

    /// `ψ′(x) = 1/(cx + d)²`.
    pub fn derivative(&self, x: Complex64) -> Result<Complex64> {
        let den = self.c * x + self.d;
        if den.norm() == 0.0 {
            return Err(Error::Pole(format!("{x}")));
        }
        Ok(1.0 / (den * den))
    }

    /// `|ψ′(x)|²`.
    pub fn pullback_factor(&self, x: Complex64) -> Result<f64> {
        Ok(self.derivative(x)?.norm_sqr())
    }

    /// `φ(x) = ln(|ψ′(x)|² ĝ(ψ(x)) / ĝ(x))`, the log density of the pulled
    /// back round metric relative to the round metric.
    pub fn log_metric_ratio(&self, x: Complex64) -> Result<f64> {
        let y = self.apply(x)?;
        Ok(self.pullback_factor(x)?.ln() + log_round_metric(y) - log_round_metric(x))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

impl fmt::Display for MobiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |z: Complex64| format!("{}{:+}i", z.re, z.im);
        write!(f, "{},{},{},{}", c(self.a), c(self.b), c(self.c), c(self.d))
    }
}

impl FromStr for MobiusMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Parses `x`, `yi`, `x+yi`, `x-yi`, `i`, `-i` (whitespace ignored).
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Mobius(format!("cannot parse complex number {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    let num = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    if let Some(body) = s.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(i) => (body[..i].parse::<f64>().map_err(|_| bad())?, num(&body[i..])?),
            None => (0.0, num(body)?),
        };
        let z = Complex64::new(re, im);
        if z.is_finite() {
            Ok(z)
        } else {
            Err(bad())
        }
    } else {
        let re: f64 = s.parse().map_err(|_| bad())?;
        if re.is_finite() {
            Ok(Complex64::new(re, 0.0))
        } else {
            Err(bad())
        }
    }
}

/// `G(ψx, ψy) − G(x, y) + ¼(φ(x) + φ(y))` with `e^φ = ĝ_ψ/ĝ`; zero in
/// exact arithmetic.
pub fn green_mobius_check(psi: &MobiusMap, x: Complex64, y: Complex64) -> Result<f64> {
    let (px, py) = (psi.apply(x)?, psi.apply(y)?);
    let lhs = green_round(px, py)?;
    let rhs = green_round(x, y)?;
    Ok(lhs - rhs + 0.25 * (psi.log_metric_ratio(x)? + psi.log_metric_ratio(y)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_literals() {
        assert_eq!(parse_complex("2").unwrap(), c(2.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("0.5+1.5i").unwrap(), c(0.5, 1.5));
        assert_eq!(parse_complex("1e-3-2e+1i").unwrap(), c(1e-3, -20.0));
        assert_eq!(parse_complex(" -2.5i ").unwrap(), c(0.0, -2.5));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn parse_normalizes_determinant() {
        let m = MobiusMap::parse("2,0,0,1").unwrap();
        let [a, b, cc, d] = m.coefficients();
        assert!((a * d - b * cc - 1.0).norm() < 1e-15);
        assert!((m.apply(c(0.3, 0.4)).unwrap() - c(0.6, 0.8)).norm() < 1e-15);
        assert!(MobiusMap::parse("1,2,2,4").is_err());
    }

    #[test]
    fn inversion_preserves_round_metric_on_circle() {
        let m = MobiusMap::inversion();
        for t in [0.1f64, 1.0, 2.5] {
            let x = c(t.cos(), t.sin());
            assert!(m.log_metric_ratio(x).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn pole_is_rejected() {
        let m = MobiusMap::inversion();
        assert!(matches!(m.apply(c(0.0, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn identity_residual_is_zero() {
        let r = green_mobius_check(&MobiusMap::identity(), c(0.1, 0.2), c(-1.0, 3.0)).unwrap();
        assert_eq!(r, 0.0);
    }
}
