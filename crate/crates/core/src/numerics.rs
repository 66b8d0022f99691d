//! Small numerical helpers: the `L^p` norm index, discrete norms,
//! Gauss–Legendre quadrature and summary statistics.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Norm index `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Finite(f64),
    Infinity,
}

impl Norm {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Norm::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Norm::Finite(p))
        } else {
            Err(Error::InvalidParameter(format!("norm index p = {p} outside [1, inf]")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Norm::Finite(p) => p,
            Norm::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Norm::Infinity)
    }

    /// True for `p ∈ [1, 2)`, the range needing spatial truncation.
    pub fn below_two(self) -> bool {
        matches!(self, Norm::Finite(p) if p < 2.0)
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::Finite(p) => write!(f, "{p}"),
            Norm::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Norm::Finite(p) => s.serialize_f64(*p),
            Norm::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct NormVisitor;
        impl de::Visitor<'_> for NormVisitor {
            type Value = Norm;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Norm, E> {
                Norm::new(v).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Norm, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Norm, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Norm, E> {
                match v.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => Ok(Norm::Infinity),
                    other => other
                        .parse::<f64>()
                        .map_err(|_| E::custom(format!("bad norm index `{v}`")))
                        .and_then(|p| self.visit_f64(p)),
                }
            }
        }
        d.deserialize_any(NormVisitor)
    }
}

/// Discrete `L^p` norm of a grid function with uniform `spacing`
/// (Riemann sum; maximum modulus for `p = ∞`).
pub fn lp_norm(values: &[f64], spacing: f64, p: Norm) -> f64 {
    match p {
        Norm::Infinity => values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Norm::Finite(1.0) => values.iter().map(|v| v.abs()).sum::<f64>() * spacing,
        Norm::Finite(2.0) => (values.iter().map(|v| v * v).sum::<f64>() * spacing).sqrt(),
        Norm::Finite(p) => {
            (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * spacing).powf(1.0 / p)
        }
    }
}

/// `L^p` distance between two grid functions of equal length.
pub fn lp_distance(a: &[f64], b: &[f64], spacing: f64, p: Norm) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    lp_norm(&diff, spacing, p)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean; `None` with fewer than two values.
pub fn standard_error(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    if values.iter().all(|v| *v == values[0]) {
        return Some(0.0);
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Some((var / values.len() as f64).sqrt())
}

/// Ordinary least squares line `y = intercept + slope x`.
/// Returns `(slope, intercept, residual_rms)`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

pub fn next_power_of_two(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_on_gaussian() {
        let s = integrate(|x| (-x * x / 2.0).exp(), -10.0, 10.0, 40, 16);
        assert!((s - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn lp_norm_indicator_p1() {
        let vals: Vec<f64> = (0..200).map(|k| if (100..200).contains(&k) { 1.0 } else { 0.0 }).collect();
        assert!((lp_norm(&vals, 0.01, Norm::Finite(1.0)) - 1.0).abs() <= 0.01);
    }

    #[test]
    fn lp_norm_gaussian_p2() {
        let h = 0.01;
        let vals: Vec<f64> = (-1000..=1000)
            .map(|k| {
                let x = k as f64 * h;
                (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
            })
            .collect();
        let expect = (2.0 * std::f64::consts::PI.sqrt()).powf(-0.5);
        assert!((lp_norm(&vals, h, Norm::Finite(2.0)) - expect).abs() < 1e-4);
        assert!((expect - 0.53113).abs() < 1e-5);
    }

    #[test]
    fn lp_norm_sup_is_max_modulus() {
        let vals = [0.5, -3.0, 2.0];
        assert_eq!(lp_norm(&vals, 0.1, Norm::Infinity), 3.0);
    }

    #[test]
    fn norm_parses_number_or_inf() {
        let p: Norm = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(p, Norm::Infinity);
        let p: Norm = serde_json::from_str("2").unwrap();
        assert_eq!(p, Norm::Finite(2.0));
        assert!(serde_json::from_str::<Norm>("0.5").is_err());
    }

    #[test]
    fn least_squares_exact_line() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0].iter().map(|&x| (x, 3.0 - 0.5 * x)).collect();
        let (s, i, r) = least_squares(&pts);
        assert!((s + 0.5).abs() < 1e-14 && (i - 3.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0], 0.9), 1.0);
    }
}
