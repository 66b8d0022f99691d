//! Band-limited smoothing operators: the flat-top convolution kernel and
//! the Meyer scaling-function projection.
//!
//! Both are described through their Fourier multipliers. The flat-top
//! profile `υ` is
//!
//! ```text
//! υ(ξ) = 1                                         |ξ| ≤ c
//!        exp(-b/(|ξ|-1)² · exp(-b/(|ξ|-c)²))       c < |ξ| < 1
//!        0                                         otherwise
//! ```
//!
//! and the Meyer multiplier is `cos(π/2 · χ(3|ξ|/(2π) - 1))` on the
//! transition band `[2π/3, 4π/3]`, with `χ` built from `υ`. At level `J`
//! the multiplier is evaluated at `2^{-J} ξ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{invert_hermitian, SpatialGrid};
use crate::numerics::least_squares;

/// Exponents below this underflow to zero in `f64`.
const EXP_UNDERFLOW: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[serde(rename = "flat_top")]
    FlatTopConvolution,
    #[serde(rename = "meyer")]
    MeyerProjection,
}

/// Operator choice plus the `(b, c)` parameters of the flat-top profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub b: f64,
    pub c: f64,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec { kind: OperatorKind::FlatTopConvolution, b: 1.0, c: 0.05 }
    }
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, b: f64, c: f64) -> Result<Self> {
        let spec = OperatorSpec { kind, b, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn flat_top(b: f64, c: f64) -> Result<Self> {
        Self::new(OperatorKind::FlatTopConvolution, b, c)
    }

    pub fn meyer(b: f64, c: f64) -> Result<Self> {
        Self::new(OperatorKind::MeyerProjection, b, c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidParameter(format!("operator b must be > 0 (got {})", self.b)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidParameter(format!("operator c must lie in (0, 1) (got {})", self.c)));
        }
        Ok(())
    }

    /// Spectral half-width of the multiplier at level 0.
    pub fn xi_op(&self) -> f64 {
        match self.kind {
            OperatorKind::FlatTopConvolution => 1.0,
            OperatorKind::MeyerProjection => 4.0 * PI / 3.0,
        }
    }

    /// The even flat-top profile `υ`.
    pub fn profile(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= self.c {
            return 1.0;
        }
        if a >= 1.0 {
            return 0.0;
        }
        let inner = -self.b / ((a - self.c) * (a - self.c));
        if inner < EXP_UNDERFLOW {
            return 1.0;
        }
        let outer = -self.b / ((a - 1.0) * (a - 1.0)) * inner.exp();
        if outer < EXP_UNDERFLOW {
            return 0.0;
        }
        outer.exp()
    }

    /// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `χ(t) + χ(1-t) = 1`.
    pub fn chi(&self, t: f64) -> f64 {
        let v = self.profile(2.0 * t - 1.0);
        if t <= 0.5 {
            0.5 * v
        } else {
            1.0 - 0.5 * v
        }
    }

    /// Fourier multiplier at level 0; even, in `[0, 1]`, zero outside `[-xi_op, xi_op]`.
    pub fn multiplier(&self, xi: f64) -> f64 {
        match self.kind {
            OperatorKind::FlatTopConvolution => self.profile(xi),
            OperatorKind::MeyerProjection => {
                let a = xi.abs();
                if a <= 2.0 * PI / 3.0 {
                    1.0
                } else if a < 4.0 * PI / 3.0 {
                    let t = self.chi(3.0 * a / (2.0 * PI) - 1.0);
                    if t >= 1.0 { 0.0 } else { (0.5 * PI * t).cos().max(0.0) }
                } else {
                    0.0
                }
            }
        }
    }

    /// Multiplier at level `j`, i.e. `multiplier(2^{-j} ξ)`.
    pub fn level_multiplier(&self, j: u32, xi: f64) -> f64 {
        self.multiplier(xi / level_scale(j))
    }

    /// Number of nonnegative frequency samples of step `dxi` inside the level-`j` band.
    pub fn band_len(&self, j: u32, dxi: f64) -> usize {
        (level_scale(j) * self.xi_op() / dxi).floor() as usize + 1
    }

    /// Applies the level-`j` operator to a Hermitian spectrum given on
    /// `m = 0..transform.len()` at step `dxi`. Returns the output spectrum
    /// on the level-`j` band.
    ///
    /// For the flat-top kernel this is a plain product. The Meyer
    /// projection onto `V_j` also folds in the `±2π 2^j` aliases:
    /// `F(K_j f)(ξ) = Fφ(u) Σ_l Ff(ξ - 2π 2^j l) Fφ(u - 2π l)`, `u = 2^{-j}ξ`.
    pub fn apply_level(&self, j: u32, dxi: f64, transform: &[Complex64]) -> Result<Vec<Complex64>> {
        let len = self.band_len(j, dxi);
        if transform.len() < len {
            return Err(Error::InvalidParameter(format!(
                "spectrum has {} samples, level {j} band needs {len}",
                transform.len()
            )));
        }
        let scale = level_scale(j);
        match self.kind {
            OperatorKind::FlatTopConvolution => Ok((0..len)
                .map(|m| transform[m] * self.multiplier(m as f64 * dxi / scale))
                .collect()),
            OperatorKind::MeyerProjection => {
                let shift_f = 2.0 * PI * scale / dxi;
                let shift = shift_f.round();
                if (shift_f - shift).abs() > 1e-9 * shift_f.max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Meyer projection at level {j} needs 2π·2^j to be a multiple of the frequency step {dxi}"
                    )));
                }
                let shift = shift as i64;
                let at = |idx: i64| -> Complex64 {
                    let v = transform[idx.unsigned_abs() as usize];
                    if idx < 0 { v.conj() } else { v }
                };
                Ok((0..len)
                    .map(|m| {
                        let u = m as f64 * dxi / scale;
                        let outer = self.multiplier(u);
                        if outer == 0.0 {
                            return Complex64::new(0.0, 0.0);
                        }
                        let mut acc = Complex64::new(0.0, 0.0);
                        for l in -1..=1_i64 {
                            let w = self.multiplier(u - 2.0 * PI * l as f64);
                            if w != 0.0 {
                                acc += at(m as i64 - l * shift) * w;
                            }
                        }
                        acc * outer
                    })
                    .collect())
            }
        }
    }

    /// Tabulates the level-0 kernel (`K` for the flat-top operator, `φ` for
    /// Meyer) on `[-half_width, half_width)` by inverse FFT of the multiplier.
    pub fn spatial_table(&self, half_width: f64, points: usize) -> Result<SpatialKernelTable> {
        let grid = SpatialGrid::new(half_width, points)?;
        let dxi = grid.frequency_step();
        let across = 2.0 * self.xi_op() / dxi;
        if across < 64.0 {
            return Err(Error::GridTooCoarse(format!(
                "only {across:.1} frequency samples across the multiplier support (need 64); widen half_width"
            )));
        }
        let len = self.band_len(0, dxi);
        if len > grid.max_frequency_index() {
            return Err(Error::GridTooCoarse(format!(
                "{points} points cannot resolve frequencies up to {}",
                self.xi_op()
            )));
        }
        let half: Vec<Complex64> =
            (0..len).map(|m| Complex64::new(self.multiplier(m as f64 * dxi), 0.0)).collect();
        let raw = invert_hermitian(&half, &grid)?;
        let imag_residue = raw.iter().fold(0.0_f64, |m, v| m.max(v.im.abs()));
        Ok(SpatialKernelTable {
            grid,
            values: raw.iter().map(|v| v.re).collect(),
            imag_residue,
        })
    }

    /// Numerical check of the moment, tail and support conditions.
    pub fn verify_conditions(&self) -> ConditionReport {
        let table = self.spatial_table(512.0, 1 << 16).expect("fixed verification grid is valid");
        let step = table.spacing();
        let mut moments = [0.0; 5];
        for (k, m) in moments.iter_mut().enumerate() {
            *m = table
                .grid
                .xs()
                .iter()
                .zip(&table.values)
                .map(|(y, v)| y.powi(k as i32) * v)
                .sum::<f64>()
                * step;
        }
        let moment_pass = (moments[0] - 1.0).abs() < 1e-6 && moments[1..].iter().all(|m| m.abs() < 1e-5);

        let (tail_exponent, tail_constant) = table.tail_fit();
        let tail_pass = tail_constant.is_finite() && tail_exponent <= -6.0;

        let support_pass = [1.0001, 1.01, 1.5, 2.0, 10.0]
            .iter()
            .all(|f| self.multiplier(f * self.xi_op()) == 0.0 && self.multiplier(-f * self.xi_op()) == 0.0);

        let orthonormality_residual = match self.kind {
            OperatorKind::MeyerProjection => Some(self.orthonormality_residual(512)),
            OperatorKind::FlatTopConvolution => None,
        };
        let ortho_pass = orthonormality_residual.is_none_or(|r| r < 1e-8);
        ConditionReport {
            moments,
            moment_pass,
            tail_exponent,
            tail_constant,
            tail_pass,
            support_pass,
            orthonormality_residual,
            all_pass: moment_pass && tail_pass && support_pass && ortho_pass,
        }
    }

    /// `max_ξ |Σ_{|k|≤4} multiplier(ξ + 2πk)² − 1|` over `points` samples of `[0, 2π]`.
    pub fn orthonormality_residual(&self, points: usize) -> f64 {
        (0..points)
            .map(|i| {
                let xi = 2.0 * PI * i as f64 / (points - 1) as f64;
                let s: f64 = (-4..=4).map(|k| self.multiplier(xi + 2.0 * PI * k as f64).powi(2)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn level_scale(j: u32) -> f64 {
    (j as f64).exp2()
}

/// Kernel values on a uniform grid.
#[derive(Debug, Clone)]
pub struct SpatialKernelTable {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    /// Largest imaginary part discarded from the inverse FFT.
    pub imag_residue: f64,
}

impl SpatialKernelTable {
    pub fn spacing(&self) -> f64 {
        self.grid.step()
    }

    /// Fits `log envelope(|y|) ≈ a + e · log|y|` on the outer band
    /// `W/8 ≤ |y| ≤ W/2` of a table of half width `W`, where the
    /// envelope is the running maximum of `|K|` over `[y, ∞)` and samples at
    /// round-off level are dropped. Returns the exponent `e` and
    /// `C = max |K(y)| (1+|y|)^6` over the table.
    pub fn tail_fit(&self) -> (f64, f64) {
        let xs = self.grid.xs();
        let (lo, hi) = (self.grid.half_width / 8.0, self.grid.half_width / 2.0);
        let mut pairs: Vec<(f64, f64)> = xs
            .iter()
            .zip(&self.values)
            .filter(|(y, _)| **y >= 0.0)
            .map(|(y, v)| (*y, v.abs()))
            .collect();
        let mut env = 0.0_f64;
        for p in pairs.iter_mut().rev() {
            env = env.max(p.1);
            p.1 = env;
        }
        let floor = 1e-14 * self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let pts: Vec<(f64, f64)> = pairs
            .iter()
            .filter(|(y, e)| (lo..=hi).contains(y) && *e > floor)
            .map(|(y, e)| (y.ln(), e.ln()))
            .collect();
        let exponent = if pts.len() >= 3 { least_squares(&pts).0 } else { f64::NEG_INFINITY };
        let constant = xs
            .iter()
            .zip(&self.values)
            .map(|(y, v)| v.abs() * (1.0 + y.abs()).powi(6))
            .fold(0.0, f64::max);
        (exponent, constant)
    }
}

/// Outcome of [`OperatorSpec::verify_conditions`].
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// `∫ y^k K(y) dy` for `k = 0..=4`.
    pub moments: [f64; 5],
    pub moment_pass: bool,
    pub tail_exponent: f64,
    pub tail_constant: f64,
    pub tail_pass: bool,
    pub support_pass: bool,
    pub orthonormality_residual: Option<f64>,
    pub all_pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> OperatorSpec {
        OperatorSpec::flat_top(1.0, 0.05).unwrap()
    }

    fn meyer() -> OperatorSpec {
        OperatorSpec::meyer(1.0, 0.05).unwrap()
    }

    #[test]
    fn chi_examples() {
        let m = meyer();
        assert_eq!(m.chi(-0.2), 0.0);
        assert_eq!(m.chi(0.0), 0.0);
        assert_eq!(m.chi(0.5), 0.5);
        assert_eq!(m.chi(2.0), 1.0);
        assert_eq!(m.chi(1.0), 1.0);
        for i in 1..100 {
            let t = i as f64 / 100.0;
            assert!((m.chi(t) + m.chi(1.0 - t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn multiplier_examples() {
        let f = flat();
        assert_eq!(f.multiplier(0.03), 1.0);
        assert_eq!(f.multiplier(1.2), 0.0);
        assert_eq!(f.multiplier(1.0), 0.0);
        let m = meyer();
        assert_eq!(m.multiplier(4.0 * PI / 3.0), 0.0);
        assert!((m.multiplier(PI) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(m.multiplier(2.0 * PI / 3.0), 1.0);
    }

    #[test]
    fn multiplier_is_even_bounded_and_flat_near_zero() {
        for spec in [flat(), meyer(), OperatorSpec::flat_top(3.0, 0.4).unwrap()] {
            for i in 0..2000 {
                let xi = i as f64 * 0.003;
                let v = spec.multiplier(xi);
                assert_eq!(v, spec.multiplier(-xi));
                assert!((0.0..=1.0).contains(&v));
            }
            assert_eq!(spec.multiplier(0.01), 1.0);
            assert_eq!(spec.multiplier(spec.xi_op() + 0.01), 0.0);
        }
    }

    #[test]
    fn underflow_guard_is_continuous() {
        let f = flat();
        // Just inside c and just inside 1 the nested exponentials underflow.
        assert_eq!(f.profile(0.05 + 1e-3), 1.0);
        assert_eq!(f.profile(1.0 - 1e-3), 0.0);
        assert!(f.profile(0.6) > 0.0 && f.profile(0.6) < 1.0);
    }

    #[test]
    fn meyer_orthonormality() {
        assert!(meyer().orthonormality_residual(512) < 1e-8);
    }

    #[test]
    fn level_multiplier_is_rescaled() {
        let f = flat();
        for j in 0..6 {
            for i in 0..50 {
                let xi = i as f64 * 0.37;
                assert_eq!(f.level_multiplier(j, xi), f.multiplier(xi / 2f64.powi(j as i32)));
            }
        }
    }

    #[test]
    fn spatial_table_moments_flat_top() {
        let t = flat().spatial_table(256.0, 1 << 15).unwrap();
        assert!(t.imag_residue < 1e-10);
        let h = t.spacing();
        let xs = t.grid.xs();
        let m0: f64 = t.values.iter().sum::<f64>() * h;
        let m1: f64 = xs.iter().zip(&t.values).map(|(y, v)| y * v).sum::<f64>() * h;
        let m2: f64 = xs.iter().zip(&t.values).map(|(y, v)| y * y * v).sum::<f64>() * h;
        assert!((m0 - 1.0).abs() < 1e-6, "m0 = {m0}");
        assert!(m1.abs() < 1e-8, "m1 = {m1}");
        assert!(m2.abs() < 1e-5, "m2 = {m2}");
    }

    #[test]
    fn spatial_table_rejects_coarse_grids() {
        assert!(matches!(flat().spatial_table(8.0, 1024), Err(Error::GridTooCoarse(_))));
        assert!(matches!(flat().spatial_table(200.0, 128), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn conditions_hold_for_defaults() {
        for spec in [flat(), meyer()] {
            let r = spec.verify_conditions();
            assert!(r.all_pass, "{spec:?}: {r:?}");
        }
    }

    #[test]
    fn meyer_projection_reproduces_scaling_functions() {
        // F(φ_{j,0}) ∝ Fφ(2^{-j}ξ), which lies in V_j and must be left unchanged.
        let spec = meyer();
        let dxi = PI / 16.0;
        for j in 0..4 {
            let len = spec.band_len(j, dxi);
            let f: Vec<Complex64> =
                (0..len).map(|m| Complex64::new(spec.level_multiplier(j, m as f64 * dxi), 0.0)).collect();
            let g = spec.apply_level(j, dxi, &f).unwrap();
            for (a, b) in f.iter().zip(&g) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn meyer_projection_is_idempotent() {
        let spec = meyer();
        let dxi = PI / 8.0;
        let j = 2;
        let len = spec.band_len(j, dxi);
        let f: Vec<Complex64> = (0..len)
            .map(|m| {
                let xi = m as f64 * dxi;
                Complex64::new(1.0 / (1.0 + xi * xi), 0.3 * xi.sin() / (1.0 + xi))
            })
            .collect();
        let once = spec.apply_level(j, dxi, &f).unwrap();
        let twice = spec.apply_level(j, dxi, &once).unwrap();
        let err = once.iter().zip(&twice).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn meyer_rejects_incommensurate_step() {
        let spec = meyer();
        let f = vec![Complex64::new(1.0, 0.0); 200];
        assert!(spec.apply_level(1, 0.1, &f).is_err());
    }
}
