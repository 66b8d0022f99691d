//! Inverse Fourier transform of band-limited spectra onto a uniform
//! spatial grid, with the convention `f(x) = (2π)^{-1} ∫ e^{-iξx} Ff(ξ) dξ`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Uniform spatial grid `x_k = -half_width + k · step`, `k = 0..points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub half_width: f64,
    pub points: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!("half width must be > 0 (got {half_width})")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("points must be a power of two (got {points})")));
        }
        Ok(SpatialGrid { half_width, points })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.step()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.x(k)).collect()
    }

    /// Spacing of the dual frequency grid, `2π / (points · step) = π / half_width`.
    pub fn frequency_step(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Largest frequency index representable without wrapping onto the Nyquist bin.
    pub fn max_frequency_index(&self) -> usize {
        self.points / 2 - 1
    }
}

/// Evaluates `(2π)^{-1} Σ_{|m| ≤ K} dξ · e^{-i ξ_m x_k} G(ξ_m)` on `grid`, where
/// `half[m] = G(m dξ)` for `m = 0..=K` and `G(-ξ) = conj(G(ξ))`.
///
/// The frequency step is the grid's dual step, so the sum is one FFT.
pub fn invert_hermitian(half: &[Complex64], grid: &SpatialGrid) -> Result<Vec<Complex64>> {
    let m_len = grid.points;
    if half.len() > grid.max_frequency_index() + 1 {
        return Err(Error::GridTooCoarse(format!(
            "{} frequency samples do not fit below the Nyquist index of a {}-point grid",
            half.len(),
            m_len
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); m_len];
    for (m, g) in half.iter().enumerate() {
        // x_0 = -half_width contributes e^{i m π} = (-1)^m.
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        buf[m] = g * sign;
        if m > 0 {
            buf[m_len - m] = g.conj() * sign;
        }
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m_len).process(&mut buf);
    let scale = grid.frequency_step() / (2.0 * std::f64::consts::PI);
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}
