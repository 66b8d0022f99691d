//! Empirical characteristic function on frequency grids, the intensity
//! estimate from zero increments and the distinguished logarithm.
//!
//! Grids are symmetric, `ξ_m = m · step` for `|m| < len`, and only the
//! nonnegative half is stored; the negative half is its complex conjugate
//! (the data are real), which makes the symmetry exact.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::IncrementSample;

/// Frequencies per block of the ECF kernel. Each block restarts the
/// `e^{iξZ}` recurrence from an exact `sin_cos`, bounding round-off drift.
const ECF_BLOCK: usize = 64;

/// Refinement rounds attempted by [`distinguished_log_refined`] on a bad step.
pub const MAX_REFINEMENT_ROUNDS: u32 = 4;

/// ECF values on the nonnegative half of a symmetric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EcfGrid {
    pub step: f64,
    /// `values[m]` is the value at `ξ = m · step`.
    pub values: Vec<Complex64>,
    pub n: usize,
    pub n_zero: usize,
    /// Whether the values carry the factor `e^{λ̂Δ}`.
    pub scaled: bool,
}

impl EcfGrid {
    pub fn xi(&self, m: usize) -> f64 {
        m as f64 * self.step
    }

    /// Value at signed index `m`, using conjugate symmetry for `m < 0`.
    pub fn value(&self, m: i64) -> Complex64 {
        let v = self.values[m.unsigned_abs() as usize];
        if m < 0 { v.conj() } else { v }
    }

    pub fn half_width(&self) -> f64 {
        self.xi(self.values.len() - 1)
    }

    /// Restriction to the first `len` nonnegative frequencies.
    pub fn truncated(&self, len: usize) -> EcfGrid {
        EcfGrid { values: self.values[..len.min(self.values.len())].to_vec(), ..self.clone() }
    }
}

/// Distinguished logarithm on the nonnegative half of a symmetric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    pub step: f64,
    pub values: Vec<Complex64>,
    pub delta: f64,
    /// Whether the values have been divided by `Δ`.
    pub per_unit_time: bool,
    /// Grid intervals that needed dyadic refinement to unwrap.
    pub refined_steps: usize,
}

impl LogGrid {
    pub fn xi(&self, m: usize) -> f64 {
        m as f64 * self.step
    }

    /// Divides by `Δ`, turning `Log φ̃` into an estimate of `Fν`.
    pub fn per_unit_time(mut self) -> LogGrid {
        if !self.per_unit_time {
            let inv = 1.0 / self.delta;
            for v in &mut self.values {
                *v *= inv;
            }
            self.per_unit_time = true;
        }
        self
    }
}

/// `φ̂(ξ) = n⁻¹ Σ_j e^{iξZ_j}` at `ξ = m · step`, `m = 0..len`.
pub fn ecf(sample: &IncrementSample, step: f64, len: usize) -> EcfGrid {
    let n = sample.n() as f64;
    let sums = exp_sums(&sample.values, step, len);
    EcfGrid {
        step,
        values: sums.into_iter().map(|s| s / n).collect(),
        n: sample.n(),
        n_zero: sample.n_zero,
        scaled: false,
    }
}

/// `φ̂` at a single frequency.
pub fn ecf_at(sample: &IncrementSample, xi: f64) -> Complex64 {
    let s: Complex64 = sample.values.iter().map(|z| Complex64::from_polar(1.0, xi * z)).sum();
    s / sample.n() as f64
}

/// `Σ_j e^{i m step z_j}` for `m = 0..len`, deterministic regardless of thread count.
pub fn exp_sums(values: &[f64], step: f64, len: usize) -> Vec<Complex64> {
    let zeros = values.iter().filter(|&&z| z == 0.0).count() as f64;
    let blocks: Vec<Vec<Complex64>> = (0..len.div_ceil(ECF_BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * ECF_BLOCK;
            let end = (start + ECF_BLOCK).min(len);
            let mut acc = vec![Complex64::new(zeros, 0.0); end - start];
            for &z in values {
                if z == 0.0 {
                    continue;
                }
                let w = Complex64::from_polar(1.0, step * z);
                let mut cur = Complex64::from_polar(1.0, start as f64 * step * z);
                for a in acc.iter_mut() {
                    *a += cur;
                    cur *= w;
                }
            }
            acc
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

/// `λ̂ = −Δ⁻¹ log(n₀/n)`.
pub fn lambda_hat(sample: &IncrementSample) -> Result<f64> {
    if sample.n_zero == 0 {
        return Err(Error::NoZeroIncrements { n: sample.n() });
    }
    let frac = sample.n_zero as f64 / sample.n() as f64;
    Ok((-frac.ln() / sample.delta).max(0.0))
}

/// Multiplies by `e^{λ̂Δ}`, giving `φ̃̂ = n₀⁻¹ Σ_j e^{iξZ_j}` when `λ̂` is the zero-count estimate.
pub fn scale_ecf(ecf: &EcfGrid, lambda_hat: f64, delta: f64) -> EcfGrid {
    let factor = (lambda_hat * delta).exp();
    EcfGrid {
        values: ecf.values.iter().map(|v| v * factor).collect(),
        scaled: true,
        ..ecf.clone()
    }
}

/// Grid-relaxed validity event: some zero increment, and no grid value vanishes.
pub fn validity_check(ecf: &EcfGrid) -> bool {
    ecf.n_zero > 0 && ecf.values.iter().all(|v| v.norm() > 0.0)
}

/// Distinguished logarithm by phase unwrapping from `ξ = 0` outward,
/// without refinement.
pub fn distinguished_log(ecf: &EcfGrid, delta: f64) -> Result<LogGrid> {
    unwrap(ecf, delta, None::<&fn(f64) -> Complex64>, 0)
}

/// Distinguished logarithm that, on a step with `|v_{m+1}/v_m − 1| ≥ 1`,
/// re-evaluates the function at dyadic subdivisions of the interval
/// (up to [`MAX_REFINEMENT_ROUNDS`]) and unwraps through them.
pub fn distinguished_log_refined<F>(ecf: &EcfGrid, delta: f64, eval: F) -> Result<LogGrid>
where
    F: Fn(f64) -> Complex64,
{
    unwrap(ecf, delta, Some(&eval), MAX_REFINEMENT_ROUNDS)
}

fn unwrap<F>(ecf: &EcfGrid, delta: f64, eval: Option<&F>, rounds: u32) -> Result<LogGrid>
where
    F: Fn(f64) -> Complex64,
{
    let vals = &ecf.values;
    let mut out = Vec::with_capacity(vals.len());
    let Some(&v0) = vals.first() else {
        return Ok(LogGrid { step: ecf.step, values: out, delta, per_unit_time: false, refined_steps: 0 });
    };
    if v0.norm() == 0.0 {
        return Err(Error::VanishingEcf { xi: 0.0 });
    }
    out.push(v0.ln());
    let mut refined_steps = 0;
    for m in 1..vals.len() {
        let (prev, cur) = (vals[m - 1], vals[m]);
        if cur.norm() == 0.0 {
            return Err(Error::VanishingEcf { xi: ecf.xi(m) });
        }
        let ratio = cur / prev;
        let gap = (ratio - 1.0).norm();
        let increment = if gap < 1.0 {
            ratio.arg()
        } else {
            let Some(eval) = eval else {
                return Err(Error::PhaseStepTooLarge { xi: ecf.xi(m), gap });
            };
            refined_steps += 1;
            refine_increment(eval, ecf.xi(m - 1), ecf.step, prev, cur, rounds)
                .ok_or(Error::PhaseStepTooLarge { xi: ecf.xi(m), gap })?
        };
        let target = out[m - 1].im + increment;
        out.push(anchored_log(cur, target));
    }
    Ok(LogGrid { step: ecf.step, values: out, delta, per_unit_time: false, refined_steps })
}

/// Phase increment across `[xi0, xi0 + step]` through `2^r` sub-steps,
/// for the first `r ≤ rounds` where every sub-step ratio is within 1 of 1.
fn refine_increment<F>(eval: &F, xi0: f64, step: f64, start: Complex64, end: Complex64, rounds: u32) -> Option<f64>
where
    F: Fn(f64) -> Complex64,
{
    'round: for r in 1..=rounds {
        let parts = 1usize << r;
        let mut prev = start;
        let mut total = 0.0;
        for k in 1..=parts {
            let next = if k == parts { end } else { eval(xi0 + step * k as f64 / parts as f64) };
            if next.norm() == 0.0 {
                return None;
            }
            let ratio = next / prev;
            if (ratio - 1.0).norm() >= 1.0 {
                continue 'round;
            }
            total += ratio.arg();
            prev = next;
        }
        return Some(total);
    }
    None
}

/// `ln|v| + i θ` with `θ ≡ arg v (mod 2π)` chosen nearest to `target`.
fn anchored_log(v: Complex64, target: f64) -> Complex64 {
    let arg = v.arg();
    let turns = ((target - arg) / (2.0 * PI)).round();
    Complex64::new(v.norm().ln(), arg + 2.0 * PI * turns)
}

/// Clamps entries with `|z| > u` to the real value `u`. Returns the number clamped.
pub fn truncate_u(log: &LogGrid, u: f64) -> (LogGrid, usize) {
    let mut clamped = 0;
    let values = log
        .values
        .iter()
        .map(|&z| {
            if z.norm() > u {
                clamped += 1;
                Complex64::new(u, 0.0)
            } else {
                z
            }
        })
        .collect();
    (LogGrid { values, ..log.clone() }, clamped)
}
