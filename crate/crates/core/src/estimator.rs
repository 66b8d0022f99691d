//! The spectral Lévy-density estimator
//!
//! ```text
//! ν̂(x) = (2π)⁻¹ ∫ e^{-iξx} clamp_U(Δ⁻¹ Log φ̃̂(ξ)) · K̂(2^{-J} ξ) dξ · 1_{[-H, H]}(x)
//! ```
//!
//! evaluated by one inverse FFT, together with the bandwidth, clamp and
//! truncation selectors and the truncated decompounding series used as a
//! cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{invert_hermitian, SpatialGrid};
use crate::model::{CompoundPoissonModel, IncrementSample};
use crate::numerics::{next_power_of_two, Norm};
use crate::operators::{OperatorKind, OperatorSpec};
use crate::spectral::{
    distinguished_log_refined, ecf, ecf_at, lambda_hat, scale_ecf, truncate_u, validity_check, EcfGrid,
};

/// Estimator settings shared by every bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Loss norm; `p < 2` switches on spatial truncation.
    pub p: Norm,
    pub operator: OperatorSpec,
    /// `U = T^{u_exponent}`.
    pub u_exponent: f64,
    /// Truncation exponents; `None` picks the default for `p`.
    pub theta_h: Option<f64>,
    pub theta_h_prime: Option<f64>,
    /// Spatial points per `2^{J+4}`.
    pub oversampling: usize,
    /// Minimum number of output points (rounded up to a power of two).
    pub x_points: usize,
    /// Output window `[-x_half_width, x_half_width)`; also fixes the frequency step `π / x_half_width`.
    pub x_half_width: f64,
    /// Replace negative output values by zero.
    pub clip_negative: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            p: Norm::Finite(2.0),
            operator: OperatorSpec::default(),
            u_exponent: 0.5,
            theta_h: None,
            theta_h_prime: None,
            oversampling: 4,
            x_points: 1024,
            x_half_width: 16.0,
            clip_negative: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        if !(self.u_exponent.is_finite() && self.u_exponent > 0.0) {
            return Err(Error::InvalidParameter(format!("u_exponent must be > 0 (got {})", self.u_exponent)));
        }
        if self.oversampling == 0 {
            return Err(Error::InvalidParameter("oversampling must be >= 1".into()));
        }
        if self.x_points < 2 || !self.x_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "x_points must be a power of two (got {})",
                self.x_points
            )));
        }
        let x = self.x_half_width;
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InvalidParameter(format!("x_half_width must be > 0 (got {x})")));
        }
        if self.operator.kind == OperatorKind::MeyerProjection && (2.0 * x).fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "the Meyer projection needs 2·x_half_width to be an integer (got {x})"
            )));
        }
        if let Some((th, thp)) = self.h_exponents() {
            check_h_exponents(self.p, th, thp)?;
        }
        Ok(())
    }

    /// `(θ_H, θ_H')` for `p < 2`, `None` when no truncation applies.
    pub fn h_exponents(&self) -> Option<(f64, f64)> {
        let Norm::Finite(p) = self.p else { return None };
        if p >= 2.0 {
            return None;
        }
        let (th, thp) = default_h_exponents(p);
        Some((self.theta_h.unwrap_or(th), self.theta_h_prime.unwrap_or(thp)))
    }
}

/// Default truncation exponents for `p ∈ [1, 2)`: `θ_H` at 3/4 of the way
/// into its admissible interval, `θ_H' = θ_H (1 − 1/p)`.
pub fn default_h_exponents(p: f64) -> (f64, f64) {
    let gap = 1.0 / p - 0.5;
    let th = 0.375 / gap;
    (th, th * (1.0 - 1.0 / p))
}

/// Admissible region for the truncation exponents at `p ∈ [1, 2)`.
pub fn check_h_exponents(p: Norm, theta_h: f64, theta_h_prime: f64) -> Result<()> {
    let Norm::Finite(p) = p else { return Ok(()) };
    if p >= 2.0 {
        return Ok(());
    }
    let gap = 1.0 / p - 0.5;
    let (lo, hi) = (1.0 / (3.0 * gap), 1.0 / (2.0 * gap));
    if !(theta_h > lo && theta_h < hi) {
        return Err(Error::InvalidParameter(format!(
            "theta_h = {theta_h} outside ({lo:.6}, {hi:.6}) for p = {p}"
        )));
    }
    let hi_prime = (1.0 - 1.0 / p) / (2.0 * gap);
    if !(theta_h_prime >= 0.0 && theta_h_prime <= hi_prime) {
        return Err(Error::InvalidParameter(format!(
            "theta_h_prime = {theta_h_prime} outside [0, {hi_prime:.6}] for p = {p}"
        )));
    }
    if p > 1.0 && theta_h - 2.0 * theta_h_prime - 1.0 > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "theta_h - 2 theta_h_prime - 1 must be <= 0 for p in (1, 2) (got {})",
            theta_h - 2.0 * theta_h_prime - 1.0
        )));
    }
    Ok(())
}

/// `J = round(log₂ (T_λ / (log T_λ)^{1{p=∞}})^{1/(2s+1)})`, at least 0.
pub fn choose_j_oracle(t_lambda: f64, s: f64, p: Norm) -> u32 {
    let mut base = t_lambda;
    if p.is_infinite() {
        base /= t_lambda.ln();
    }
    (base.log2() / (2.0 * s + 1.0)).round().max(0.0) as u32
}

/// `U = T^{ϑ_U}`.
pub fn choose_u(t: f64, u_exponent: f64) -> f64 {
    t.powf(u_exponent)
}

/// `H = (√(T / 2^J))^{θ_H} · 2^{J θ_H'}`.
pub fn choose_h(t: f64, j: u32, theta_h: f64, theta_h_prime: f64) -> f64 {
    let scale = (j as f64).exp2();
    (t / scale).sqrt().powf(theta_h) * scale.powf(theta_h_prime)
}

/// FFT grid able to carry every level up to `max_level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPlan {
    pub grid: SpatialGrid,
    pub max_level: u32,
}

impl GridPlan {
    /// Points `= max(x_points, oversampling · 2^{J+4})`, raised further if
    /// the level-`J` band would reach the Nyquist index.
    pub fn new(config: &EstimatorConfig, max_level: u32) -> Result<Self> {
        let x = config.x_half_width;
        let dxi = std::f64::consts::PI / x;
        let band = config.operator.band_len(max_level, dxi);
        let points = next_power_of_two(
            config
                .x_points
                .max(config.oversampling << (max_level + 4))
                .max(2 * (band + 1)),
        );
        Ok(GridPlan { grid: SpatialGrid::new(x, points)?, max_level })
    }

    pub fn frequency_step(&self) -> f64 {
        self.grid.frequency_step()
    }

    /// Nonnegative frequencies needed for the finest level.
    pub fn band_len(&self, operator: &OperatorSpec) -> usize {
        let len = operator.band_len(self.max_level, self.frequency_step());
        match operator.kind {
            OperatorKind::FlatTopConvolution => len,
            // Alias folding reads the spectrum one period beyond the band.
            OperatorKind::MeyerProjection => {
                len + (2.0 * std::f64::consts::PI * (self.max_level as f64).exp2() / self.frequency_step())
                    .round() as usize
            }
        }
    }
}

/// Where the characteristic function comes from.
#[derive(Debug, Clone, Copy)]
pub enum SpectralSource<'a> {
    Sample(&'a IncrementSample),
    /// True characteristic function and intensity; `horizon` plays the role of `T`.
    Population { model: &'a CompoundPoissonModel, horizon: f64 },
}

/// `Δ⁻¹ Log φ̃̂` on the finest band of a plan, reusable across levels.
#[derive(Debug, Clone)]
pub struct PreparedSpectrum {
    pub plan: GridPlan,
    pub lambda_hat: f64,
    pub horizon: f64,
    pub valid: bool,
    /// Reason the validity event failed.
    pub invalid_reason: Option<String>,
    /// `Δ⁻¹ Log φ̃̂` for `m = 0..band`; empty when invalid.
    pub log_values: Vec<Complex64>,
    pub refined_steps: usize,
}

/// Computes `λ̂`, the ECF on the plan's band, checks validity and takes the
/// distinguished logarithm (refining steps where needed).
pub fn prepare(source: SpectralSource<'_>, config: &EstimatorConfig, plan: GridPlan) -> PreparedSpectrum {
    let dxi = plan.frequency_step();
    let len = plan.band_len(&config.operator);
    let invalid = |lambda_hat: f64, horizon: f64, reason: String| PreparedSpectrum {
        plan,
        lambda_hat,
        horizon,
        valid: false,
        invalid_reason: Some(reason),
        log_values: Vec::new(),
        refined_steps: 0,
    };
    match source {
        SpectralSource::Sample(sample) => {
            let horizon = sample.horizon();
            let lam = match lambda_hat(sample) {
                Ok(l) => l,
                Err(e) => return invalid(0.0, horizon, e.to_string()),
            };
            let raw = ecf(sample, dxi, len);
            if !validity_check(&raw) {
                return invalid(lam, horizon, "empirical characteristic function vanishes on the grid".into());
            }
            let scaled = scale_ecf(&raw, lam, sample.delta);
            let factor = (lam * sample.delta).exp();
            let eval = |xi: f64| ecf_at(sample, xi) * factor;
            match distinguished_log_refined(&scaled, sample.delta, eval) {
                Ok(log) => PreparedSpectrum {
                    plan,
                    lambda_hat: lam,
                    horizon,
                    valid: true,
                    invalid_reason: None,
                    refined_steps: log.refined_steps,
                    log_values: log.per_unit_time().values,
                },
                Err(e) => invalid(lam, horizon, e.to_string()),
            }
        }
        SpectralSource::Population { model, horizon } => {
            let factor = (model.lambda * model.delta).exp();
            let grid = EcfGrid {
                step: dxi,
                values: (0..len).map(|m| model.true_cf(m as f64 * dxi) * factor).collect(),
                n: 1,
                n_zero: 1,
                scaled: true,
            };
            match distinguished_log_refined(&grid, model.delta, |xi| model.true_cf(xi) * factor) {
                Ok(log) => PreparedSpectrum {
                    plan,
                    lambda_hat: model.lambda,
                    horizon,
                    valid: true,
                    invalid_reason: None,
                    refined_steps: log.refined_steps,
                    log_values: log.per_unit_time().values,
                },
                Err(e) => invalid(model.lambda, horizon, e.to_string()),
            }
        }
    }
}

/// Estimate of `ν` on a uniform grid plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    pub j: u32,
    pub lambda_hat: f64,
    pub valid: bool,
    /// Spatial truncation radius; `None` means no truncation.
    pub h: Option<f64>,
    /// Clamp level; `None` when no clamp was applied.
    pub u: Option<f64>,
    /// Frequency samples replaced by `U`.
    pub clamped: usize,
    /// Largest imaginary part dropped after inversion.
    pub imag_residue: f64,
    pub refined_steps: usize,
    /// Free-form warnings, e.g. the series estimator outside its regime.
    pub warnings: Vec<String>,
}

/// JSON sidecar for an estimate.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub j: u32,
    pub lambda_hat: f64,
    pub valid: bool,
    /// `null` when no spatial truncation applies.
    pub h: Option<f64>,
    pub u: Option<f64>,
    pub clamped: usize,
    pub x_half_width: f64,
    pub x_points: usize,
    pub imag_residue: f64,
    pub refined_steps: usize,
    pub warnings: Vec<String>,
}

impl DensityEstimate {
    pub fn xs(&self) -> Vec<f64> {
        self.grid.xs()
    }

    pub fn spacing(&self) -> f64 {
        self.grid.step()
    }

    pub fn summary(&self) -> EstimateSummary {
        EstimateSummary {
            j: self.j,
            lambda_hat: self.lambda_hat,
            valid: self.valid,
            h: self.h,
            u: self.u,
            clamped: self.clamped,
            x_half_width: self.grid.half_width,
            x_points: self.grid.points,
            imag_residue: self.imag_residue,
            refined_steps: self.refined_steps,
            warnings: self.warnings.clone(),
        }
    }

    fn zero(grid: SpatialGrid, j: u32, lambda_hat: f64, valid: bool, warnings: Vec<String>) -> Self {
        DensityEstimate {
            grid,
            values: vec![0.0; grid.points],
            j,
            lambda_hat,
            valid,
            h: None,
            u: None,
            clamped: 0,
            imag_residue: 0.0,
            refined_steps: 0,
            warnings,
        }
    }
}

/// Level-`j` estimate from a prepared spectrum (`j ≤ plan.max_level`).
pub fn estimate_at_level(prep: &PreparedSpectrum, config: &EstimatorConfig, j: u32) -> Result<DensityEstimate> {
    check_level(&prep.plan, j)?;
    let h = config.h_exponents().map(|(th, thp)| choose_h(prep.horizon, j, th, thp));
    if !prep.valid {
        let mut est = DensityEstimate::zero(prep.plan.grid, j, prep.lambda_hat, false, Vec::new());
        est.warnings.extend(prep.invalid_reason.clone());
        return Ok(est);
    }
    let u = choose_u(prep.horizon, config.u_exponent);
    let log = crate::spectral::LogGrid {
        step: prep.plan.frequency_step(),
        values: prep.log_values.clone(),
        delta: 1.0,
        per_unit_time: true,
        refined_steps: prep.refined_steps,
    };
    let (clamped_log, clamped) = truncate_u(&log, u);
    let mut est = finish(&clamped_log.values, prep.plan, config, j, h)?;
    est.lambda_hat = prep.lambda_hat;
    est.u = Some(u);
    est.clamped = clamped;
    est.refined_steps = prep.refined_steps;
    Ok(est)
}

/// The estimator at a fixed level `j` on a plan sized for `j`.
pub fn estimate_fixed_j(sample: &IncrementSample, config: &EstimatorConfig, j: u32) -> Result<DensityEstimate> {
    config.validate()?;
    let plan = GridPlan::new(config, j)?;
    estimate_at_level(&prepare(SpectralSource::Sample(sample), config, plan), config, j)
}

/// The estimator with the population characteristic function and intensity.
pub fn estimate_population(
    model: &CompoundPoissonModel,
    horizon: f64,
    config: &EstimatorConfig,
    j: u32,
) -> Result<DensityEstimate> {
    config.validate()?;
    let plan = GridPlan::new(config, j)?;
    estimate_at_level(&prepare(SpectralSource::Population { model, horizon }, config, plan), config, j)
}

/// Truncated decompounding series with `terms` terms:
/// `Σ_{i=1}^{I} (−1)^{i−1} (e^{λ̂Δ} − 1)^i / (Δ i) · (F P̂)^i`,
/// `F P̂ = (φ̃̂ − 1) / (e^{λ̂Δ} − 1)`, then the same operator and inversion.
/// No `U` clamp is applied.
pub fn series_estimate(
    sample: &IncrementSample,
    config: &EstimatorConfig,
    j: u32,
    terms: usize,
) -> Result<DensityEstimate> {
    config.validate()?;
    let plan = GridPlan::new(config, j)?;
    check_level(&plan, j)?;
    let h = config.h_exponents().map(|(th, thp)| choose_h(sample.horizon(), j, th, thp));
    let lam = match lambda_hat(sample) {
        Ok(l) => l,
        Err(e) => return Ok(DensityEstimate::zero(plan.grid, j, 0.0, false, vec![e.to_string()])),
    };
    let delta = sample.delta;
    let mut warnings = Vec::new();
    if lam * delta >= std::f64::consts::LN_2 {
        warnings.push(format!(
            "lambda_hat * delta = {:.4} >= ln 2: the series need not converge",
            lam * delta
        ));
    }
    let growth = (lam * delta).exp_m1();
    if terms == 0 || growth == 0.0 {
        return Ok(DensityEstimate::zero(plan.grid, j, lam, true, warnings));
    }
    let len = plan.band_len(&config.operator);
    let raw = ecf(sample, plan.frequency_step(), len);
    if !validity_check(&raw) {
        return Ok(DensityEstimate::zero(plan.grid, j, lam, false, warnings));
    }
    let scaled = scale_ecf(&raw, lam, delta);
    let spectrum: Vec<Complex64> = scaled
        .values
        .iter()
        .map(|phi| {
            // (e^{λ̂Δ} − 1) F P̂ = φ̃̂ − 1
            let w = phi - 1.0;
            let mut power = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 1..=terms {
                power *= w;
                let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                acc += power * (sign / i as f64);
            }
            acc / delta
        })
        .collect();
    let mut est = finish(&spectrum, plan, config, j, h)?;
    est.lambda_hat = lam;
    est.warnings = warnings;
    Ok(est)
}

fn check_level(plan: &GridPlan, j: u32) -> Result<()> {
    if j > plan.max_level {
        return Err(Error::InvalidParameter(format!(
            "level {j} exceeds the plan's finest level {}",
            plan.max_level
        )));
    }
    Ok(())
}

/// Operator, inversion, truncation and clipping of an estimated `Fν`.
fn finish(
    transform: &[Complex64],
    plan: GridPlan,
    config: &EstimatorConfig,
    j: u32,
    h: Option<f64>,
) -> Result<DensityEstimate> {
    let band = config.operator.apply_level(j, plan.frequency_step(), transform)?;
    let raw = invert_hermitian(&band, &plan.grid)?;
    let imag_residue = raw.iter().fold(0.0_f64, |m, v| m.max(v.im.abs()));
    let xs = plan.grid.xs();
    let values = raw
        .iter()
        .zip(&xs)
        .map(|(v, x)| {
            if h.is_some_and(|h| x.abs() > h) {
                0.0
            } else if config.clip_negative {
                v.re.max(0.0)
            } else {
                v.re
            }
        })
        .collect();
    Ok(DensityEstimate {
        grid: plan.grid,
        values,
        j,
        lambda_hat: 0.0,
        valid: true,
        h,
        u: None,
        clamped: 0,
        imag_residue,
        refined_steps: 0,
        warnings: Vec::new(),
    })
}
