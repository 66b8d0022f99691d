//! Lepskii's method for the resolution level: the smallest `j` whose
//! estimate stays within `τ √(2^l_(p) / T)` of every finer estimate.

use std::fmt;

use rayon::prelude::*;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimator::{estimate_at_level, prepare, DensityEstimate, EstimatorConfig, GridPlan, SpectralSource};
use crate::model::IncrementSample;
use crate::numerics::{lp_distance, lp_norm, Norm};

/// Threshold constant: a number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Fixed(f64),
    Auto,
}

impl Serialize for Tau {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tau::Fixed(t) => s.serialize_f64(*t),
            Tau::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct TauVisitor;
        impl de::Visitor<'_> for TauVisitor {
            type Value = Tau;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 0 or \"auto\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Tau, E> {
                if v.is_finite() && v >= 0.0 {
                    Ok(Tau::Fixed(v))
                } else {
                    Err(E::custom(format!("tau must be >= 0 (got {v})")))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Tau, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Tau, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Tau, E> {
                if v.eq_ignore_ascii_case("auto") {
                    Ok(Tau::Auto)
                } else {
                    Err(E::custom(format!("bad tau `{v}`")))
                }
            }
        }
        d.deserialize_any(TauVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LepskiiConfig {
    /// Exponent in `2^{J_max} ≈ T / log^η(T ∨ e)`; `None` picks the default for `p`.
    pub eta: Option<f64>,
    pub tau: Tau,
    /// Weight of `1/√λ̂` in the automatic threshold.
    pub c_lambda_weight: f64,
    /// Weight of `max{1, ‖ν̂(J')‖_p}` in the automatic threshold.
    pub c_ms: f64,
    /// Pilot exponent, `2^{J'} ≈ T / log^{η'}(T ∨ e)`; defaults to `η + 1.5`.
    pub eta_prime: Option<f64>,
    /// Threshold used when `tau = auto` but the pilot is unusable.
    pub fallback_tau: f64,
}

impl Default for LepskiiConfig {
    fn default() -> Self {
        LepskiiConfig {
            eta: None,
            tau: Tau::Auto,
            c_lambda_weight: 1.0,
            c_ms: 1.0,
            eta_prime: None,
            fallback_tau: 2.0,
        }
    }
}

impl LepskiiConfig {
    /// `η`, defaulting to 0.5 above the lower bound for `p`.
    pub fn eta(&self, p: Norm, theta_h: Option<f64>) -> f64 {
        self.eta.unwrap_or_else(|| eta_lower_bound(p, theta_h) + 0.5)
    }

    pub fn eta_prime(&self, p: Norm, theta_h: Option<f64>) -> f64 {
        self.eta_prime.unwrap_or_else(|| self.eta(p, theta_h) + 1.5)
    }

    pub fn validate(&self, config: &EstimatorConfig) -> Result<()> {
        let theta_h = config.h_exponents().map(|h| h.0);
        let eta = self.eta(config.p, theta_h);
        let bound = eta_lower_bound(config.p, theta_h);
        if !(eta.is_finite() && eta > bound) {
            return Err(Error::InvalidParameter(format!("eta = {eta} must exceed {bound} for p = {}", config.p)));
        }
        let eta_prime = self.eta_prime(config.p, theta_h);
        if !(eta_prime.is_finite() && eta_prime > eta + 1.0) {
            return Err(Error::InvalidParameter(format!("eta_prime = {eta_prime} must exceed eta + 1 = {}", eta + 1.0)));
        }
        for (name, v) in [
            ("c_lambda_weight", self.c_lambda_weight),
            ("c_ms", self.c_ms),
            ("fallback_tau", self.fallback_tau),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0 (got {v})")));
            }
        }
        Ok(())
    }
}

/// Strict lower bound on `η`: `2/(1−θ_H)` at `p = 1`, 1 at `p = ∞`, 0 otherwise.
pub fn eta_lower_bound(p: Norm, theta_h: Option<f64>) -> f64 {
    match p {
        Norm::Infinity => 1.0,
        Norm::Finite(1.0) => 2.0 / (1.0 - theta_h.unwrap_or(0.75)),
        Norm::Finite(_) => 0.0,
    }
}

/// `floor(log₂(T / log^η(T ∨ e)))`, never below 1.
pub fn max_level(t: f64, eta: f64) -> u32 {
    let l = (t / t.max(std::f64::consts::E).ln().powf(eta)).log2().floor();
    if l.is_finite() && l >= 1.0 { l as u32 } else { 1 }
}

/// Candidate levels `1..=J_max`.
pub fn j_grid(t: f64, eta: f64) -> Vec<u32> {
    (1..=max_level(t, eta)).collect()
}

/// `2^l (1 + (l + log T) 1{p = ∞})`.
pub fn two_pl(l: u32, p: Norm, t: f64) -> f64 {
    let base = (l as f64).exp2();
    if p.is_infinite() { base * (1.0 + l as f64 + t.ln()) } else { base }
}

/// `τ = c_λ / √λ̂ + c_ms · max{1, ‖ν̂(J')‖_p}`.
pub fn tau_from_pilot(lambda_hat: f64, pilot_norm: f64, c_lambda_weight: f64, c_ms: f64) -> f64 {
    c_lambda_weight / lambda_hat.sqrt() + c_ms * pilot_norm.max(1.0)
}

/// Index into `levels` of the smallest level `j` with
/// `distances[j][l] ≤ thresholds[l]` for every `l > j`; the last index if none.
pub fn select_from_stats(distances: &[Vec<f64>], thresholds: &[f64]) -> usize {
    let k = thresholds.len();
    (0..k)
        .find(|&a| (a + 1..k).all(|b| distances[a][b] <= thresholds[b]))
        .unwrap_or(k.saturating_sub(1))
}

/// Where the threshold came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    Fixed,
    Auto,
    Fallback,
}

/// Automatic threshold together with the pilot that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauChoice {
    pub tau: f64,
    pub source: TauSource,
    pub pilot_level: u32,
    pub pilot_norm: Option<f64>,
    pub lambda_hat: f64,
}

/// Everything computed by [`select_j`].
#[derive(Debug, Clone)]
pub struct SelectionTrace {
    pub j_values: Vec<u32>,
    pub estimates: Vec<DensityEstimate>,
    /// `‖ν̂(j) − ν̂(l)‖_p` for all pairs of candidate levels.
    pub pairwise: Vec<Vec<f64>>,
    /// `τ √(2^l_(p) / T)` per candidate level.
    pub thresholds: Vec<f64>,
    pub j_hat: u32,
    pub tau: TauChoice,
    pub horizon: f64,
    pub p: Norm,
}

/// JSON form of a [`SelectionTrace`] (estimates omitted).
#[derive(Debug, Clone, Serialize)]
pub struct SelectionSummary {
    pub j_values: Vec<u32>,
    pub pairwise: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub j_hat: u32,
    pub tau: TauChoice,
    pub horizon: f64,
    pub p: Norm,
    pub valid: Vec<bool>,
}

impl SelectionTrace {
    pub fn selected(&self) -> &DensityEstimate {
        let idx = self.j_values.iter().position(|&j| j == self.j_hat).expect("j_hat is a candidate");
        &self.estimates[idx]
    }

    pub fn summary(&self) -> SelectionSummary {
        SelectionSummary {
            j_values: self.j_values.clone(),
            pairwise: self.pairwise.clone(),
            thresholds: self.thresholds.clone(),
            j_hat: self.j_hat,
            tau: self.tau.clone(),
            horizon: self.horizon,
            p: self.p,
            valid: self.estimates.iter().map(|e| e.valid).collect(),
        }
    }

    /// Repeats the scan with a different threshold constant.
    pub fn reselect(&self, tau: f64) -> u32 {
        let thresholds: Vec<f64> =
            self.j_values.iter().map(|&l| tau * (two_pl(l, self.p, self.horizon) / self.horizon).sqrt()).collect();
        self.j_values[select_from_stats(&self.pairwise, &thresholds)]
    }
}

/// Lepskii selection on one sample. All candidate estimates share the
/// grid of the finest level.
pub fn select_j(sample: &IncrementSample, config: &EstimatorConfig, lcfg: &LepskiiConfig) -> Result<SelectionTrace> {
    config.validate()?;
    lcfg.validate(config)?;
    let t = sample.horizon();
    let theta_h = config.h_exponents().map(|h| h.0);
    let levels = j_grid(t, lcfg.eta(config.p, theta_h));
    let plan = GridPlan::new(config, *levels.last().expect("grid is nonempty"))?;
    let prep = prepare(SpectralSource::Sample(sample), config, plan);

    let estimates: Vec<DensityEstimate> = levels
        .par_iter()
        .map(|&j| estimate_at_level(&prep, config, j))
        .collect::<Result<_>>()?;
    let spacing = plan.grid.step();
    let k = levels.len();
    let mut pairwise = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let d = lp_distance(&estimates[a].values, &estimates[b].values, spacing, config.p);
            pairwise[a][b] = d;
            pairwise[b][a] = d;
        }
    }

    let tau = match lcfg.tau {
        Tau::Fixed(tau) => TauChoice {
            tau,
            source: TauSource::Fixed,
            pilot_level: 0,
            pilot_norm: None,
            lambda_hat: prep.lambda_hat,
        },
        Tau::Auto => {
            let pilot_level = max_level(t, lcfg.eta_prime(config.p, theta_h)).min(plan.max_level);
            let idx = levels.iter().position(|&j| j == pilot_level).expect("pilot level is a candidate");
            auto_tau(&estimates[idx], config.p, lcfg, pilot_level)
        }
    };
    let thresholds: Vec<f64> = levels.iter().map(|&l| tau.tau * (two_pl(l, config.p, t) / t).sqrt()).collect();
    let j_hat = levels[select_from_stats(&pairwise, &thresholds)];
    Ok(SelectionTrace { j_values: levels, estimates, pairwise, thresholds, j_hat, tau, horizon: t, p: config.p })
}

fn auto_tau(pilot: &DensityEstimate, p: Norm, lcfg: &LepskiiConfig, pilot_level: u32) -> TauChoice {
    if !pilot.valid || pilot.lambda_hat <= 0.0 {
        return TauChoice {
            tau: lcfg.fallback_tau,
            source: TauSource::Fallback,
            pilot_level,
            pilot_norm: None,
            lambda_hat: pilot.lambda_hat,
        };
    }
    let norm = lp_norm(&pilot.values, pilot.spacing(), p);
    TauChoice {
        tau: tau_from_pilot(pilot.lambda_hat, norm, lcfg.c_lambda_weight, lcfg.c_ms),
        source: TauSource::Auto,
        pilot_level,
        pilot_norm: Some(norm),
        lambda_hat: pilot.lambda_hat,
    }
}

/// The automatic threshold for `sample`, computed from the pilot level alone.
pub fn tau_auto(sample: &IncrementSample, config: &EstimatorConfig, lcfg: &LepskiiConfig) -> Result<TauChoice> {
    config.validate()?;
    lcfg.validate(config)?;
    let t = sample.horizon();
    let theta_h = config.h_exponents().map(|h| h.0);
    let j_max = max_level(t, lcfg.eta(config.p, theta_h));
    let pilot_level = max_level(t, lcfg.eta_prime(config.p, theta_h)).min(j_max);
    let plan = GridPlan::new(config, j_max)?;
    let prep = prepare(SpectralSource::Sample(sample), config, plan);
    let pilot = estimate_at_level(&prep, config, pilot_level)?;
    Ok(auto_tau(&pilot, config.p, lcfg, pilot_level))
}
