//! Monte Carlo harness: `L^p` risk over replications, log-log rate fits,
//! sweeps over the sampling interval and sup-fluctuation statistics of the
//! empirical characteristic function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{choose_j_oracle, estimate_fixed_j, estimate_population, DensityEstimate, EstimatorConfig};
use crate::lepskii::{select_j, LepskiiConfig};
use crate::model::{sample_increments, CompoundPoissonModel, JumpDensity};
use crate::numerics::{least_squares, lp_distance, mean, quantile, standard_error, Norm};
use crate::spectral::exp_sums;

/// How the level is chosen in each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed { j: u32 },
    /// Oracle rate for smoothness `s`, computed from the true `T_λ`.
    Oracle { smoothness: f64 },
    Adaptive { lepskii: LepskiiConfig },
}

/// Whether replications use simulated data or the population transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Empirical,
    Population,
}

/// Per-replication `L^p` errors and their summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub model: CompoundPoissonModel,
    pub p: Norm,
    pub rule: BandwidthRule,
    pub mode: InputMode,
    pub n: usize,
    pub horizon: f64,
    pub t_lambda: f64,
    pub reps: usize,
    pub seed: u64,
    pub errors: Vec<f64>,
    /// Level used in each replication.
    pub levels: Vec<u32>,
    pub valid: Vec<bool>,
    pub mean: f64,
    /// `None` with a single replication.
    pub standard_error: Option<f64>,
    pub median: f64,
    pub q90: f64,
    pub invalid_rate: f64,
}

/// `‖ν̂ − ν‖_p` over the estimate's grid.
pub fn lp_error(estimate: &DensityEstimate, model: &CompoundPoissonModel, p: Norm) -> f64 {
    let truth: Vec<f64> = estimate.xs().iter().map(|&x| model.true_levy_density(x)).collect();
    lp_distance(&estimate.values, &truth, estimate.spacing(), p)
}

/// Runs `reps` replications; replication `r` simulates with seed `seed + r`.
pub fn mc_risk(
    model: &CompoundPoissonModel,
    config: &EstimatorConfig,
    rule: &BandwidthRule,
    mode: InputMode,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<RiskReport> {
    config.validate()?;
    if reps == 0 || n == 0 {
        return Err(Error::InvalidParameter("reps and n must be >= 1".into()));
    }
    let horizon = model.horizon(n);
    let t_lambda = model.effective_horizon(n);
    let fixed_level = match rule {
        BandwidthRule::Fixed { j } => Some(*j),
        BandwidthRule::Oracle { smoothness } => Some(choose_j_oracle(t_lambda, *smoothness, config.p)),
        BandwidthRule::Adaptive { .. } => None,
    };
    let outcomes: Vec<(f64, u32, bool)> = match mode {
        InputMode::Population => {
            let j = fixed_level.ok_or_else(|| {
                Error::InvalidParameter("population input needs a fixed or oracle level".into())
            })?;
            let est = estimate_population(model, horizon, config, j)?;
            vec![(lp_error(&est, model, config.p), j, est.valid); reps]
        }
        InputMode::Empirical => (0..reps)
            .into_par_iter()
            .map(|r| {
                let sample = sample_increments(model, n, seed.wrapping_add(r as u64));
                let est = match (fixed_level, rule) {
                    (Some(j), _) => estimate_fixed_j(&sample, config, j)?,
                    (None, BandwidthRule::Adaptive { lepskii }) => select_j(&sample, config, lepskii)?.selected().clone(),
                    (None, _) => unreachable!("non-adaptive rules fix the level"),
                };
                Ok((lp_error(&est, model, config.p), est.j, est.valid))
            })
            .collect::<Result<_>>()?,
    };
    Ok(summarize(model, config.p, rule, mode, n, seed, outcomes))
}

fn summarize(
    model: &CompoundPoissonModel,
    p: Norm,
    rule: &BandwidthRule,
    mode: InputMode,
    n: usize,
    seed: u64,
    outcomes: Vec<(f64, u32, bool)>,
) -> RiskReport {
    let errors: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let reps = errors.len();
    RiskReport {
        model: model.clone(),
        p,
        rule: rule.clone(),
        mode,
        n,
        horizon: model.horizon(n),
        t_lambda: model.effective_horizon(n),
        reps,
        seed,
        mean: mean(&errors),
        standard_error: standard_error(&errors),
        median: quantile(&errors, 0.5),
        q90: quantile(&errors, 0.9),
        invalid_rate: outcomes.iter().filter(|o| !o.2).count() as f64 / reps as f64,
        levels: outcomes.iter().map(|o| o.1).collect(),
        valid: outcomes.iter().map(|o| o.2).collect(),
        errors,
    }
}

/// Least-squares line through `(ln T_λ, ln mean risk)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

pub fn rate_fit(reports: &[RiskReport]) -> Result<RateFit> {
    rate_fit_points(reports.iter().map(|r| (r.t_lambda, r.mean)).collect())
}

/// Rate fit from raw `(T_λ, mean risk)` pairs.
pub fn rate_fit_points(pairs: Vec<(f64, f64)>) -> Result<RateFit> {
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientPoints { need: 3, got: distinct.len() });
    }
    let points: Vec<(f64, f64)> = pairs.iter().map(|&(t, r)| (t.ln(), r.ln())).collect();
    let (slope, intercept, residual_rms) = least_squares(&points);
    Ok(RateFit { points, slope, intercept, residual_rms })
}

/// One report per sampling interval at a fixed horizon `t`.
#[allow(clippy::too_many_arguments)]
pub fn regime_sweep(
    jump: &JumpDensity,
    lambda: f64,
    t: f64,
    deltas: &[f64],
    config: &EstimatorConfig,
    rule: &BandwidthRule,
    reps: usize,
    seed: u64,
) -> Result<Vec<RiskReport>> {
    deltas
        .iter()
        .map(|&delta| {
            let n = observations_for(t, delta)?;
            let model = CompoundPoissonModel::new(lambda, jump.clone(), delta)?;
            mc_risk(&model, config, rule, InputMode::Empirical, n, reps, seed)
        })
        .collect()
}

/// `n = T / Δ`, which must be a positive integer.
pub fn observations_for(t: f64, delta: f64) -> Result<usize> {
    let n = t / delta;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidParameter(format!("T = {t} is not an integer multiple of delta = {delta}")));
    }
    Ok(rounded as usize)
}

/// Risk of every fixed level and of the Lepskii choice, on shared samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveComparison {
    pub levels: Vec<u32>,
    /// Mean risk of each fixed level in `levels`.
    pub fixed_mean: Vec<f64>,
    pub adaptive_errors: Vec<f64>,
    pub adaptive_mean: f64,
    pub selected: Vec<u32>,
    pub taus: Vec<f64>,
    /// Replications where the selection was nonincreasing along a ladder of thresholds.
    pub monotone_reps: usize,
    pub reps: usize,
}

impl AdaptiveComparison {
    pub fn best_fixed(&self) -> (u32, f64) {
        self.levels
            .iter()
            .zip(&self.fixed_mean)
            .map(|(&j, &r)| (j, r))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one level")
    }
}

pub fn adaptive_comparison(
    model: &CompoundPoissonModel,
    config: &EstimatorConfig,
    lcfg: &LepskiiConfig,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<AdaptiveComparison> {
    const TAU_LADDER: [f64; 9] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0];
    let per_rep: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sample = sample_increments(model, n, seed.wrapping_add(r as u64));
            let trace = select_j(&sample, config, lcfg)?;
            let errs: Vec<f64> = trace.estimates.iter().map(|e| lp_error(e, model, config.p)).collect();
            let chosen = lp_error(trace.selected(), model, config.p);
            let picks: Vec<u32> = TAU_LADDER.iter().map(|&t| trace.reselect(t)).collect();
            let monotone = picks.windows(2).all(|w| w[1] <= w[0]);
            Ok(RepOutcome {
                levels: trace.j_values.clone(),
                errs,
                chosen,
                j_hat: trace.j_hat,
                tau: trace.tau.tau,
                monotone,
            })
        })
        .collect::<Result<_>>()?;
    let levels = per_rep[0].levels.clone();
    let fixed_mean = (0..levels.len())
        .map(|k| per_rep.iter().map(|r| r.errs[k]).sum::<f64>() / reps as f64)
        .collect();
    let adaptive_errors: Vec<f64> = per_rep.iter().map(|r| r.chosen).collect();
    Ok(AdaptiveComparison {
        levels,
        fixed_mean,
        adaptive_mean: mean(&adaptive_errors),
        adaptive_errors,
        selected: per_rep.iter().map(|r| r.j_hat).collect(),
        taus: per_rep.iter().map(|r| r.tau).collect(),
        monotone_reps: per_rep.iter().filter(|r| r.monotone).count(),
        reps,
    })
}

struct RepOutcome {
    levels: Vec<u32>,
    errs: Vec<f64>,
    chosen: f64,
    j_hat: u32,
    tau: f64,
    monotone: bool,
}

/// Sup-fluctuation of the ECF over `[0, Ξ']` across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationStats {
    pub xi_prime: f64,
    pub delta_exp: f64,
    pub n: usize,
    pub delta: f64,
    pub t_lambda: f64,
    pub grid_points: usize,
    pub reps: usize,
    /// `√(T_λ log^{1+2δ}(e + Ξ'))`.
    pub normalizer: f64,
    /// Mean of `sup n |φ̂ − φ|`.
    pub mean_sup: f64,
    /// Mean of the normalized sup.
    pub mean_normalized: f64,
    pub median_normalized: f64,
    pub q90_normalized: f64,
    /// Mean of `sup √n |φ̂ − φ|`.
    pub mean_root_n: f64,
    /// Fraction of replications with `sup n|φ̂ − φ| > 2 · mean_sup + √(32 T_λ)`.
    pub exceedance_rate: f64,
}

/// Points per unit frequency on the sup grid.
pub const FLUCTUATION_DENSITY: f64 = 16.0;

pub fn ecf_fluctuation_stats(
    model: &CompoundPoissonModel,
    n: usize,
    xi_prime: f64,
    delta_exp: f64,
    reps: usize,
    seed: u64,
) -> Result<FluctuationStats> {
    if !(delta_exp.is_finite() && delta_exp > 0.0) {
        return Err(Error::InvalidParameter(format!("delta_exp must be > 0 (got {delta_exp})")));
    }
    if !(xi_prime.is_finite() && xi_prime > 0.0) {
        return Err(Error::InvalidParameter(format!("xi_prime must be > 0 (got {xi_prime})")));
    }
    if reps == 0 || n == 0 {
        return Err(Error::InvalidParameter("reps and n must be >= 1".into()));
    }
    let len = (xi_prime * FLUCTUATION_DENSITY).ceil() as usize + 1;
    let step = xi_prime / (len - 1) as f64;
    let truth: Vec<_> = (0..len).map(|m| model.true_cf(m as f64 * step)).collect();
    let sups: Vec<f64> = (0..reps)
        .map(|r| {
            let sample = sample_increments(model, n, seed.wrapping_add(r as u64));
            let sums = exp_sums(&sample.values, step, len);
            sums.iter()
                .zip(&truth)
                .map(|(s, phi)| (s - phi * n as f64).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(fluctuation_summary(model, n, xi_prime, delta_exp, len, &sups))
}

fn fluctuation_summary(
    model: &CompoundPoissonModel,
    n: usize,
    xi_prime: f64,
    delta_exp: f64,
    grid_points: usize,
    sups: &[f64],
) -> FluctuationStats {
    let t_lambda = model.effective_horizon(n);
    let normalizer = (t_lambda * (std::f64::consts::E + xi_prime).ln().powf(1.0 + 2.0 * delta_exp)).sqrt();
    let normalized: Vec<f64> = sups.iter().map(|s| s / normalizer).collect();
    let mean_sup = mean(sups);
    let cut = 2.0 * mean_sup + (32.0 * t_lambda).sqrt();
    FluctuationStats {
        xi_prime,
        delta_exp,
        n,
        delta: model.delta,
        t_lambda,
        grid_points,
        reps: sups.len(),
        normalizer,
        mean_sup,
        mean_normalized: mean(&normalized),
        median_normalized: quantile(&normalized, 0.5),
        q90_normalized: quantile(&normalized, 0.9),
        mean_root_n: mean_sup / (n as f64).sqrt(),
        exceedance_rate: sups.iter().filter(|&&s| s > cut).count() as f64 / sups.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(delta: f64) -> CompoundPoissonModel {
        CompoundPoissonModel::new(1.0, JumpDensity::gaussian(0.0, 1.0), delta).unwrap()
    }

    #[test]
    fn exact_power_law_fit() {
        let pairs: Vec<(f64, f64)> = [100.0, 400.0, 1600.0, 6400.0].iter().map(|&t: &f64| (t, t.powf(-1.0 / 3.0))).collect();
        let fit = rate_fit_points(pairs).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
        let flat = rate_fit_points(vec![(10.0, 0.2), (20.0, 0.2), (40.0, 0.2)]).unwrap();
        assert!(flat.slope.abs() < 1e-15);
        assert!(matches!(
            rate_fit_points(vec![(10.0, 1.0), (10.0, 2.0), (20.0, 1.0)]),
            Err(Error::InsufficientPoints { need: 3, got: 2 })
        ));
    }

    #[test]
    fn population_mode_is_pure_bias() {
        let model = gaussian(0.5);
        let r = mc_risk(&model, &EstimatorConfig::default(), &BandwidthRule::Fixed { j: 2 }, InputMode::Population, 400, 3, 0)
            .unwrap();
        assert!(r.errors.iter().all(|&e| e == r.errors[0]));
        assert_eq!(r.standard_error, Some(0.0));
        assert!(r.errors[0] > 0.0);
    }

    #[test]
    fn single_replication_has_no_standard_error() {
        let r = mc_risk(&gaussian(0.5), &EstimatorConfig::default(), &BandwidthRule::Fixed { j: 2 }, InputMode::Empirical, 200, 1, 3)
            .unwrap();
        assert_eq!(r.standard_error, None);
        assert_eq!(r.errors.len(), 1);
    }

    #[test]
    fn reports_are_deterministic_and_consistent() {
        let model = gaussian(0.5);
        let rule = BandwidthRule::Oracle { smoothness: 2.0 };
        let a = mc_risk(&model, &EstimatorConfig::default(), &rule, InputMode::Empirical, 500, 6, 11).unwrap();
        let b = mc_risk(&model, &EstimatorConfig::default(), &rule, InputMode::Empirical, 500, 6, 11).unwrap();
        assert_eq!(a, b);
        let lo = a.errors.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.errors.iter().cloned().fold(0.0, f64::max);
        assert!(a.mean >= lo && a.mean <= hi && a.median <= a.q90);
        assert_eq!(a.levels, vec![choose_j_oracle(250.0, 2.0, Norm::Finite(2.0)); 6]);
    }

    #[test]
    fn risk_decreases_with_horizon() {
        let model = gaussian(0.5);
        let rule = BandwidthRule::Oracle { smoothness: 2.0 };
        let means: Vec<f64> = [500, 2000, 8000]
            .iter()
            .map(|&n| mc_risk(&model, &EstimatorConfig::default(), &rule, InputMode::Empirical, n, 20, 7).unwrap().mean)
            .collect();
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }

    #[test]
    fn sweep_keeps_the_horizon() {
        let reports = regime_sweep(
            &JumpDensity::gaussian(0.0, 1.0),
            1.0,
            100.0,
            &[0.1, 0.5, 1.0, 2.0],
            &EstimatorConfig::default(),
            &BandwidthRule::Fixed { j: 2 },
            2,
            1,
        )
        .unwrap();
        assert_eq!(reports.len(), 4);
        assert!(reports.iter().all(|r| (r.t_lambda - 100.0).abs() < 1e-9));
        assert_eq!(reports[0].n, 1000);
        assert!(observations_for(100.0, 0.3).is_err());
    }

    #[test]
    fn fluctuation_of_degenerate_sample_is_small() {
        // With λΔ tiny almost every replication has Z = 0, and n|1 − φ| ≤ n(1 − e^{−2λΔ}).
        let model = CompoundPoissonModel::new(1.0, JumpDensity::gaussian(0.0, 1.0), 1e-6).unwrap();
        let s = ecf_fluctuation_stats(&model, 1, 10.0, 0.5, 20, 0).unwrap();
        assert!(s.mean_sup <= 1.0 - (-2e-6_f64).exp() + 1e-15);
        assert_eq!(s.grid_points, 161);
        assert!(ecf_fluctuation_stats(&model, 1, 10.0, 0.0, 2, 0).is_err());
    }

    #[test]
    fn adaptive_comparison_records_every_level() {
        let model = CompoundPoissonModel::new(1.0, JumpDensity::laplace(1.0), 0.5).unwrap();
        let c = adaptive_comparison(&model, &EstimatorConfig::default(), &LepskiiConfig::default(), 600, 4, 2).unwrap();
        assert_eq!(c.fixed_mean.len(), c.levels.len());
        assert_eq!(c.monotone_reps, 4);
        assert!(c.selected.iter().all(|j| c.levels.contains(j)));
        assert!(c.adaptive_mean >= c.best_fixed().1 * 0.5);
    }
}
