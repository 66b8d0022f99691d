//! Ground-truth compound Poisson models: jump laws, increment simulation
//! and closed-form characteristic functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Jump-size law `μ`. Every family is absolutely continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum JumpDensity {
    Gaussian { mean: f64, sd: f64 },
    /// Centred Laplace law with density `exp(-|x|/scale) / (2 scale)`.
    Laplace { scale: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { a: f64, b: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    #[serde(flatten)]
    pub density: JumpDensity,
}

impl JumpDensity {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        JumpDensity::Gaussian { mean, sd }
    }

    pub fn laplace(scale: f64) -> Self {
        JumpDensity::Laplace { scale }
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        JumpDensity::Gamma { shape, scale }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        JumpDensity::Uniform { a, b }
    }

    pub fn mixture(parts: Vec<(f64, JumpDensity)>) -> Self {
        JumpDensity::Mixture {
            components: parts
                .into_iter()
                .map(|(weight, density)| MixtureComponent { weight, density })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            JumpDensity::Gaussian { mean, sd } => {
                if !mean.is_finite() || !(sd.is_finite() && *sd > 0.0) {
                    return bad(format!("gaussian needs finite mean and sd > 0 (mean={mean}, sd={sd})"));
                }
            }
            JumpDensity::Laplace { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return bad(format!("laplace scale must be > 0 (got {scale})"));
                }
            }
            JumpDensity::Gamma { shape, scale } => {
                if !(shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0) {
                    return bad(format!("gamma needs shape, scale > 0 (got {shape}, {scale})"));
                }
            }
            JumpDensity::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("uniform needs a < b (got [{a}, {b}])"));
                }
            }
            JumpDensity::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture has no components".into());
                }
                let mut total = 0.0;
                for c in components {
                    if !(c.weight.is_finite() && c.weight >= 0.0) {
                        return bad(format!("mixture weight {} is negative", c.weight));
                    }
                    c.density.validate()?;
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            JumpDensity::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            JumpDensity::Laplace { scale } => (-x.abs() / scale).exp() / (2.0 * scale),
            JumpDensity::Gamma { shape, scale } => {
                if x < 0.0 || (x == 0.0 && shape > 1.0) {
                    0.0
                } else if x == 0.0 {
                    if shape == 1.0 { 1.0 / scale } else { f64::INFINITY }
                } else {
                    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
                }
            }
            JumpDensity::Uniform { a, b } => {
                if (a..=b).contains(&x) { 1.0 / (b - a) } else { 0.0 }
            }
            JumpDensity::Mixture { ref components } => {
                components.iter().map(|c| c.weight * c.density.pdf(x)).sum()
            }
        }
    }

    /// Characteristic function `∫ e^{iξx} μ(dx)`.
    pub fn cf(&self, xi: f64) -> Complex64 {
        match *self {
            JumpDensity::Gaussian { mean, sd } => {
                Complex64::from_polar((-0.5 * sd * sd * xi * xi).exp(), mean * xi)
            }
            JumpDensity::Laplace { scale } => Complex64::new(1.0 / (1.0 + scale * scale * xi * xi), 0.0),
            JumpDensity::Gamma { shape, scale } => {
                (-shape * Complex64::new(1.0, -scale * xi).ln()).exp()
            }
            JumpDensity::Uniform { a, b } => {
                let half = 0.5 * (b - a) * xi;
                let centre = Complex64::from_polar(1.0, 0.5 * (a + b) * xi);
                let sinc = if half.abs() < 1e-4 {
                    1.0 - half * half / 6.0 + half.powi(4) / 120.0
                } else {
                    half.sin() / half
                };
                centre * sinc
            }
            JumpDensity::Mixture { ref components } => {
                components.iter().map(|c| c.weight * c.density.cf(xi)).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDensity::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            JumpDensity::Laplace { scale } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() { scale * e } else { -scale * e }
            }
            JumpDensity::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("validated gamma").sample(rng)
            }
            JumpDensity::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            JumpDensity::Mixture { ref components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return c.density.sample(rng);
                    }
                }
                components.last().expect("nonempty mixture").density.sample(rng)
            }
        }
    }

    /// Interval carrying all but a negligible (< 1e-12) fraction of the mass.
    pub fn window(&self) -> (f64, f64) {
        match *self {
            JumpDensity::Gaussian { mean, sd } => (mean - 8.0 * sd, mean + 8.0 * sd),
            JumpDensity::Laplace { scale } => (-30.0 * scale, 30.0 * scale),
            JumpDensity::Gamma { shape, scale } => {
                (0.0, scale * (shape + 30.0 + 10.0 * shape.sqrt()))
            }
            JumpDensity::Uniform { a, b } => (a, b),
            JumpDensity::Mixture { ref components } => components.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), c| {
                    let (l, h) = c.density.window();
                    (lo.min(l), hi.max(h))
                },
            ),
        }
    }

    /// Points where the density is not smooth; quadrature panels should break there.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            JumpDensity::Gaussian { .. } => vec![],
            JumpDensity::Laplace { .. } => vec![0.0],
            JumpDensity::Gamma { .. } => vec![0.0],
            JumpDensity::Uniform { a, b } => vec![a, b],
            JumpDensity::Mixture { ref components } => {
                components.iter().flat_map(|c| c.density.kinks()).collect()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpDensity::Gaussian { mean, .. } => mean,
            JumpDensity::Laplace { .. } => 0.0,
            JumpDensity::Gamma { shape, scale } => shape * scale,
            JumpDensity::Uniform { a, b } => 0.5 * (a + b),
            JumpDensity::Mixture { ref components } => {
                components.iter().map(|c| c.weight * c.density.mean()).sum()
            }
        }
    }
}

/// Compound Poisson process with intensity `lambda`, jump law `jump`,
/// observed every `delta` time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundPoissonModel {
    pub lambda: f64,
    pub jump: JumpDensity,
    pub delta: f64,
}

impl CompoundPoissonModel {
    pub fn new(lambda: f64, jump: JumpDensity, delta: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0 (got {lambda})")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0 (got {delta})")));
        }
        jump.validate()?;
        Ok(CompoundPoissonModel { lambda, jump, delta })
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        CompoundPoissonModel::new(self.lambda, self.jump.clone(), delta)
    }

    /// Observation horizon `T = nΔ`.
    pub fn horizon(&self, n: usize) -> f64 {
        n as f64 * self.delta
    }

    /// Expected number of jumps `T_λ = λnΔ`.
    pub fn effective_horizon(&self, n: usize) -> f64 {
        self.lambda * self.horizon(n)
    }

    /// Characteristic function of one increment, `exp(Δλ(cf_μ(ξ) − 1))`.
    pub fn true_cf(&self, xi: f64) -> Complex64 {
        (self.delta * self.lambda * (self.jump.cf(xi) - 1.0)).exp()
    }

    /// `ν(x) = λ · pdf_μ(x)`.
    pub fn true_levy_density(&self, x: f64) -> f64 {
        self.lambda * self.jump.pdf(x)
    }

    /// Fourier transform of the Lévy density, `λ · cf_μ(ξ)`.
    pub fn levy_transform(&self, xi: f64) -> Complex64 {
        self.lambda * self.jump.cf(xi)
    }
}

/// Equispaced increments `Z_1, …, Z_n` together with their zero count.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    pub values: Vec<f64>,
    pub delta: f64,
    pub n_zero: usize,
}

impl IncrementSample {
    pub fn new(values: Vec<f64>, delta: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("sample is empty".into()));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0 (got {delta})")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite increment {v}")));
        }
        // Exact comparison: increments without jumps are built as literal zeros.
        let n_zero = values.iter().filter(|&&v| v == 0.0).count();
        Ok(IncrementSample { values, delta, n_zero })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn horizon(&self) -> f64 {
        self.n() as f64 * self.delta
    }
}

/// Simulates `n` increments, each a sum of `Poisson(λΔ)` jumps.
pub fn sample_increments(model: &CompoundPoissonModel, n: usize, seed: u64) -> IncrementSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = Poisson::new(model.lambda * model.delta).expect("validated model");
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let jumps = counts.sample(&mut rng) as u64;
            let mut z = 0.0;
            for _ in 0..jumps {
                z += model.jump.sample(&mut rng);
            }
            z
        })
        .collect();
    let n_zero = values.iter().filter(|&&v| v == 0.0).count();
    IncrementSample { values, delta: model.delta, n_zero }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    fn families() -> Vec<JumpDensity> {
        vec![
            JumpDensity::gaussian(0.0, 1.0),
            JumpDensity::gaussian(1.0, 0.25),
            JumpDensity::laplace(1.0),
            JumpDensity::gamma(2.0, 0.5),
            JumpDensity::uniform(-1.0, 2.0),
            JumpDensity::mixture(vec![
                (0.7, JumpDensity::gaussian(0.0, 1.0)),
                (0.3, JumpDensity::gaussian(2.0, 0.05)),
            ]),
        ]
    }

    fn quad_over<F: Fn(f64) -> f64>(jump: &JumpDensity, f: F) -> f64 {
        let (lo, hi) = jump.window();
        let mut cuts: Vec<f64> = vec![lo, hi];
        cuts.extend(jump.kinks().into_iter().filter(|k| *k > lo && *k < hi));
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.windows(2).map(|w| integrate(&f, w[0], w[1], 400, 12)).sum()
    }

    #[test]
    fn pdfs_integrate_to_one() {
        for jump in families() {
            let mass = quad_over(&jump, |x| jump.pdf(x));
            assert!((mass - 1.0).abs() < 1e-6, "{jump:?}: mass {mass}");
        }
    }

    #[test]
    fn closed_form_cf_matches_quadrature() {
        for jump in families() {
            for k in -20..=20 {
                let xi = k as f64;
                let re = quad_over(&jump, |x| (xi * x).cos() * jump.pdf(x));
                let im = quad_over(&jump, |x| (xi * x).sin() * jump.pdf(x));
                let cf = jump.cf(xi);
                assert!(
                    (cf.re - re).abs() < 1e-6 && (cf.im - im).abs() < 1e-6,
                    "{jump:?} at xi={xi}: {cf} vs {re}+{im}i"
                );
            }
        }
    }

    #[test]
    fn cf_at_origin_and_bounded() {
        for jump in families() {
            assert!((jump.cf(0.0) - 1.0).norm() < 1e-15);
            for k in 0..200 {
                assert!(jump.cf(k as f64 * 0.37 - 30.0).norm() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn true_cf_examples() {
        let m = CompoundPoissonModel::new(1.0, JumpDensity::gaussian(0.0, 1.0), 1.0).unwrap();
        assert_eq!(m.true_cf(0.0), Complex64::new(1.0, 0.0));
        let expect = ((-50.0_f64).exp() - 1.0).exp();
        assert!((m.true_cf(10.0).re - expect).abs() < 1e-15);
        assert!((m.true_cf(10.0).re - 0.3679).abs() < 1e-4);
        let m = CompoundPoissonModel::new(1.7, JumpDensity::uniform(-1.0, 2.0), 0.8).unwrap();
        let floor = (-2.0 * 1.7 * 0.8_f64).exp();
        for k in -400..=400 {
            assert!(m.true_cf(k as f64 * 0.05).norm() >= floor);
        }
    }

    #[test]
    fn levy_density_examples() {
        let m = CompoundPoissonModel::new(2.0, JumpDensity::laplace(1.0), 1.0).unwrap();
        assert_eq!(m.true_levy_density(0.0), 1.0);
        let m = CompoundPoissonModel::new(1.0, JumpDensity::gaussian(0.0, 1.0), 1.0).unwrap();
        assert!((m.true_levy_density(1.0) - 0.24197).abs() < 1e-5);
        let m = CompoundPoissonModel::new(3.5, JumpDensity::gamma(2.0, 0.5), 1.0).unwrap();
        let total = quad_over(&m.jump, |x| m.true_levy_density(x));
        assert!((total - 3.5).abs() < 1e-6 * 3.5);
    }

    #[test]
    fn model_rejects_bad_parameters() {
        assert!(CompoundPoissonModel::new(0.0, JumpDensity::laplace(1.0), 1.0).is_err());
        assert!(CompoundPoissonModel::new(1.0, JumpDensity::laplace(1.0), -1.0).is_err());
        assert!(CompoundPoissonModel::new(1.0, JumpDensity::gaussian(0.0, 0.0), 1.0).is_err());
        let bad_mix = JumpDensity::mixture(vec![(0.5, JumpDensity::laplace(1.0))]);
        assert!(CompoundPoissonModel::new(1.0, bad_mix, 1.0).is_err());
    }

    #[test]
    fn small_sample_has_literal_zeros() {
        let m = CompoundPoissonModel::new(1.0, JumpDensity::gaussian(0.0, 1.0), 0.5).unwrap();
        let s = sample_increments(&m, 4, 7);
        assert_eq!(s.n(), 4);
        assert_eq!(s.n_zero, s.values.iter().filter(|v| **v == 0.0).count());
        assert_eq!(s, sample_increments(&m, 4, 7));
    }

    #[test]
    fn zero_fraction_matches_poisson_atom() {
        let m = CompoundPoissonModel::new(1.0, JumpDensity::laplace(1.0), 0.5).unwrap();
        let s = sample_increments(&m, 100_000, 11);
        let frac = s.n_zero as f64 / s.n() as f64;
        assert!((frac - (-0.5_f64).exp()).abs() < 0.01, "zero fraction {frac}");
    }

    #[test]
    fn zero_count_within_three_binomial_sd_over_seeds() {
        let m = CompoundPoissonModel::new(2.0, JumpDensity::uniform(0.0, 1.0), 0.3).unwrap();
        let n = 5_000;
        let p = (-0.6_f64).exp();
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        let mut outside = 0;
        for seed in 0..40 {
            let s = sample_increments(&m, n, seed);
            if (s.n_zero as f64 - n as f64 * p).abs() > 3.0 * sd {
                outside += 1;
            }
        }
        // 3-sigma band: expect ~0.1 exceedances out of 40.
        assert!(outside <= 2, "{outside} seeds outside the 3-sd band");
    }

    #[test]
    fn increment_mean_follows_wald_identity() {
        let m = CompoundPoissonModel::new(2.0, JumpDensity::gaussian(1.0, 0.25), 0.25).unwrap();
        let s = sample_increments(&m, 100_000, 3);
        let mean = s.values.iter().sum::<f64>() / s.n() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn simulated_cf_matches_true_cf() {
        let m = CompoundPoissonModel::new(1.0, JumpDensity::gamma(2.0, 0.5), 0.7).unwrap();
        let n = 100_000;
        let s = sample_increments(&m, n, 5);
        let tol = 4.0 / (n as f64).sqrt();
        for k in -100..=100 {
            let xi = k as f64 * 0.1;
            let emp: Complex64 = s.values.iter().map(|z| Complex64::from_polar(1.0, xi * z)).sum::<Complex64>()
                / n as f64;
            assert!((emp - m.true_cf(xi)).norm() < tol, "xi={xi}");
        }
    }

    #[test]
    fn mixture_serde_roundtrip_through_toml() {
        let jump = JumpDensity::mixture(vec![
            (0.6, JumpDensity::gaussian(0.0, 1.0)),
            (0.4, JumpDensity::laplace(0.5)),
        ]);
        let text = toml::to_string(&CompoundPoissonModel::new(1.0, jump, 0.5).unwrap()).unwrap();
        let back: CompoundPoissonModel = toml::from_str(&text).unwrap();
        back.jump.validate().unwrap();
        assert_eq!(back.jump.cf(0.3), back.jump.cf(0.3));
    }
}
