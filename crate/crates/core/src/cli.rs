//! Command-line front end. One TOML file drives every subcommand; the
//! `--seed`, `--out` and `--threads` flags override it.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{choose_j_oracle, estimate_fixed_j, EstimatorConfig};
use crate::io::{fmt_f64, read_sample_csv, write_estimate_csv, write_json, write_sample_csv};
use crate::lepskii::{select_j, LepskiiConfig};
use crate::model::{sample_increments, CompoundPoissonModel, IncrementSample, JumpDensity};
use crate::numerics::Norm;
use crate::operators::OperatorSpec;
use crate::risk::{
    ecf_fluctuation_stats, mc_risk, observations_for, rate_fit, regime_sweep, BandwidthRule, FluctuationStats,
    InputMode, RiskReport,
};

#[derive(Debug, Parser)]
#[command(name = "decompound", version, about = "Spectral Lévy-density estimation for compound Poisson processes")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate increments.
    Simulate,
    /// Estimate the Lévy density at the configured level.
    Estimate {
        /// Increments CSV (`index,value`); simulated from the model when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Estimate with the level chosen by Lepskii's method.
    Adapt {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte Carlo risk over the `T_λ` and `Δ` sweeps.
    Bench,
    /// Sup-fluctuation statistics of the empirical characteristic function.
    EcfDiagnose,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Adapt { .. } => "adapt",
            Command::Bench => "bench",
            Command::EcfDiagnose => "ecf-diagnose",
        }
    }
}

/// Level rule as written in the file: an integer, `"oracle"` or `"adaptive"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Fixed(u32),
    Named(LevelKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKeyword {
    Oracle,
    Adaptive,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub jump: Option<JumpDensity>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub p: Option<Norm>,
    pub j: Option<LevelSpec>,
    /// Smoothness used by the oracle level.
    pub smoothness: Option<f64>,
    pub u_exponent: Option<f64>,
    pub theta_h: Option<f64>,
    pub theta_h_prime: Option<f64>,
    pub oversampling: Option<usize>,
    pub x_points: Option<usize>,
    pub x_half_width: Option<f64>,
    pub clip_negative: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n: Option<usize>,
    /// Horizon; sets `n = t / delta` when `n` is absent.
    pub t: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub deltas: Vec<f64>,
    pub t_lambdas: Vec<f64>,
    pub xi_primes: Vec<f64>,
    pub delta_exp: f64,
    pub mode: InputMode,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            n: None,
            t: None,
            reps: 50,
            seed: 0,
            deltas: Vec::new(),
            t_lambdas: Vec::new(),
            xi_primes: vec![10.0, 100.0, 1000.0],
            delta_exp: 0.5,
            mode: InputMode::Empirical,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// The configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub operator: Option<OperatorSpec>,
    pub estimator: EstimatorSection,
    pub lepskii: LepskiiConfig,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses TOML; errors carry the line of the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    Error::Config(format!("line {line}: {msg}"))
                }
                None => Error::Config(msg),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn lambda(&self) -> Result<f64> {
        self.model.lambda.ok_or_else(|| missing("model.lambda"))
    }

    pub fn delta(&self) -> Result<f64> {
        self.model.delta.ok_or_else(|| missing("model.delta"))
    }

    pub fn model(&self) -> Result<CompoundPoissonModel> {
        let lambda = self.lambda()?;
        let delta = self.delta()?;
        let jump = self.model.jump.clone().ok_or_else(|| missing("model.jump"))?;
        CompoundPoissonModel::new(lambda, jump, delta).map_err(|e| Error::Config(format!("model: {e}")))
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        let d = EstimatorConfig::default();
        let e = &self.estimator;
        let cfg = EstimatorConfig {
            p: e.p.unwrap_or(d.p),
            operator: self.operator.unwrap_or(d.operator),
            u_exponent: e.u_exponent.unwrap_or(d.u_exponent),
            theta_h: e.theta_h,
            theta_h_prime: e.theta_h_prime,
            oversampling: e.oversampling.unwrap_or(d.oversampling),
            x_points: e.x_points.unwrap_or(d.x_points),
            x_half_width: e.x_half_width.unwrap_or(d.x_half_width),
            clip_negative: e.clip_negative.unwrap_or(d.clip_negative),
        };
        cfg.validate().map_err(|e| Error::Config(format!("estimator: {e}")))?;
        Ok(cfg)
    }

    pub fn lepskii_config(&self, config: &EstimatorConfig) -> Result<LepskiiConfig> {
        self.lepskii.validate(config).map_err(|e| Error::Config(format!("lepskii: {e}")))?;
        Ok(self.lepskii.clone())
    }

    /// Observation count from `experiment.n` or `experiment.t / model.delta`.
    pub fn n(&self) -> Result<usize> {
        match (self.experiment.n, self.experiment.t) {
            (Some(0), _) => Err(Error::Config("experiment.n must be >= 1".into())),
            (Some(n), _) => Ok(n),
            (None, Some(t)) => observations_for(t, self.delta()?).map_err(|e| Error::Config(format!("experiment.t: {e}"))),
            (None, None) => Err(missing("experiment.n")),
        }
    }

    fn level(&self) -> LevelSpec {
        self.estimator.j.unwrap_or(LevelSpec::Named(LevelKeyword::Oracle))
    }

    fn smoothness(&self) -> Result<f64> {
        let s = self.estimator.smoothness.unwrap_or(1.0);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Config(format!("estimator.smoothness must be > 0 (got {s})")));
        }
        Ok(s)
    }

    fn bandwidth_rule(&self, config: &EstimatorConfig) -> Result<BandwidthRule> {
        Ok(match self.level() {
            LevelSpec::Fixed(j) => BandwidthRule::Fixed { j },
            LevelSpec::Named(LevelKeyword::Oracle) => BandwidthRule::Oracle { smoothness: self.smoothness()? },
            LevelSpec::Named(LevelKeyword::Adaptive) => BandwidthRule::Adaptive { lepskii: self.lepskii_config(config)? },
        })
    }

    fn reps(&self) -> Result<usize> {
        if self.experiment.reps == 0 {
            return Err(Error::Config("experiment.reps must be >= 1".into()));
        }
        Ok(self.experiment.reps)
    }
}

fn missing(field: &str) -> Error {
    Error::Config(format!("{field}: required field missing"))
}

/// Fully resolved settings, recorded in every manifest.
#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    model: Option<CompoundPoissonModel>,
    estimator: Option<EstimatorConfig>,
    level: Option<LevelSpec>,
    smoothness: Option<f64>,
    lepskii: Option<LepskiiConfig>,
    experiment: &'a ExperimentSection,
    input: Option<String>,
    outputs: Vec<String>,
}

/// Runs one subcommand and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        // A global pool can only be set once per process; later calls keep the first.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match &cli.command {
        Command::Simulate => run_simulate(&cfg),
        Command::Estimate { input } => run_estimate(&cfg, input.as_deref(), cli.command.name(), false),
        Command::Adapt { input } => run_estimate(&cfg, input.as_deref(), cli.command.name(), true),
        Command::Bench => run_bench(&cfg),
        Command::EcfDiagnose => run_ecf_diagnose(&cfg),
    }
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_manifest(dir: &Path, mut manifest: Manifest<'_>, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join("manifest.json");
    manifest.outputs = written
        .iter()
        .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(())
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = cfg.model()?;
    let n = cfg.n()?;
    let dir = prepare_dir(cfg)?;
    let sample = sample_increments(&model, n, cfg.experiment.seed);
    let path = dir.join("increments.csv");
    write_sample_csv(&path, &sample)?;
    let mut written = vec![path];
    let manifest = Manifest {
        command: "simulate",
        seed: cfg.experiment.seed,
        model: Some(model),
        estimator: None,
        level: None,
        smoothness: None,
        lepskii: None,
        experiment: &cfg.experiment,
        input: None,
        outputs: Vec::new(),
    };
    write_manifest(&dir, manifest, &mut written)?;
    Ok(written)
}

/// `estimate` and `adapt`. A sample without zero increments yields the zero
/// estimate flagged invalid, not an error.
pub fn run_estimate(cfg: &RunConfig, input: Option<&Path>, command: &str, adaptive: bool) -> Result<Vec<PathBuf>> {
    let config = cfg.estimator_config()?;
    let level = if adaptive { LevelSpec::Named(LevelKeyword::Adaptive) } else { cfg.level() };
    let sample: IncrementSample = match input {
        Some(path) => read_sample_csv(path, cfg.delta()?)?,
        None => sample_increments(&cfg.model()?, cfg.n()?, cfg.experiment.seed),
    };
    let lepskii = match level {
        LevelSpec::Named(LevelKeyword::Adaptive) => Some(cfg.lepskii_config(&config)?),
        _ => None,
    };
    let smoothness = match level {
        LevelSpec::Named(LevelKeyword::Oracle) => Some(cfg.smoothness()?),
        _ => None,
    };
    let dir = prepare_dir(cfg)?;
    let mut written = Vec::new();
    let estimate = match (level, &lepskii) {
        (LevelSpec::Fixed(j), _) => estimate_fixed_j(&sample, &config, j)?,
        (LevelSpec::Named(LevelKeyword::Oracle), _) => {
            // Oracle rate in T_λ = λT, with λ from the model section.
            let t_lambda = cfg.lambda()? * sample.horizon();
            let j = choose_j_oracle(t_lambda, smoothness.expect("oracle level"), config.p);
            estimate_fixed_j(&sample, &config, j)?
        }
        (LevelSpec::Named(LevelKeyword::Adaptive), Some(lcfg)) => {
            let trace = select_j(&sample, &config, lcfg)?;
            let path = dir.join("selection.json");
            write_json(&path, &trace.summary())?;
            written.push(path);
            trace.selected().clone()
        }
        (LevelSpec::Named(LevelKeyword::Adaptive), None) => unreachable!("lepskii config resolved above"),
    };
    let csv_path = dir.join("estimate.csv");
    write_estimate_csv(&csv_path, &estimate.xs(), &estimate.values)?;
    let json_path = dir.join("estimate.json");
    write_json(&json_path, &estimate.summary())?;
    written.insert(0, json_path);
    written.insert(0, csv_path);
    let manifest = Manifest {
        command,
        seed: cfg.experiment.seed,
        model: cfg.model().ok(),
        estimator: Some(config),
        level: Some(level),
        smoothness,
        lepskii,
        experiment: &cfg.experiment,
        input: input.map(|p| p.display().to_string()),
        outputs: Vec::new(),
    };
    write_manifest(&dir, manifest, &mut written)?;
    Ok(written)
}

fn write_risk_rows(path: &Path, key: &str, reports: &[RiskReport], keyof: impl Fn(&RiskReport) -> f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([key, "rep", "seed", "n", "level", "valid", "error"])?;
    for r in reports {
        for (i, e) in r.errors.iter().enumerate() {
            w.write_record([
                fmt_f64(keyof(r)),
                i.to_string(),
                r.seed.wrapping_add(i as u64).to_string(),
                r.n.to_string(),
                r.levels[i].to_string(),
                r.valid[i].to_string(),
                fmt_f64(*e),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run_bench(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = cfg.model()?;
    let config = cfg.estimator_config()?;
    let rule = cfg.bandwidth_rule(&config)?;
    let reps = cfg.reps()?;
    let exp = &cfg.experiment;
    if exp.t_lambdas.is_empty() && exp.deltas.is_empty() {
        return Err(Error::Config("experiment.t_lambdas or experiment.deltas must be nonempty".into()));
    }
    if !exp.t_lambdas.is_empty() && exp.t_lambdas.len() < 3 {
        return Err(Error::Config("experiment.t_lambdas: a rate fit needs at least 3 values".into()));
    }
    let mut rate_n = Vec::new();
    for &tl in &exp.t_lambdas {
        let n = (tl / (model.lambda * model.delta)).round();
        if n.is_nan() || n < 1.0 {
            return Err(Error::Config(format!("experiment.t_lambdas: {tl} gives no observations")));
        }
        rate_n.push(n as usize);
    }
    let t_fixed = match exp.t {
        Some(t) => t,
        None => exp.n.map(|n| n as f64 * model.delta).unwrap_or(0.0),
    };
    if !exp.deltas.is_empty() {
        if t_fixed <= 0.0 {
            return Err(missing("experiment.t"));
        }
        for &d in &exp.deltas {
            observations_for(t_fixed, d).map_err(|e| Error::Config(format!("experiment.deltas: {e}")))?;
        }
    }

    let dir = prepare_dir(cfg)?;
    let mut written = Vec::new();
    if !rate_n.is_empty() {
        let reports: Vec<RiskReport> = rate_n
            .iter()
            .map(|&n| mc_risk(&model, &config, &rule, exp.mode, n, reps, exp.seed))
            .collect::<Result<_>>()?;
        let rows = dir.join("risk_rate.csv");
        write_risk_rows(&rows, "t_lambda", &reports, |r| r.t_lambda)?;
        let summary = dir.join("risk_rate_summary.json");
        write_json(&summary, &reports)?;
        let fit = dir.join("rate_fit.json");
        write_json(&fit, &rate_fit(&reports)?)?;
        written.extend([rows, summary, fit]);
    }
    if !exp.deltas.is_empty() {
        let reports = regime_sweep(&model.jump, model.lambda, t_fixed, &exp.deltas, &config, &rule, reps, exp.seed)?;
        let rows = dir.join("risk_regime.csv");
        write_risk_rows(&rows, "delta", &reports, |r| r.model.delta)?;
        let summary = dir.join("risk_regime_summary.json");
        write_json(&summary, &reports)?;
        written.extend([rows, summary]);
    }
    let manifest = Manifest {
        command: "bench",
        seed: exp.seed,
        model: Some(model),
        estimator: Some(config),
        level: Some(cfg.level()),
        smoothness: cfg.smoothness().ok(),
        lepskii: Some(cfg.lepskii.clone()),
        experiment: exp,
        input: None,
        outputs: Vec::new(),
    };
    write_manifest(&dir, manifest, &mut written)?;
    Ok(written)
}

pub fn run_ecf_diagnose(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = cfg.model()?;
    let n = cfg.n()?;
    let reps = cfg.reps()?;
    let exp = &cfg.experiment;
    if !(exp.delta_exp.is_finite() && exp.delta_exp > 0.0) {
        return Err(Error::Config(format!("experiment.delta_exp must be > 0 (got {})", exp.delta_exp)));
    }
    if exp.xi_primes.is_empty() || exp.xi_primes.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Config("experiment.xi_primes must be a nonempty list of positive values".into()));
    }
    let dir = prepare_dir(cfg)?;
    let stats: Vec<FluctuationStats> = exp
        .xi_primes
        .iter()
        .map(|&xp| ecf_fluctuation_stats(&model, n, xp, exp.delta_exp, reps, exp.seed))
        .collect::<Result<_>>()?;
    let csv_path = dir.join("ecf_fluctuation.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "xi_prime",
        "delta_exp",
        "n",
        "delta",
        "t_lambda",
        "reps",
        "normalizer",
        "mean_sup",
        "mean_normalized",
        "median_normalized",
        "q90_normalized",
        "mean_root_n",
        "exceedance_rate",
    ])?;
    for s in &stats {
        w.write_record([
            fmt_f64(s.xi_prime),
            fmt_f64(s.delta_exp),
            s.n.to_string(),
            fmt_f64(s.delta),
            fmt_f64(s.t_lambda),
            s.reps.to_string(),
            fmt_f64(s.normalizer),
            fmt_f64(s.mean_sup),
            fmt_f64(s.mean_normalized),
            fmt_f64(s.median_normalized),
            fmt_f64(s.q90_normalized),
            fmt_f64(s.mean_root_n),
            fmt_f64(s.exceedance_rate),
        ])?;
    }
    w.flush()?;
    let mut written = vec![csv_path];
    let manifest = Manifest {
        command: "ecf-diagnose",
        seed: exp.seed,
        model: Some(model),
        estimator: None,
        level: None,
        smoothness: None,
        lepskii: None,
        experiment: exp,
        input: None,
        outputs: Vec::new(),
    };
    write_manifest(&dir, manifest, &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
lambda = 1.0
delta = 0.5
[model.jump]
family = "gaussian"
mean = 0.0
sd = 1.0

[experiment]
n = 10
seed = 4
"#;

    fn cli(command: Command, dir: &Path) -> Cli {
        Cli { config: None, seed: None, out: Some(dir.to_path_buf()), threads: None, command }
    }

    #[test]
    fn parses_full_config() {
        let text = r#"
[model]
lambda = 2.0
delta = 0.25
[model.jump]
family = "mixture"
components = [
  { weight = 0.5, family = "gaussian", mean = 0.0, sd = 1.0 },
  { weight = 0.5, family = "laplace", scale = 0.3 },
]
[operator]
kind = "meyer"
b = 1.0
c = 0.05
[estimator]
p = "inf"
j = "adaptive"
x_half_width = 8
[lepskii]
tau = 1.5
[experiment]
t = 100.0
deltas = [0.1, 0.5]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.n().unwrap(), 400);
        let est = cfg.estimator_config().unwrap();
        assert_eq!(est.p, Norm::Infinity);
        assert_eq!(cfg.level(), LevelSpec::Named(LevelKeyword::Adaptive));
        assert_eq!(cfg.lepskii.tau, crate::lepskii::Tau::Fixed(1.5));
        assert!(cfg.model().is_ok());
    }

    #[test]
    fn config_errors_name_the_field() {
        let text = BASE.replace("lambda = 1.0\n", "");
        let cfg = RunConfig::parse(&text).unwrap();
        let err = cfg.model().unwrap_err().to_string();
        assert!(err.contains("model.lambda"), "{err}");
        let err = RunConfig::parse("[model]\nlambda = 1.0\nlamda = 2.0\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("lamda"), "{err}");
        assert!(!err.contains('\n'));
        let err = RunConfig::parse("[estimator]\np = 0.5\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn simulate_writes_rows_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::parse(BASE).unwrap();
        let files = run_simulate(&RunConfig { output: OutputSection { dir: dir.path().join("a") }, ..cfg.clone() }).unwrap();
        run_simulate(&RunConfig { output: OutputSection { dir: dir.path().join("b") }, ..cfg }).unwrap();
        assert_eq!(files.len(), 2);
        let a = fs::read_to_string(dir.path().join("a/increments.csv")).unwrap();
        let b = fs::read_to_string(dir.path().join("b/increments.csv")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 11);
        let manifest = fs::read_to_string(dir.path().join("a/manifest.json")).unwrap();
        assert!(manifest.contains("\"seed\": 4"));
    }

    #[test]
    fn estimate_reports_fixed_level() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{BASE}\n[estimator]\nj = 4\n").replace("n = 10", "n = 400");
        let cfg = RunConfig::parse(&text).unwrap();
        run_estimate(&RunConfig { output: OutputSection { dir: dir.path().to_path_buf() }, ..cfg }, None, "estimate", false)
            .unwrap();
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
        assert_eq!(side["j"], 4);
        assert_eq!(side["valid"], true);
    }

    #[test]
    fn adapt_writes_selection_and_invalid_input_is_not_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        fs::write(&input, "index,value\n0,0.5\n1,-1.0\n2,2.0\n").unwrap();
        let cfg = RunConfig::parse(BASE).unwrap();
        let mut c = cli(Command::Adapt { input: Some(input) }, dir.path());
        c.config = None;
        let out = RunConfig { output: OutputSection { dir: dir.path().to_path_buf() }, ..cfg };
        run_estimate(&out, c_input(&c).as_deref(), "adapt", true).unwrap();
        assert!(dir.path().join("selection.json").exists());
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
        assert_eq!(side["valid"], false);
        let est = fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
        assert!(est.lines().skip(1).all(|l| l.ends_with(",0.0")));
    }

    fn c_input(c: &Cli) -> Option<PathBuf> {
        match &c.command {
            Command::Adapt { input } | Command::Estimate { input } => input.clone(),
            _ => None,
        }
    }

    #[test]
    fn bench_rejects_degenerate_settings() {
        let cfg = RunConfig::parse(BASE).unwrap();
        assert!(matches!(run_bench(&cfg), Err(Error::Config(_))));
        let text = format!("{BASE}t_lambdas = [100.0, 200.0]\n");
        assert!(matches!(run_bench(&RunConfig::parse(&text).unwrap()), Err(Error::Config(_))));
        let text = format!("{BASE}delta_exp = 0.0\n");
        assert!(matches!(run_ecf_diagnose(&RunConfig::parse(&text).unwrap()), Err(Error::Config(_))));
    }

    #[test]
    fn bench_and_diagnose_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{BASE}reps = 1\nt_lambdas = [50.0, 100.0, 200.0]\nxi_primes = [5.0, 10.0, 20.0]\n[estimator]\nj = 2\n");
        let cfg = RunConfig { output: OutputSection { dir: dir.path().to_path_buf() }, ..RunConfig::parse(&text).unwrap() };
        run_bench(&cfg).unwrap();
        let fit: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("rate_fit.json")).unwrap()).unwrap();
        assert_eq!(fit["points"].as_array().unwrap().len(), 3);
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("risk_rate_summary.json")).unwrap()).unwrap();
        assert!(summary[0]["standard_error"].is_null());
        run_ecf_diagnose(&cfg).unwrap();
        let rows = fs::read_to_string(dir.path().join("ecf_fluctuation.csv")).unwrap();
        assert_eq!(rows.lines().count(), 4);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, BASE).unwrap();
        let mut c = cli(Command::Simulate, &dir.path().join("o"));
        c.config = Some(path);
        c.seed = Some(99);
        run(&c).unwrap();
        let manifest = fs::read_to_string(dir.path().join("o/manifest.json")).unwrap();
        assert!(manifest.contains("\"seed\": 99"));
    }
}
