//! Experiment configuration, read from TOML or from a previous run's manifest.
//!
//! Every section field is optional in the file. [`ExperimentConfig::resolve`]
//! fills the defaults of the chosen kind and rejects sections the kind does not
//! read, so the resolved config written to the manifest is complete.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qrm_core::numkit::AlphaLevel;
use qrm_core::riskdist::{BandwidthRule, EstimatorKind};
use qrm_core::semlab::{ColorShapeSpec, EnvironmentFamily};
use qrm_core::trainer::{Objective, RiskMode, TrainConfig};

pub const BUILD_ID: &str = concat!("qrmlab-v", env!("CARGO_PKG_VERSION"));

/// Bad input from the user: config, fixture or CSV schema. Exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(InputError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fig2aFrontier,
    Fig2bCurves,
    Fig2cCoefficients,
    Fig2dQq,
    Coverage,
    CmnistToy,
    CausalVerify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2aFrontier => "fig2a-frontier",
            Self::Fig2bCurves => "fig2b-curves",
            Self::Fig2cCoefficients => "fig2c-coefficients",
            Self::Fig2dQq => "fig2d-qq",
            Self::Coverage => "coverage",
            Self::CmnistToy => "cmnist-toy",
            Self::CausalVerify => "causal-verify",
        }
    }

    fn trains_sem(self) -> bool {
        matches!(self, Self::Fig2aFrontier | Self::Fig2bCurves | Self::Fig2cCoefficients | Self::Coverage)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    /// Training domains.
    pub domains: Option<usize>,
    /// Fresh domains for evaluation.
    pub test_domains: Option<usize>,
    pub sigma1: Option<f64>,
    pub sigma_y: Option<f64>,
    pub sigma2_mu: Option<f64>,
    pub sigma2_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Gaussian,
    Kde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthName {
    GaussianOptimal,
    Silverman,
    MedianHeuristic,
}

/// A named rule, or a number for a fixed bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Rule(BandwidthName),
    Fixed(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub estimator: Option<Estimator>,
    pub bandwidth: Option<Bandwidth>,
    /// Quantile levels given as probabilities.
    pub alphas: Option<Vec<f64>>,
    /// Quantile levels given as `ln(1 - alpha)`, trained after `alphas`.
    pub log_tails: Option<Vec<f64>>,
    pub h_stop_gradient: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskKind {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub steps: Option<usize>,
    pub pretrain_steps: Option<usize>,
    pub post_pretrain_lr: Option<f64>,
    pub cosine_anneal: Option<bool>,
    pub risk: Option<RiskKind>,
    /// Samples per training domain when `risk = "sampled"`.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesSection {
    pub points: Option<usize>,
    /// Grid bounds; taken from the pooled risks when absent.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QqSection {
    pub m_values: Option<Vec<usize>>,
    pub m_reference: Option<usize>,
    pub seeds: Option<usize>,
    /// Fixed predictor whose risks are sampled.
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSection {
    pub seeds: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorShapeSection {
    pub train_colors: Option<Vec<f64>>,
    pub test_color: Option<f64>,
    pub p_shape: Option<f64>,
    pub test_samples: Option<usize>,
    pub seeds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionEntry {
    pub target: String,
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainEntry {
    pub sigma1: f64,
    pub sigma_y: f64,
    pub sigma2: f64,
    pub intervention: Option<InterventionEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Built-in fixture name; ignored when `domains` is given.
    pub fixture: Option<String>,
    pub domains: Option<Vec<DomainEntry>>,
    pub tolerance: Option<f64>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    /// Relative paths are taken from the config file's directory. Not recorded in the manifest.
    pub out_dir: Option<String>,
    pub environment: Option<EnvironmentSection>,
    pub objective: Option<ObjectiveSection>,
    pub train: Option<TrainSection>,
    pub curves: Option<CurvesSection>,
    pub qq: Option<QqSection>,
    pub coverage: Option<CoverageSection>,
    pub color_shape: Option<ColorShapeSection>,
    pub verify: Option<VerifySection>,
}

fn or<T>(v: &mut Option<T>, default: T) {
    if v.is_none() {
        *v = Some(default);
    }
}

/// Takes a section the kind reads, or rejects one it does not.
fn section<T: Default>(s: &mut Option<T>, used: bool, name: &str, kind: ExperimentKind) -> Result<Option<T>> {
    match (s.take(), used) {
        (s, true) => Ok(Some(s.unwrap_or_default())),
        (None, false) => Ok(None),
        (Some(_), false) => input_error(format!("section [{name}] does not apply to kind {}", kind.name())),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| InputError(format!("invalid config: {e}")).into())
    }

    /// Reads a `manifest.csv` written by a previous run.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| InputError(format!("invalid manifest: {e}")))?;
        if headers != vec!["key", "value"] {
            return input_error("manifest header must be key,value");
        }
        let mut toml_text = String::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| InputError(format!("invalid manifest: {e}")))?;
            if &rec[0] == "build_id" {
                continue;
            }
            toml_text.push_str(&format!("{} = {}\n", &rec[0], &rec[1]));
        }
        Self::from_toml(&toml_text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "csv") {
            Self::from_manifest(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    /// Fills the defaults of `kind` and validates everything the run will use.
    pub fn resolve(mut self) -> Result<Self> {
        use ExperimentKind::*;
        let kind = self.kind;
        or(&mut self.seed, 0);
        if self.seed.is_some_and(|s| s > i64::MAX as u64) {
            return input_error("seed must fit in a signed 64-bit integer");
        }

        let uses_family = kind.trains_sem() || kind == Fig2dQq;
        self.environment = section(&mut self.environment, uses_family, "environment", kind)?;
        if let Some(env) = &mut self.environment {
            if kind == Fig2dQq {
                if env.domains.is_some() || env.test_domains.is_some() {
                    return input_error("fig2d-qq takes domain counts from [qq]");
                }
            } else {
                or(&mut env.domains, 1000);
                or(&mut env.test_domains, 2000);
            }
            let d = EnvironmentFamily::<f64>::default();
            or(&mut env.sigma1, d.sigma1);
            or(&mut env.sigma_y, d.sigma_y);
            or(&mut env.sigma2_mu, d.sigma2_mu);
            or(&mut env.sigma2_sigma, d.sigma2_sigma);
        }

        self.objective = section(&mut self.objective, kind != CausalVerify, "objective", kind)?;
        if let Some(obj) = &mut self.objective {
            let (alphas, tails): (&[f64], &[f64]) = match kind {
                Fig2aFrontier => (&[0.5, 0.75, 0.9, 0.99], &[]),
                Fig2bCurves => (&[0.5, 0.9, 0.99], &[-1000.0]),
                Fig2cCoefficients => (&[0.5, 0.75, 0.9, 0.99], &[-10.0, -100.0, -1000.0]),
                Fig2dQq => (&[0.9], &[]),
                Coverage => (&[0.5, 0.75, 0.9], &[]),
                CmnistToy => (&[], &[-1000.0]),
                CausalVerify => unreachable!("no objective section"),
            };
            // a level given in either form replaces both defaults
            if obj.alphas.is_none() && obj.log_tails.is_none() {
                obj.alphas = Some(alphas.to_vec());
                obj.log_tails = Some(tails.to_vec());
            }
            or(&mut obj.alphas, Vec::new());
            or(&mut obj.log_tails, Vec::new());
            or(&mut obj.estimator, Estimator::Kde);
            or(&mut obj.bandwidth, Bandwidth::Rule(BandwidthName::GaussianOptimal));
            or(&mut obj.h_stop_gradient, false);
        }

        self.train = section(&mut self.train, kind.trains_sem() || kind == CmnistToy, "train", kind)?;
        if let Some(t) = &mut self.train {
            if kind == CmnistToy {
                or(&mut t.learning_rate, 0.5);
                or(&mut t.pretrain_steps, 400);
                or(&mut t.steps, 600);
                or(&mut t.post_pretrain_lr, 0.05);
                or(&mut t.cosine_anneal, true);
                if t.risk == Some(RiskKind::Analytic) {
                    return input_error("cmnist-toy trains on sampled risks only");
                }
                or(&mut t.risk, RiskKind::Sampled);
                or(&mut t.samples, 20_000);
            } else {
                or(&mut t.learning_rate, 0.1);
                or(&mut t.pretrain_steps, 200);
                or(&mut t.steps, 3000);
                or(&mut t.post_pretrain_lr, 0.008);
                or(&mut t.cosine_anneal, false);
                or(&mut t.risk, RiskKind::Analytic);
                if t.risk == Some(RiskKind::Sampled) {
                    or(&mut t.samples, 10_000);
                } else if t.samples.is_some() {
                    return input_error("train.samples needs risk = \"sampled\"");
                }
            }
        }

        self.curves = section(&mut self.curves, kind == Fig2bCurves, "curves", kind)?;
        if let Some(c) = &mut self.curves {
            or(&mut c.points, 401);
        }
        self.qq = section(&mut self.qq, kind == Fig2dQq, "qq", kind)?;
        if let Some(q) = &mut self.qq {
            or(&mut q.m_values, vec![10, 50, 200, 1000]);
            or(&mut q.m_reference, 1000);
            or(&mut q.seeds, 20);
            or(&mut q.beta, vec![0.5, 0.5]);
        }
        self.coverage = section(&mut self.coverage, kind == Coverage, "coverage", kind)?;
        if let Some(c) = &mut self.coverage {
            or(&mut c.seeds, 5);
        }
        self.color_shape = section(&mut self.color_shape, kind == CmnistToy, "color_shape", kind)?;
        if let Some(c) = &mut self.color_shape {
            or(&mut c.train_colors, vec![0.9, 0.8]);
            or(&mut c.test_color, 0.1);
            or(&mut c.p_shape, 0.75);
            or(&mut c.test_samples, 50_000);
            or(&mut c.seeds, 10);
        }
        self.verify = section(&mut self.verify, kind == CausalVerify, "verify", kind)?;
        if let Some(v) = &mut self.verify {
            if v.domains.is_none() {
                or(&mut v.fixture, "two-noise".to_string());
            }
            or(&mut v.tolerance, 1e-8);
            or(&mut v.restarts, 64);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |e: qrm_core::QrmError| InputError(e.to_string());
        if self.environment.is_some() {
            let fam = self.family();
            fam.sample(2, 0).map_err(bad)?;
            let env = self.environment();
            if env.domains.is_some_and(|m| m < 2) || env.test_domains.is_some_and(|m| m < 2) {
                return input_error("environment needs at least 2 training and 2 test domains");
            }
            if self.kind == ExperimentKind::Fig2aFrontier && env.test_domains.is_some_and(|m| m < 500) {
                return input_error("fig2a-frontier needs at least 500 test domains");
            }
        }
        if self.objective.is_some() {
            let levels = self.levels()?;
            if levels.is_empty() {
                return input_error("objective needs at least one quantile level");
            }
            self.bandwidth_rule()?;
            match self.kind {
                ExperimentKind::Fig2dQq if levels.len() != 1 => {
                    return input_error("fig2d-qq takes exactly one quantile level")
                }
                ExperimentKind::Coverage if levels.iter().any(|l| matches!(l, AlphaLevel::LogTail(_))) => {
                    return input_error("coverage levels must be given as alphas");
                }
                _ => {}
            }
        }
        if self.train.is_some() {
            self.train_config().validate().map_err(bad)?;
            if self.train().samples == Some(0) {
                return input_error("train.samples must be positive");
            }
        }
        if let Some(c) = &self.curves {
            if c.points.is_some_and(|p| p < 2) {
                return input_error("curves.points must be at least 2");
            }
            if let (Some(lo), Some(hi)) = (c.t_min, c.t_max) {
                if !(lo < hi) {
                    return input_error("curves.t_min must be below curves.t_max");
                }
            }
        }
        if let Some(q) = &self.qq {
            let mref = q.m_reference.unwrap_or_default();
            let ms = q.m_values.as_deref().unwrap_or_default();
            if ms.is_empty() || ms.iter().any(|&m| m < 2 || m > mref) {
                return input_error(format!("qq.m_values must be non-empty and within [2, m_reference = {mref}]"));
            }
            if q.seeds == Some(0) {
                return input_error("qq.seeds must be positive");
            }
            if q.beta.as_ref().is_some_and(|b| b.len() != 2 || b.iter().any(|v| !v.is_finite())) {
                return input_error("qq.beta needs two finite coefficients");
            }
        }
        if self.coverage.as_ref().is_some_and(|c| c.seeds == Some(0)) {
            return input_error("coverage.seeds must be positive");
        }
        if let Some(c) = &self.color_shape {
            let p_shape = c.p_shape.unwrap_or_default();
            let colors = c.train_colors.as_deref().unwrap_or_default();
            if colors.len() < 2 {
                return input_error("color_shape.train_colors needs at least 2 domains");
            }
            for &pc in colors.iter().chain(c.test_color.as_slice()) {
                ColorShapeSpec::new(pc, p_shape).map_err(bad)?;
            }
            if c.seeds == Some(0) || c.test_samples == Some(0) {
                return input_error("color_shape.seeds and test_samples must be positive");
            }
        }
        if let Some(v) = &self.verify {
            if v.tolerance.is_some_and(|t| !(t > 0.0)) || v.restarts == Some(0) {
                return input_error("verify.tolerance and restarts must be positive");
            }
            crate::fixtures::moments(self.verify_source())?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn environment(&self) -> &EnvironmentSection {
        self.environment.as_ref().expect("resolved config has an environment")
    }

    pub fn objective(&self) -> &ObjectiveSection {
        self.objective.as_ref().expect("resolved config has an objective")
    }

    pub fn train(&self) -> &TrainSection {
        self.train.as_ref().expect("resolved config has train settings")
    }

    pub fn family(&self) -> EnvironmentFamily<f64> {
        let e = self.environment();
        EnvironmentFamily {
            sigma1: e.sigma1.unwrap_or_default(),
            sigma_y: e.sigma_y.unwrap_or_default(),
            sigma2_mu: e.sigma2_mu.unwrap_or_default(),
            sigma2_sigma: e.sigma2_sigma.unwrap_or_default(),
        }
    }

    /// Quantile levels: `alphas` in order, then `log_tails`.
    pub fn levels(&self) -> Result<Vec<AlphaLevel<f64>>> {
        let o = self.objective();
        let mut out = Vec::new();
        for &a in o.alphas.iter().flatten() {
            if !(a > 0.0 && a < 1.0) {
                return input_error(format!("objective alpha {a} must lie in (0, 1)"));
            }
            out.push(AlphaLevel::Prob(a));
        }
        for &l in o.log_tails.iter().flatten() {
            if !(l < 0.0) || !l.is_finite() {
                return input_error(format!("objective log tail {l} must be finite and negative"));
            }
            out.push(AlphaLevel::LogTail(l));
        }
        Ok(out)
    }

    pub fn estimator(&self) -> EstimatorKind {
        match self.objective().estimator {
            Some(Estimator::Gaussian) => EstimatorKind::Gaussian,
            _ => EstimatorKind::Kde,
        }
    }

    pub fn bandwidth_rule(&self) -> Result<BandwidthRule<f64>> {
        Ok(match self.objective().bandwidth {
            Some(Bandwidth::Fixed(h)) => BandwidthRule::fixed(h).map_err(|e| InputError(e.to_string()))?,
            Some(Bandwidth::Rule(BandwidthName::Silverman)) => BandwidthRule::Silverman,
            Some(Bandwidth::Rule(BandwidthName::MedianHeuristic)) => BandwidthRule::MedianHeuristic,
            _ => BandwidthRule::GaussianOptimal,
        })
    }

    pub fn quantile_objective(&self, level: AlphaLevel<f64>) -> Objective<f64> {
        Objective::Eqrm {
            alpha: level,
            kind: self.estimator(),
            rule: self.bandwidth_rule().unwrap_or_default(),
            h_stop_gradient: self.objective().h_stop_gradient.unwrap_or_default(),
        }
    }

    pub fn train_config(&self) -> TrainConfig<f64> {
        let t = self.train();
        TrainConfig {
            learning_rate: t.learning_rate.unwrap_or_default(),
            steps: t.steps.unwrap_or_default(),
            pretrain_steps: t.pretrain_steps.unwrap_or_default(),
            cosine_anneal: t.cosine_anneal.unwrap_or_default(),
            post_pretrain_lr: t.post_pretrain_lr,
            seed: self.seed(),
            risk_mode: match t.risk {
                Some(RiskKind::Sampled) => RiskMode::Sampled { n: t.samples.unwrap_or_default() },
                _ => RiskMode::Analytic,
            },
        }
    }

    pub fn verify_source(&self) -> crate::fixtures::Source<'_> {
        let v = self.verify.as_ref().expect("resolved config has verify settings");
        match &v.domains {
            Some(d) => crate::fixtures::Source::Domains(d),
            None => crate::fixtures::Source::Named(v.fixture.as_deref().unwrap_or_default()),
        }
    }

    /// `key,value` rows: the build id, then every resolved setting as a dotted
    /// TOML key. Reading them back with [`from_manifest`](Self::from_manifest)
    /// gives the same config.
    pub fn manifest_rows(&self) -> Result<Vec<(String, String)>> {
        let mut recorded = self.clone();
        recorded.out_dir = None;
        let value = toml::Value::try_from(&recorded).context("serializing config")?;
        let mut rows = vec![("build_id".to_string(), BUILD_ID.to_string())];
        flatten("", &value, &mut rows);
        Ok(rows)
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        v => out.push((prefix.to_string(), v.to_string())),
    }
}
