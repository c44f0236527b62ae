//! Flat key=value experiment configuration.
//!
//! The format is versioned through the required `schema_version` key
//! (currently 1). Unknown and duplicate keys are errors, so configs
//! cannot silently drift. The canonical string renders every effective
//! setting (defaults resolved) as sorted `key=value` lines; its SHA-256
//! is the report's provenance hash, making identical behavior hash
//! identically regardless of key order or omitted defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::data::Scheme;
use crate::effects::{EstimatorKind, Linearity};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Which rows the weights are evaluated on for a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    Train,
    Test,
    Full,
}

impl std::fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalSplit::Train => "train",
            EvalSplit::Test => "test",
            EvalSplit::Full => "full",
        })
    }
}

impl FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(EvalSplit::Train),
            "test" => Ok(EvalSplit::Test),
            "full" => Ok(EvalSplit::Full),
            other => Err(Error::Config(format!(
                "unknown evaluation split '{other}' (expected train, test, or full)"
            ))),
        }
    }
}

/// How synthetic replications vary: a fresh dataset per replication or
/// one dataset with fresh splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationMode {
    Regenerate,
    Resplit,
}

impl std::fmt::Display for ReplicationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReplicationMode::Regenerate => "regenerate",
            ReplicationMode::Resplit => "resplit",
        })
    }
}

impl FromStr for ReplicationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regenerate" => Ok(ReplicationMode::Regenerate),
            "resplit" => Ok(ReplicationMode::Resplit),
            other => Err(Error::Config(format!(
                "unknown replication mode '{other}' (expected regenerate or resplit)"
            ))),
        }
    }
}

/// Data source of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Linear generator at a named bias preset.
    Linear {
        preset: String,
    },
    /// Non-linear generator at a named assignment-strength preset.
    Nonlinear {
        preset: String,
    },
    Roles,
    Ihdp,
    Jobs,
}

impl DatasetSpec {
    pub fn canonical(&self) -> String {
        match self {
            DatasetSpec::Linear { preset } => format!("linear_{preset}"),
            DatasetSpec::Nonlinear { preset } => format!("nonlinear_{preset}"),
            DatasetSpec::Roles => "roles".into(),
            DatasetSpec::Ihdp => "ihdp".into(),
            DatasetSpec::Jobs => "jobs".into(),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self, DatasetSpec::Ihdp | DatasetSpec::Jobs)
    }
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let preset_of = |rest: &str| -> Result<String> {
            match rest {
                "low" | "moderate" | "high" => Ok(rest.to_string()),
                other => Err(Error::Config(format!(
                    "unknown preset '{other}' (expected low, moderate, or high)"
                ))),
            }
        };
        if let Some(rest) = s.strip_prefix("linear_") {
            return Ok(DatasetSpec::Linear {
                preset: preset_of(rest)?,
            });
        }
        if let Some(rest) = s.strip_prefix("nonlinear_") {
            return Ok(DatasetSpec::Nonlinear {
                preset: preset_of(rest)?,
            });
        }
        match s {
            "roles" => Ok(DatasetSpec::Roles),
            "ihdp" => Ok(DatasetSpec::Ihdp),
            "jobs" => Ok(DatasetSpec::Jobs),
            other => Err(Error::Config(format!(
                "unknown dataset '{other}' (expected linear_<preset>, \
                 nonlinear_<preset>, roles, ihdp, or jobs)"
            ))),
        }
    }
}

/// Role-structured generator knobs carried by the experiment config.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RolesKeys {
    pub instrumental: usize,
    pub confounding: usize,
    pub adjustment: usize,
    pub instrumental_scale: f64,
    pub confounding_scale: f64,
    pub adjustment_scale: f64,
}

impl Default for RolesKeys {
    fn default() -> Self {
        RolesKeys {
            instrumental: 2,
            confounding: 2,
            adjustment: 2,
            instrumental_scale: 1.0,
            confounding_scale: 1.0,
            adjustment_scale: 1.0,
        }
    }
}

/// Full experiment description; every field has a config key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub schemes: Vec<Scheme>,
    pub estimator_overrides: BTreeMap<Scheme, EstimatorKind>,
    pub replications: usize,
    pub split_ratio: f64,
    pub base_seed: u64,
    pub linearity: Linearity,
    pub standardize: bool,
    pub probability_floor: f64,
    pub replication_mode: ReplicationMode,
    pub effect_eval: EvalSplit,
    pub balance_eval: EvalSplit,
    /// Synthetic sample count per replication.
    pub n: usize,
    /// CSV file (or realization directory) for the real datasets.
    pub data_path: Option<PathBuf>,
    /// External ground-truth constant for the job-training data, which
    /// carries no counterfactuals of its own.
    pub jobs_true_ate: Option<f64>,
    pub ridge_lambda: f64,
    pub kernel_lambda: f64,
    pub kernel_gamma: Option<f64>,
    pub kernel_median_heuristic: bool,
    pub roles: RolesKeys,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Linear {
                preset: "moderate".into(),
            },
            schemes: vec![
                Scheme::Dfw,
                Scheme::Ipw,
                Scheme::Cbps,
                Scheme::Overlap,
                Scheme::Unit,
            ],
            estimator_overrides: BTreeMap::new(),
            replications: 30,
            split_ratio: 0.8,
            base_seed: 42,
            linearity: Linearity::Linear,
            standardize: true,
            probability_floor: 1e-6,
            replication_mode: ReplicationMode::Regenerate,
            effect_eval: EvalSplit::Test,
            balance_eval: EvalSplit::Train,
            n: 1500,
            data_path: None,
            jobs_true_ate: None,
            ridge_lambda: 1.0,
            kernel_lambda: 0.1,
            kernel_gamma: None,
            kernel_median_heuristic: false,
            roles: RolesKeys::default(),
        }
    }
}

impl ExperimentConfig {
    /// The estimator bound to a scheme: the explicit override if any,
    /// otherwise weighted regression for every scheme except overlap,
    /// whose conventional estimator is the weighted mean difference.
    pub fn estimator_for(&self, scheme: Scheme) -> EstimatorKind {
        if let Some(kind) = self.estimator_overrides.get(&scheme) {
            return *kind;
        }
        match scheme {
            Scheme::Overlap => EstimatorKind::WeightedMeanDiff,
            _ => EstimatorKind::WeightedRegression,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio {} must lie strictly between 0 and 1",
                self.split_ratio
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes list is empty".into()));
        }
        let mut seen = Vec::new();
        for s in &self.schemes {
            if seen.contains(s) {
                return Err(Error::Config(format!("scheme '{s}' listed twice")));
            }
            seen.push(*s);
        }
        if !(self.probability_floor > 0.0 && self.probability_floor < 0.5) {
            return Err(Error::Config(format!(
                "probability_floor {} must lie strictly between 0 and 0.5",
                self.probability_floor
            )));
        }
        if self.dataset.is_synthetic() && self.n < 10 {
            return Err(Error::Config(format!(
                "synthetic sample count {} is too small to split",
                self.n
            )));
        }
        if !self.dataset.is_synthetic() && self.data_path.is_none() {
            return Err(Error::Config(format!(
                "dataset '{}' needs data_path",
                self.dataset.canonical()
            )));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::Config("ridge_lambda must be non-negative".into()));
        }
        if !(self.kernel_lambda > 0.0) {
            return Err(Error::Config("kernel_lambda must be positive".into()));
        }
        if let Some(g) = self.kernel_gamma {
            if !(g > 0.0) {
                return Err(Error::Config("kernel_gamma must be positive".into()));
            }
        }
        Ok(())
    }

    /// Every effective setting as sorted `key=value` lines.
    pub fn canonical_string(&self) -> String {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        entries.insert("schema_version".into(), SCHEMA_VERSION.to_string());
        entries.insert("dataset".into(), self.dataset.canonical());
        entries.insert(
            "schemes".into(),
            self.schemes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        for s in &self.schemes {
            entries.insert(format!("estimator.{s}"), self.estimator_for(*s).to_string());
        }
        entries.insert("replications".into(), self.replications.to_string());
        entries.insert("split_ratio".into(), self.split_ratio.to_string());
        entries.insert("base_seed".into(), self.base_seed.to_string());
        entries.insert("linearity".into(), self.linearity.to_string());
        entries.insert("standardize".into(), self.standardize.to_string());
        entries.insert(
            "probability_floor".into(),
            self.probability_floor.to_string(),
        );
        entries.insert("replication_mode".into(), self.replication_mode.to_string());
        entries.insert("effect_eval".into(), self.effect_eval.to_string());
        entries.insert("balance_eval".into(), self.balance_eval.to_string());
        if self.dataset.is_synthetic() {
            entries.insert("n".into(), self.n.to_string());
        }
        if let Some(p) = &self.data_path {
            entries.insert("data_path".into(), p.display().to_string());
        }
        if let Some(v) = self.jobs_true_ate {
            entries.insert("jobs_true_ate".into(), v.to_string());
        }
        entries.insert("ridge_lambda".into(), self.ridge_lambda.to_string());
        entries.insert("kernel_lambda".into(), self.kernel_lambda.to_string());
        entries.insert(
            "kernel_gamma".into(),
            self.kernel_gamma
                .map(|g| g.to_string())
                .unwrap_or_else(|| "auto".into()),
        );
        entries.insert(
            "kernel_median_heuristic".into(),
            self.kernel_median_heuristic.to_string(),
        );
        if matches!(self.dataset, DatasetSpec::Roles) {
            entries.insert(
                "roles_instrumental".into(),
                self.roles.instrumental.to_string(),
            );
            entries.insert(
                "roles_confounding".into(),
                self.roles.confounding.to_string(),
            );
            entries.insert("roles_adjustment".into(), self.roles.adjustment.to_string());
            entries.insert(
                "roles_instrumental_scale".into(),
                self.roles.instrumental_scale.to_string(),
            );
            entries.insert(
                "roles_confounding_scale".into(),
                self.roles.confounding_scale.to_string(),
            );
            entries.insert(
                "roles_adjustment_scale".into(),
                self.roles.adjustment_scale.to_string(),
            );
        }
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Hex SHA-256 of the canonical string.
    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_string().as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }

    /// Parses the flat key=value text format.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut pairs: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key=value, got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if pairs.insert(key, value).is_some() {
                return Err(Error::Config(format!("duplicate key '{key}'")));
            }
        }

        let version: u32 = match pairs.remove("schema_version") {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("schema_version '{v}' is not an integer")))?,
            None => return Err(Error::Config("missing required key schema_version".into())),
        };
        if version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {version} unsupported; this build reads version {SCHEMA_VERSION}"
            )));
        }

        let dataset = match pairs.remove("dataset") {
            Some(v) => v.parse()?,
            None => return Err(Error::Config("missing required key dataset".into())),
        };
        let mut config = ExperimentConfig {
            dataset,
            ..ExperimentConfig::default()
        };

        fn numeric<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("key {key}: cannot parse '{value}'")))
        }
        fn boolean(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!(
                    "key {key}: expected true or false, got '{value}'"
                ))),
            }
        }

        let keys: Vec<(&str, &str)> = pairs.into_iter().collect();
        for (key, value) in keys {
            match key {
                "schemes" => {
                    config.schemes = value
                        .split(',')
                        .map(|t| t.trim().parse::<Scheme>())
                        .collect::<Result<Vec<_>>>()?;
                }
                "replications" => config.replications = numeric(key, value)?,
                "split_ratio" => config.split_ratio = numeric(key, value)?,
                "base_seed" => config.base_seed = numeric(key, value)?,
                "linearity" => config.linearity = value.parse()?,
                "standardize" => config.standardize = boolean(key, value)?,
                "probability_floor" => config.probability_floor = numeric(key, value)?,
                "replication_mode" => config.replication_mode = value.parse()?,
                "effect_eval" => config.effect_eval = value.parse()?,
                "balance_eval" => config.balance_eval = value.parse()?,
                "n" => config.n = numeric(key, value)?,
                "data_path" => config.data_path = Some(PathBuf::from(value)),
                "jobs_true_ate" => config.jobs_true_ate = Some(numeric(key, value)?),
                "ridge_lambda" => config.ridge_lambda = numeric(key, value)?,
                "kernel_lambda" => config.kernel_lambda = numeric(key, value)?,
                "kernel_gamma" => {
                    config.kernel_gamma = if value == "auto" {
                        None
                    } else {
                        Some(numeric(key, value)?)
                    };
                }
                "kernel_median_heuristic" => {
                    config.kernel_median_heuristic = boolean(key, value)?;
                }
                "roles_instrumental" => config.roles.instrumental = numeric(key, value)?,
                "roles_confounding" => config.roles.confounding = numeric(key, value)?,
                "roles_adjustment" => config.roles.adjustment = numeric(key, value)?,
                "roles_instrumental_scale" => {
                    config.roles.instrumental_scale = numeric(key, value)?;
                }
                "roles_confounding_scale" => {
                    config.roles.confounding_scale = numeric(key, value)?;
                }
                "roles_adjustment_scale" => {
                    config.roles.adjustment_scale = numeric(key, value)?;
                }
                _ if key.starts_with("estimator.") => {
                    let scheme: Scheme = key["estimator.".len()..].parse()?;
                    config.estimator_overrides.insert(scheme, value.parse()?);
                }
                other => {
                    return Err(Error::Config(format!("unknown config key '{other}'")));
                }
            }
        }
        config.validate()?;
        Ok(config)
    }
}
