//! Core data carriers: dataset bundles, weight vectors, propensity fits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal role of a covariate column, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRole {
    /// Drives treatment only.
    Instrumental,
    /// Drives both treatment and outcome.
    Confounder,
    /// Drives outcome only.
    Adjustment,
    /// Drives neither.
    Noise,
}

impl fmt::Display for FeatureRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureRole::Instrumental => "instrumental",
            FeatureRole::Confounder => "confounder",
            FeatureRole::Adjustment => "adjustment",
            FeatureRole::Noise => "noise",
        };
        f.write_str(s)
    }
}

impl FromStr for FeatureRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instrumental" => Ok(FeatureRole::Instrumental),
            "confounder" => Ok(FeatureRole::Confounder),
            "adjustment" => Ok(FeatureRole::Adjustment),
            "noise" => Ok(FeatureRole::Noise),
            other => Err(Error::Config(format!("unknown feature role {other:?}"))),
        }
    }
}

/// One observational study: covariates, treatment assignment, outcomes,
/// and optional ground truth carried along from simulation or benchmark
/// counterfactual records.
///
/// Invariants (checked by [`DatasetBundle::validate`]):
/// - all per-sample vectors have length `n = covariates.nrows()`
/// - treatment labels lie in `{0, .., n_arms - 1}` and every arm is non-empty
/// - all floating-point payloads are finite
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    /// n x k covariate matrix.
    pub covariates: DMatrix<f64>,
    /// Arm label per sample; binary studies use {0, 1} with 1 = treated.
    pub treatment: Vec<u8>,
    /// Observed outcome per sample.
    pub outcome_factual: Vec<f64>,
    /// Control potential outcome, when the source provides it.
    pub outcome_y0: Option<Vec<f64>>,
    /// Treated potential outcome, when the source provides it.
    pub outcome_y1: Option<Vec<f64>>,
    /// Per-sample treatment effect as constructed by a generator. Stored
    /// separately from `y1 - y0` so exact ground truth survives rounding.
    pub true_ite: Option<Vec<f64>>,
    /// True assignment probability per sample, for simulated data.
    pub true_propensity: Option<Vec<f64>>,
    /// Column names, length k.
    pub feature_names: Vec<String>,
    /// Column roles, length k, when the source declares them.
    pub feature_roles: Option<Vec<FeatureRole>>,
    /// Number of treatment arms (2 for binary studies).
    pub n_arms: u8,
}

impl DatasetBundle {
    /// Binary-treatment bundle with no ground truth attached.
    pub fn binary(
        covariates: DMatrix<f64>,
        treatment: Vec<u8>,
        outcome_factual: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Self {
        DatasetBundle {
            covariates,
            treatment,
            outcome_factual,
            outcome_y0: None,
            outcome_y1: None,
            true_ite: None,
            true_propensity: None,
            feature_names,
            feature_roles: None,
            n_arms: 2,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.covariates.ncols()
    }

    /// Number of samples with the given arm label.
    pub fn arm_count(&self, arm: u8) -> usize {
        self.treatment.iter().filter(|&&t| t == arm).count()
    }

    /// Row indices belonging to the given arm, in dataset order.
    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        self.treatment
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == arm)
            .map(|(i, _)| i)
            .collect()
    }

    /// True if the bundle carries both potential outcomes.
    pub fn has_ground_truth(&self) -> bool {
        self.outcome_y0.is_some() && self.outcome_y1.is_some()
    }

    /// New bundle restricted to the given rows (kept in the given order).
    pub fn subset(&self, rows: &[usize]) -> Result<DatasetBundle> {
        let n = self.n_samples();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::ShapeMismatch(format!(
                "subset row {bad} out of range for {n} samples"
            )));
        }
        let take = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
        let covariates = DMatrix::from_fn(rows.len(), self.n_features(), |i, j| {
            self.covariates[(rows[i], j)]
        });
        Ok(DatasetBundle {
            covariates,
            treatment: rows.iter().map(|&r| self.treatment[r]).collect(),
            outcome_factual: take(&self.outcome_factual),
            outcome_y0: self.outcome_y0.as_deref().map(take),
            outcome_y1: self.outcome_y1.as_deref().map(take),
            true_ite: self.true_ite.as_deref().map(take),
            true_propensity: self.true_propensity.as_deref().map(take),
            feature_names: self.feature_names.clone(),
            feature_roles: self.feature_roles.clone(),
            n_arms: self.n_arms,
        })
    }

    /// Checks all structural invariants, returning the bundle unchanged.
    pub fn validate(self) -> Result<DatasetBundle> {
        let n = self.n_samples();
        let k = self.n_features();
        if n == 0 {
            return Err(Error::ShapeMismatch("bundle has no samples".into()));
        }
        let check_len = |name: &str, len: usize| -> Result<()> {
            if len != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
            Ok(())
        };
        check_len("treatment", self.treatment.len())?;
        check_len("outcome_factual", self.outcome_factual.len())?;
        if let Some(v) = &self.outcome_y0 {
            check_len("outcome_y0", v.len())?;
        }
        if let Some(v) = &self.outcome_y1 {
            check_len("outcome_y1", v.len())?;
        }
        if let Some(v) = &self.true_ite {
            check_len("true_ite", v.len())?;
        }
        if let Some(v) = &self.true_propensity {
            check_len("true_propensity", v.len())?;
        }
        if self.feature_names.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "feature_names has length {}, expected {k}",
                self.feature_names.len()
            )));
        }
        if let Some(roles) = &self.feature_roles {
            if roles.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "feature_roles has length {}, expected {k}",
                    roles.len()
                )));
            }
        }
        if self.n_arms < 2 {
            return Err(Error::TreatmentCoding(format!(
                "n_arms must be at least 2, got {}",
                self.n_arms
            )));
        }
        if let Some(&bad) = self.treatment.iter().find(|&&t| t >= self.n_arms) {
            return Err(Error::TreatmentCoding(format!(
                "label {bad} outside {{0, .., {}}}",
                self.n_arms - 1
            )));
        }
        for arm in 0..self.n_arms {
            if self.arm_count(arm) == 0 {
                return Err(Error::EmptyArm(format!("arm {arm} has no samples")));
            }
        }
        let finite = |name: &str, vals: &[f64]| -> Result<()> {
            if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{name}[{i}] is not finite")));
            }
            Ok(())
        };
        finite("covariates", self.covariates.as_slice())?;
        finite("outcome_factual", &self.outcome_factual)?;
        if let Some(v) = &self.outcome_y0 {
            finite("outcome_y0", v)?;
        }
        if let Some(v) = &self.outcome_y1 {
            finite("outcome_y1", v)?;
        }
        if let Some(v) = &self.true_ite {
            finite("true_ite", v)?;
        }
        if let Some(v) = &self.true_propensity {
            finite("true_propensity", v)?;
            if let Some(p) = v.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::NonFinite(format!(
                    "true_propensity value {p} outside [0, 1]"
                )));
            }
        }
        Ok(self)
    }

    /// Writes the bundle as CSV: features, then `t`, `y_factual`, and any
    /// of `y0`, `y1`, `true_ite`, `true_propensity` the bundle carries.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("t".into());
        header.push("y_factual".into());
        if self.outcome_y0.is_some() {
            header.push("y0".into());
        }
        if self.outcome_y1.is_some() {
            header.push("y1".into());
        }
        if self.true_ite.is_some() {
            header.push("true_ite".into());
        }
        if self.true_propensity.is_some() {
            header.push("true_propensity".into());
        }
        let fail = |e: csv::Error| Error::csv("<writer>", e);
        w.write_record(&header).map_err(fail)?;
        for i in 0..self.n_samples() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            for j in 0..self.n_features() {
                rec.push(format_float(self.covariates[(i, j)]));
            }
            rec.push(self.treatment[i].to_string());
            rec.push(format_float(self.outcome_factual[i]));
            if let Some(v) = &self.outcome_y0 {
                rec.push(format_float(v[i]));
            }
            if let Some(v) = &self.outcome_y1 {
                rec.push(format_float(v[i]));
            }
            if let Some(v) = &self.true_ite {
                rec.push(format_float(v[i]));
            }
            if let Some(v) = &self.true_propensity {
                rec.push(format_float(v[i]));
            }
            w.write_record(&rec).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

// f64 Display is shortest-round-trip, so CSV output re-parses exactly.
fn format_float(v: f64) -> String {
    v.to_string()
}

/// Checks all structural invariants of a bundle, returning it unchanged.
pub fn validate_bundle(bundle: DatasetBundle) -> Result<DatasetBundle> {
    bundle.validate()
}

/// Column-wise z-scoring plan fit on one row subset and applicable to
/// any matrix with the same columns. Binary columns (values in {0, 1}
/// over the fit rows) and constant columns pass through unchanged, so
/// indicator covariates keep their coding.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations over the fit rows.
    pub sds: Vec<f64>,
    /// Whether each column is actually rescaled.
    pub scaled: Vec<bool>,
}

impl Standardizer {
    /// Fits on the given rows only; statistics never leak from the rest.
    pub fn fit(covariates: &DMatrix<f64>, rows: &[usize]) -> Result<Standardizer> {
        if rows.is_empty() {
            return Err(Error::InsufficientData(
                "standardizer needs at least one fit row".into(),
            ));
        }
        let n = covariates.nrows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::ShapeMismatch(format!(
                "standardizer fit row {bad} out of range for {n} samples"
            )));
        }
        let k = covariates.ncols();
        let mut means = Vec::with_capacity(k);
        let mut sds = Vec::with_capacity(k);
        let mut scaled = Vec::with_capacity(k);
        for j in 0..k {
            let vals: Vec<f64> = rows.iter().map(|&r| covariates[(r, j)]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            let sd = var.sqrt();
            let binary = vals.iter().all(|v| *v == 0.0 || *v == 1.0);
            means.push(mean);
            sds.push(sd);
            scaled.push(!binary && sd > 0.0);
        }
        Ok(Standardizer { means, sds, scaled })
    }

    pub fn fit_all(covariates: &DMatrix<f64>) -> Result<Standardizer> {
        let rows: Vec<usize> = (0..covariates.nrows()).collect();
        Standardizer::fit(covariates, &rows)
    }

    pub fn transform(&self, covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if covariates.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns against a standardizer fit on {}",
                covariates.ncols(),
                self.means.len()
            )));
        }
        Ok(DMatrix::from_fn(
            covariates.nrows(),
            covariates.ncols(),
            |i, j| {
                if self.scaled[j] {
                    (covariates[(i, j)] - self.means[j]) / self.sds[j]
                } else {
                    covariates[(i, j)]
                }
            },
        ))
    }
}

/// Weighting scheme tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Deconfounding-factor weight: one minus the probability of the
    /// received arm.
    Dfw,
    /// Inverse probability of the received arm.
    Ipw,
    /// Inverse probability computed from a balance-objective propensity fit.
    Cbps,
    /// Overlap weight: probability of the opposite arm (binary only).
    Overlap,
    /// All weights one; the unadjusted baseline.
    Unit,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Dfw,
        Scheme::Ipw,
        Scheme::Cbps,
        Scheme::Overlap,
        Scheme::Unit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Dfw => "dfw",
            Scheme::Ipw => "ipw",
            Scheme::Cbps => "cbps",
            Scheme::Overlap => "overlap",
            Scheme::Unit => "unit",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dfw" => Ok(Scheme::Dfw),
            "ipw" => Ok(Scheme::Ipw),
            "cbps" => Ok(Scheme::Cbps),
            "overlap" => Ok(Scheme::Overlap),
            "unit" => Ok(Scheme::Unit),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Per-sample weights tagged with the scheme that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub scheme: Scheme,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, scheme: Scheme) -> Self {
        WeightVector { weights, scheme }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Which objective produced a propensity fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityEstimator {
    /// Ridge-penalized maximum likelihood.
    Logistic,
    /// Covariate-balancing objective.
    Cbps,
}

impl fmt::Display for PropensityEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropensityEstimator::Logistic => f.write_str("logistic"),
            PropensityEstimator::Cbps => f.write_str("cbps"),
        }
    }
}

/// A fitted propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: DVector<f64>,
    /// n x m row-stochastic matrix; column j is P(T = j | X).
    pub probabilities: DMatrix<f64>,
    pub estimator: PropensityEstimator,
    /// Clamp applied to emitted probabilities, kept so predictions on new
    /// samples use the same floor the fit was configured with.
    pub probability_floor: f64,
}

impl PropensityFit {
    /// P(T = 1 | X) per sample, for binary fits.
    pub fn treated_probability(&self) -> Vec<f64> {
        self.probabilities.column(1).iter().copied().collect()
    }

    /// P(T = t_i | X = x_i) per sample.
    pub fn received_probability(&self, treatment: &[u8]) -> Result<Vec<f64>> {
        if treatment.len() != self.probabilities.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "treatment has length {}, fit covers {} samples",
                treatment.len(),
                self.probabilities.nrows()
            )));
        }
        let m = self.probabilities.ncols();
        treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                if (t as usize) < m {
                    Ok(self.probabilities[(i, t as usize)])
                } else {
                    Err(Error::TreatmentCoding(format!(
                        "label {t} outside the {m} fitted arms at sample {i}"
                    )))
                }
            })
            .collect()
    }
}
