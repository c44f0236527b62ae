//! Treatment effect estimators and their accuracy scores.
//!
//! Two estimator families share one result type: a weighted regression
//! that fits a single outcome model on covariates plus the treatment
//! indicator and contrasts its two counterfactual predictions, and a
//! weighted difference of arm means. Both are invariant to rescaling
//! all weights by a positive constant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::balance::weighted_mean;
use crate::data::{DatasetBundle, WeightVector};
use crate::error::{Error, Result};
use crate::numeric::compensated_mean;
use crate::outcome::{
    design_with_treatment, fit_weighted_kernel_ridge, fit_weighted_ridge,
    predict_potential_outcomes, KernelRidgeConfig, OutcomeModel, RidgeConfig,
};

/// Which estimator produced an effect estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    WeightedRegression,
    WeightedMeanDiff,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::WeightedRegression => f.write_str("weighted_regression"),
            EstimatorKind::WeightedMeanDiff => f.write_str("weighted_mean_diff"),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_regression" | "regression" => Ok(EstimatorKind::WeightedRegression),
            "weighted_mean_diff" | "mean_diff" => Ok(EstimatorKind::WeightedMeanDiff),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected regression or mean_diff)"
            ))),
        }
    }
}

/// Outcome-model family for the regression estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearity {
    Linear,
    Nonlinear,
}

impl fmt::Display for Linearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Linearity::Linear => f.write_str("linear"),
            Linearity::Nonlinear => f.write_str("nonlinear"),
        }
    }
}

impl FromStr for Linearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Linearity::Linear),
            "nonlinear" => Ok(Linearity::Nonlinear),
            other => Err(Error::Config(format!(
                "unknown outcome model '{other}' (expected linear or nonlinear)"
            ))),
        }
    }
}

/// Settings for both outcome-model families; linearity picks one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeConfig {
    pub ridge: RidgeConfig,
    pub kernel: KernelRidgeConfig,
}

/// An ATE estimate with its accuracy scores where ground truth allows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub ate_hat: f64,
    /// Absolute ATE error; absent without ground truth.
    pub epsilon_ate: Option<f64>,
    /// Root mean squared ITE error; absent without potential outcomes.
    pub pehe: Option<f64>,
    pub estimator: EstimatorKind,
}

/// Per-sample true effects: stored exactly when the generator kept them,
/// otherwise the difference of the potential outcomes.
fn true_ite_vector(bundle: &DatasetBundle) -> Option<Vec<f64>> {
    if let Some(ite) = &bundle.true_ite {
        return Some(ite.clone());
    }
    match (&bundle.outcome_y0, &bundle.outcome_y1) {
        (Some(y0), Some(y1)) => Some(y0.iter().zip(y1).map(|(a, b)| b - a).collect()),
        _ => None,
    }
}

/// Mean true effect over the bundle's rows.
pub fn true_ate(bundle: &DatasetBundle) -> Result<f64> {
    let ite = true_ite_vector(bundle).ok_or_else(|| {
        Error::MissingGroundTruth("bundle has neither stored effects nor potential outcomes".into())
    })?;
    if ite.is_empty() {
        return Err(Error::InsufficientData("no rows to average".into()));
    }
    Ok(compensated_mean(&ite))
}

/// Absolute error of an ATE estimate.
pub fn epsilon_ate(ate_true: f64, ate_hat: f64) -> f64 {
    (ate_true - ate_hat).abs()
}

/// Root mean squared difference between true and estimated per-sample
/// effects.
pub fn pehe(ite_true: &[f64], ite_hat: &[f64]) -> Result<f64> {
    if ite_true.len() != ite_hat.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true effects against {} estimates",
            ite_true.len(),
            ite_hat.len()
        )));
    }
    if ite_true.is_empty() {
        return Err(Error::InsufficientData("no rows to score".into()));
    }
    let sq: Vec<f64> = ite_true
        .iter()
        .zip(ite_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(compensated_mean(&sq).sqrt())
}

fn score(
    bundle: &DatasetBundle,
    ate_hat: f64,
    ite_hat: &[f64],
    kind: EstimatorKind,
) -> Result<EffectEstimate> {
    let (eps, p) = match true_ite_vector(bundle) {
        Some(ite_true) => {
            let at = compensated_mean(&ite_true);
            (
                Some(epsilon_ate(at, ate_hat)),
                Some(pehe(&ite_true, ite_hat)?),
            )
        }
        None => (None, None),
    };
    Ok(EffectEstimate {
        ate_hat,
        epsilon_ate: eps,
        pehe: p,
        estimator: kind,
    })
}

fn check_alignment(bundle: &DatasetBundle, weights: &WeightVector) -> Result<()> {
    if bundle.n_arms != 2 {
        return Err(Error::TreatmentCoding(format!(
            "effect estimators need binary treatment, bundle declares {} arms",
            bundle.n_arms
        )));
    }
    if weights.len() != bundle.n_samples() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights against {} samples",
            weights.len(),
            bundle.n_samples()
        )));
    }
    Ok(())
}

/// Fits one outcome model on covariates plus treatment with the given
/// weights (rescaled to mean one first), predicts both counterfactuals
/// for every row, and averages their difference.
pub fn estimate_weighted_regression(
    bundle: &DatasetBundle,
    weights: &WeightVector,
    config: &OutcomeConfig,
    linearity: Linearity,
) -> Result<EffectEstimate> {
    check_alignment(bundle, weights)?;
    let n = bundle.n_samples();
    let total: f64 = weights.weights.iter().sum();
    if !(total > 0.0) || weights.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateWeights(
            "regression estimator needs finite non-negative weights with positive total".into(),
        ));
    }
    let scale = n as f64 / total;
    let normalized = WeightVector::new(
        weights.weights.iter().map(|w| w * scale).collect(),
        weights.scheme,
    );

    let design = design_with_treatment(&bundle.covariates, &bundle.treatment)?;
    let model = match linearity {
        Linearity::Linear => OutcomeModel::Linear(fit_weighted_ridge(
            &design,
            &bundle.outcome_factual,
            &normalized,
            &config.ridge,
        )?),
        Linearity::Nonlinear => OutcomeModel::Kernel(fit_weighted_kernel_ridge(
            &design,
            &bundle.outcome_factual,
            &normalized,
            &config.kernel,
        )?),
    };
    let (y0, y1) = predict_potential_outcomes(&model, &bundle.covariates)?;
    let ite_hat: Vec<f64> = y1.iter().zip(&y0).map(|(a, b)| a - b).collect();
    let ate_hat = compensated_mean(&ite_hat);
    score(bundle, ate_hat, &ite_hat, EstimatorKind::WeightedRegression)
}

/// Difference of weighted arm means; the per-sample effect is the
/// constant estimate itself.
pub fn estimate_weighted_mean_diff(
    bundle: &DatasetBundle,
    weights: &WeightVector,
) -> Result<EffectEstimate> {
    check_alignment(bundle, weights)?;
    let arm_mean = |arm: u8| -> Result<f64> {
        let rows = bundle.arm_indices(arm);
        if rows.is_empty() {
            return Err(Error::EmptyArm(format!("arm {arm} has no samples")));
        }
        let y: Vec<f64> = rows.iter().map(|&i| bundle.outcome_factual[i]).collect();
        let w: Vec<f64> = rows.iter().map(|&i| weights.weights[i]).collect();
        weighted_mean(&y, &w)
    };
    let ate_hat = arm_mean(1)? - arm_mean(0)?;
    let ite_hat = vec![ate_hat; bundle.n_samples()];
    score(bundle, ate_hat, &ite_hat, EstimatorKind::WeightedMeanDiff)
}
