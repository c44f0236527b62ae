//! Seeded synthetic dataset generators.
//!
//! Three designs: a linear model whose bias weights drive both treatment
//! assignment and the outcome, a non-linear design with a heterogeneous
//! effect, and a role-structured design separating instrumental,
//! confounding, and adjustment features.
//!
//! Determinism contract: every covariate column is filled from its own
//! child stream of the seed (column j uses stream j), and the treatment
//! noise, treatment draw, and outcome noise use reserved streams far
//! above any column index. Adding columns or changing coefficient
//! scales therefore never perturbs the values drawn for existing
//! columns. All normal variates come from one inverse-CDF transform, so
//! bundles are bit-identical across platforms and thread counts.

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::data::{DatasetBundle, FeatureRole};
use crate::error::{Error, Result};
use crate::numeric::sigmoid;
use crate::rng::{
    standard_normal, stream_rng, uniform_open, STREAM_OUTCOME_NOISE, STREAM_TREATMENT_DRAW,
    STREAM_TREATMENT_NOISE,
};

/// Additive effect of the role-structured design.
const ROLES_EFFECT: f64 = 1.0;

/// Linear design: treatment probability sigma(X w + eps); outcome
/// w1 x1 + w2 x2 - w3 x3 + w4 x4 - w5 x5 + w6 x6 + eta, shifted by a
/// constant effect for the treated potential outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGenConfig {
    pub n: usize,
    /// w1..w6; used by assignment as given and by the outcome with the
    /// sign pattern [+, +, -, +, -, +].
    pub bias_weights: [f64; 6],
    pub treatment_noise_sd: f64,
    pub outcome_noise_sd: f64,
    pub effect_c: f64,
    pub seed: u64,
}

impl Default for LinearGenConfig {
    fn default() -> Self {
        LinearGenConfig {
            n: 1500,
            bias_weights: [0.5; 6],
            treatment_noise_sd: 0.08,
            outcome_noise_sd: 0.1,
            effect_c: 2.0,
            seed: 0,
        }
    }
}

/// Non-linear design: e(x) = sigma(alpha tanh x1 + beta x2^2 - gamma x3 + eps);
/// outcome 1.5 x1 + sin x2 - 0.8 x3 + 0.5 x4 + eta; per-sample effect
/// 2 + 0.5 x5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearGenConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub propensity_noise_sd: f64,
    pub outcome_noise_sd: f64,
    pub seed: u64,
}

impl Default for NonlinearGenConfig {
    fn default() -> Self {
        NonlinearGenConfig {
            n: 1500,
            alpha: 3.0,
            beta: 1.0,
            gamma: 0.5,
            propensity_noise_sd: 0.05,
            outcome_noise_sd: 0.1,
            seed: 0,
        }
    }
}

/// Role-structured design. Instrumental columns enter only the
/// assignment model, adjustment columns only the outcome, confounding
/// columns both; the treated potential outcome adds a constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleGenConfig {
    pub n: usize,
    pub n_instrumental: usize,
    pub n_confounding: usize,
    pub n_adjustment: usize,
    pub instrumental_scale: f64,
    pub confounding_scale: f64,
    pub adjustment_scale: f64,
    pub treatment_noise_sd: f64,
    pub outcome_noise_sd: f64,
    pub seed: u64,
}

impl Default for RoleGenConfig {
    fn default() -> Self {
        RoleGenConfig {
            n: 1500,
            n_instrumental: 2,
            n_confounding: 2,
            n_adjustment: 2,
            instrumental_scale: 1.0,
            confounding_scale: 1.0,
            adjustment_scale: 1.0,
            treatment_noise_sd: 0.08,
            outcome_noise_sd: 0.1,
            seed: 0,
        }
    }
}

fn check_n_and_sds(n: usize, sds: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("generator needs n > 0".into()));
    }
    if let Some(bad) = sds.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Config(format!(
            "noise standard deviation {bad} must be finite and non-negative"
        )));
    }
    Ok(())
}

/// One covariate column per child stream; column j uses stream j.
fn normal_columns(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, k);
    for j in 0..k {
        let mut rng = stream_rng(seed, j as u64);
        for i in 0..n {
            x[(i, j)] = standard_normal(&mut rng);
        }
    }
    x
}

fn normal_noise(n: usize, sd: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..n).map(|_| sd * standard_normal(&mut rng)).collect()
}

/// Bernoulli draws from the reserved treatment stream.
fn draw_treatment(propensity: &[f64], seed: u64) -> Vec<u8> {
    let mut rng = stream_rng(seed, STREAM_TREATMENT_DRAW);
    propensity
        .iter()
        .map(|p| u8::from(uniform_open(&mut rng) < *p))
        .collect()
}

fn assemble(
    covariates: DMatrix<f64>,
    treatment: Vec<u8>,
    y0: Vec<f64>,
    ite: Vec<f64>,
    propensity: Vec<f64>,
    feature_names: Vec<String>,
) -> DatasetBundle {
    let y1: Vec<f64> = y0.iter().zip(&ite).map(|(a, b)| a + b).collect();
    let factual: Vec<f64> = treatment
        .iter()
        .zip(y0.iter().zip(&y1))
        .map(|(&t, (a, b))| if t == 1 { *b } else { *a })
        .collect();
    let mut bundle = DatasetBundle::binary(covariates, treatment, factual, feature_names);
    bundle.outcome_y0 = Some(y0);
    bundle.outcome_y1 = Some(y1);
    bundle.true_ite = Some(ite);
    bundle.true_propensity = Some(propensity);
    bundle
}

fn x_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{}", j + 1)).collect()
}

pub fn generate_linear(config: &LinearGenConfig) -> Result<DatasetBundle> {
    check_n_and_sds(
        config.n,
        &[config.treatment_noise_sd, config.outcome_noise_sd],
    )?;
    if config
        .bias_weights
        .iter()
        .chain([&config.effect_c])
        .any(|v| !v.is_finite())
    {
        return Err(Error::Config(
            "bias weights and effect must be finite".into(),
        ));
    }
    let n = config.n;
    let x = normal_columns(n, 6, config.seed);
    let eps = normal_noise(
        n,
        config.treatment_noise_sd,
        config.seed,
        STREAM_TREATMENT_NOISE,
    );
    let eta = normal_noise(
        n,
        config.outcome_noise_sd,
        config.seed,
        STREAM_OUTCOME_NOISE,
    );

    let w = &config.bias_weights;
    const OUTCOME_SIGNS: [f64; 6] = [1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
    let mut propensity = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    for i in 0..n {
        let mut lin_t = eps[i];
        let mut lin_y = eta[i];
        for j in 0..6 {
            lin_t += w[j] * x[(i, j)];
            lin_y += OUTCOME_SIGNS[j] * w[j] * x[(i, j)];
        }
        propensity.push(sigmoid(lin_t));
        y0.push(lin_y);
    }
    let treatment = draw_treatment(&propensity, config.seed);
    let ite = vec![config.effect_c; n];
    Ok(assemble(x, treatment, y0, ite, propensity, x_names(6)))
}

pub fn generate_nonlinear(config: &NonlinearGenConfig) -> Result<DatasetBundle> {
    check_n_and_sds(
        config.n,
        &[config.propensity_noise_sd, config.outcome_noise_sd],
    )?;
    if [config.alpha, config.beta, config.gamma]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::Config(
            "assignment coefficients must be finite".into(),
        ));
    }
    let n = config.n;
    let x = normal_columns(n, 5, config.seed);
    let eps = normal_noise(
        n,
        config.propensity_noise_sd,
        config.seed,
        STREAM_TREATMENT_NOISE,
    );
    let eta = normal_noise(
        n,
        config.outcome_noise_sd,
        config.seed,
        STREAM_OUTCOME_NOISE,
    );

    let mut propensity = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut ite = Vec::with_capacity(n);
    for i in 0..n {
        let (x1, x2, x3, x4, x5) = (x[(i, 0)], x[(i, 1)], x[(i, 2)], x[(i, 3)], x[(i, 4)]);
        propensity.push(sigmoid(
            config.alpha * x1.tanh() + config.beta * x2 * x2 - config.gamma * x3 + eps[i],
        ));
        y0.push(1.5 * x1 + x2.sin() - 0.8 * x3 + 0.5 * x4 + eta[i]);
        ite.push(2.0 + 0.5 * x5);
    }
    let treatment = draw_treatment(&propensity, config.seed);
    Ok(assemble(x, treatment, y0, ite, propensity, x_names(5)))
}

pub fn generate_roles(config: &RoleGenConfig) -> Result<DatasetBundle> {
    check_n_and_sds(
        config.n,
        &[config.treatment_noise_sd, config.outcome_noise_sd],
    )?;
    if config.n_instrumental == 0 || config.n_confounding == 0 || config.n_adjustment == 0 {
        return Err(Error::Config(
            "each feature role needs at least one column".into(),
        ));
    }
    if [
        config.instrumental_scale,
        config.confounding_scale,
        config.adjustment_scale,
    ]
    .iter()
    .any(|v| !v.is_finite())
    {
        return Err(Error::Config("role scales must be finite".into()));
    }
    let n = config.n;
    let (ni, nc, na) = (
        config.n_instrumental,
        config.n_confounding,
        config.n_adjustment,
    );
    let k = ni + nc + na;
    let x = normal_columns(n, k, config.seed);
    let eps = normal_noise(
        n,
        config.treatment_noise_sd,
        config.seed,
        STREAM_TREATMENT_NOISE,
    );
    let eta = normal_noise(
        n,
        config.outcome_noise_sd,
        config.seed,
        STREAM_OUTCOME_NOISE,
    );

    let mut propensity = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    for i in 0..n {
        let mut lin_t = eps[i];
        let mut lin_y = eta[i];
        for j in 0..ni {
            lin_t += config.instrumental_scale * x[(i, j)];
        }
        for j in ni..(ni + nc) {
            lin_t += config.confounding_scale * x[(i, j)];
            lin_y += config.confounding_scale * x[(i, j)];
        }
        for j in (ni + nc)..k {
            lin_y += config.adjustment_scale * x[(i, j)];
        }
        propensity.push(sigmoid(lin_t));
        y0.push(lin_y);
    }
    let treatment = draw_treatment(&propensity, config.seed);
    let ite = vec![ROLES_EFFECT; n];

    let mut names = Vec::with_capacity(k);
    let mut roles = Vec::with_capacity(k);
    for j in 0..ni {
        names.push(format!("inst{}", j + 1));
        roles.push(FeatureRole::Instrumental);
    }
    for j in 0..nc {
        names.push(format!("conf{}", j + 1));
        roles.push(FeatureRole::Confounder);
    }
    for j in 0..na {
        names.push(format!("adj{}", j + 1));
        roles.push(FeatureRole::Adjustment);
    }
    let mut bundle = assemble(x, treatment, y0, ite, propensity, names);
    bundle.feature_roles = Some(roles);
    Ok(bundle)
}

/// The three frozen selection-bias levels for the linear design: the
/// first, fourth, and sixth bias weights move together while the rest
/// stay at 0.5.
pub fn bias_presets(seed: u64) -> [(&'static str, LinearGenConfig); 3] {
    let with = |lvl: f64| {
        let mut c = LinearGenConfig {
            seed,
            ..LinearGenConfig::default()
        };
        c.bias_weights = [lvl, 0.5, 0.5, lvl, 0.5, lvl];
        c
    };
    [
        ("low", with(0.3)),
        ("moderate", with(1.5)),
        ("high", with(3.0)),
    ]
}

pub fn bias_preset(name: &str, seed: u64) -> Result<LinearGenConfig> {
    bias_presets(seed)
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown bias preset '{name}' (expected low, moderate, or high)"
            ))
        })
}

/// Frozen non-linear assignment strengths: one common factor scales the
/// default coefficients (3, 1, 0.5).
pub fn nonlinear_presets(seed: u64) -> [(&'static str, NonlinearGenConfig); 3] {
    let with = |scale: f64| {
        let base = NonlinearGenConfig::default();
        NonlinearGenConfig {
            alpha: scale * base.alpha,
            beta: scale * base.beta,
            gamma: scale * base.gamma,
            seed,
            ..base
        }
    };
    [
        ("low", with(0.5)),
        ("moderate", with(1.0)),
        ("high", with(3.0)),
    ]
}

pub fn nonlinear_preset(name: &str, seed: u64) -> Result<NonlinearGenConfig> {
    nonlinear_presets(seed)
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown non-linear preset '{name}' (expected low, moderate, or high)"
            ))
        })
}
