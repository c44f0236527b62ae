//! Assignment-probability estimation.
//!
//! Two fitters produce a [`PropensityFit`]:
//!
//! - [`fit_logistic`]: ridge-penalized Bernoulli likelihood, maximized by
//!   iteratively reweighted least squares with step halving.
//! - [`fit_cbps`]: a covariate-balancing objective, the squared norm of
//!   the inverse-probability-weighted covariate imbalance plus a ridge
//!   term, minimized by gradient descent with backtracking from the
//!   likelihood solution.
//!
//! Emitted probabilities are clamped away from 0 and 1 by a configurable
//! floor so downstream inverse weights stay finite.

use nalgebra::{DMatrix, DVector};

use crate::data::{PropensityEstimator, PropensityFit};
use crate::error::{Error, Result};
use crate::numeric::{ln1pexp, sigmoid};

/// Floor shared by every probability emission unless overridden.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-6;

/// Settings for the penalized-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConfig {
    /// Ridge penalty on the non-intercept coefficients.
    pub ridge_penalty: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the largest coefficient change.
    pub convergence_tol: f64,
    /// Emitted probabilities are clamped to `[floor, 1 - floor]`.
    pub probability_floor: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            ridge_penalty: 1e-6,
            max_iterations: 100,
            convergence_tol: 1e-8,
            probability_floor: DEFAULT_PROBABILITY_FLOOR,
        }
    }
}

/// Starting point for the balance-objective search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbpsInit {
    /// Start from the penalized-likelihood coefficients.
    LogisticMle,
    /// Start from all-zero coefficients.
    Zero,
}

/// Settings for the balance-objective fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CbpsConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the largest gradient component.
    pub gradient_tol: f64,
    /// Ridge penalty on all coefficients (intercept included).
    pub ridge_penalty: f64,
    pub init: CbpsInit,
}

impl Default for CbpsConfig {
    fn default() -> Self {
        CbpsConfig {
            max_iterations: 500,
            gradient_tol: 1e-8,
            ridge_penalty: 1e-6,
            init: CbpsInit::LogisticMle,
        }
    }
}

fn check_inputs(covariates: &DMatrix<f64>, treatment: &[u8]) -> Result<()> {
    let n = covariates.nrows();
    if treatment.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "treatment has length {}, covariates cover {n} samples",
            treatment.len()
        )));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no samples to fit".into()));
    }
    if let Some(i) = covariates.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("covariate entry {i}")));
    }
    if let Some(&bad) = treatment.iter().find(|&&t| t > 1) {
        return Err(Error::TreatmentCoding(format!(
            "binary fit, found label {bad}"
        )));
    }
    let treated = treatment.iter().filter(|&&t| t == 1).count();
    if treated == 0 || treated == treatment.len() {
        return Err(Error::EmptyArm(
            "binary fit needs both arms populated".into(),
        ));
    }
    Ok(())
}

/// Linear predictor eta = b0 + X b for intercept-first coefficients.
fn linear_predictor(covariates: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let k = covariates.ncols();
    let slopes = beta.rows(1, k);
    let mut eta = covariates * slopes;
    eta.add_scalar_mut(beta[0]);
    eta
}

/// Penalized Bernoulli log-likelihood:
/// `sum(t * eta - ln(1 + exp(eta))) - (ridge / 2) * |beta[1..]|^2`.
fn penalized_loglik(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    beta: &DVector<f64>,
    ridge: f64,
) -> f64 {
    let eta = linear_predictor(covariates, beta);
    let mut ll = 0.0;
    for (i, &t) in treatment.iter().enumerate() {
        ll += f64::from(t) * eta[i] - ln1pexp(eta[i]);
    }
    let pen: f64 = beta.rows(1, beta.len() - 1).norm_squared();
    ll - 0.5 * ridge * pen
}

/// Gradient of the penalized log-likelihood (the penalized score).
fn penalized_score(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    beta: &DVector<f64>,
    ridge: f64,
) -> DVector<f64> {
    let eta = linear_predictor(covariates, beta);
    let resid = DVector::from_fn(treatment.len(), |i, _| {
        f64::from(treatment[i]) - sigmoid(eta[i])
    });
    let k = covariates.ncols();
    let mut g = DVector::zeros(k + 1);
    g[0] = resid.sum();
    let gx = covariates.transpose() * &resid;
    for j in 0..k {
        g[j + 1] = gx[j] - ridge * beta[j + 1];
    }
    g
}

fn emit_probabilities(e_raw: &DVector<f64>, floor: f64) -> DMatrix<f64> {
    DMatrix::from_fn(e_raw.len(), 2, |i, j| {
        let e = e_raw[i].clamp(floor, 1.0 - floor);
        if j == 1 {
            e
        } else {
            1.0 - e
        }
    })
}

/// Fits a binary logistic model by IRLS with step halving.
///
/// The intercept is unpenalized; `ridge_penalty` applies to the covariate
/// coefficients. Covariate-free inputs (zero columns) fit the intercept
/// alone. Fails with a non-convergence error when the penalized score at
/// the final iterate exceeds `1e-6 * n` in max-norm.
pub fn fit_logistic(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    config: &LogisticConfig,
) -> Result<PropensityFit> {
    check_inputs(covariates, treatment)?;
    if config.ridge_penalty < 0.0 || !config.ridge_penalty.is_finite() {
        return Err(Error::Config(format!(
            "ridge penalty {} must be finite and non-negative",
            config.ridge_penalty
        )));
    }
    if !(0.0 < config.probability_floor && config.probability_floor < 0.5) {
        return Err(Error::Config(format!(
            "probability floor {} outside (0, 0.5)",
            config.probability_floor
        )));
    }
    let n = covariates.nrows();
    let k = covariates.ncols();
    let ridge = config.ridge_penalty;
    let mut beta = DVector::zeros(k + 1);
    let mut ll = penalized_loglik(covariates, treatment, &beta, ridge);

    for _ in 0..config.max_iterations {
        let eta = linear_predictor(covariates, &beta);
        let g = penalized_score(covariates, treatment, &beta, ridge);

        // Hessian of the negative objective: Z' W Z + ridge * J.
        let mut h = DMatrix::zeros(k + 1, k + 1);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let w = p * (1.0 - p);
            h[(0, 0)] += w;
            for a in 0..k {
                let xa = covariates[(i, a)] * w;
                h[(0, a + 1)] += xa;
                for b in a..k {
                    h[(a + 1, b + 1)] += xa * covariates[(i, b)];
                }
            }
        }
        for a in 0..k {
            h[(a + 1, a + 1)] += ridge;
            h[(a + 1, 0)] = h[(0, a + 1)];
            for b in (a + 1)..k {
                h[(b + 1, a + 1)] = h[(a + 1, b + 1)];
            }
        }

        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => h
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::SingularSystem("IRLS normal equations".into()))?,
        };

        // Backtrack until the penalized likelihood does not decrease.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * scale;
            let cand_ll = penalized_loglik(covariates, treatment, &cand, ridge);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll, scale));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_ll, scale)) = accepted else {
            break;
        };
        beta = next;
        ll = next_ll;
        if step.amax() * scale < config.convergence_tol {
            break;
        }
    }

    let g = penalized_score(covariates, treatment, &beta, ridge);
    let score_norm = g.amax();
    if !score_norm.is_finite() {
        return Err(Error::NonFinite("penalized score".into()));
    }
    if score_norm > 1e-6 * n as f64 {
        return Err(Error::NonConvergence(format!(
            "penalized score max-norm {score_norm:.3e} exceeds {:.3e} after {} iterations",
            1e-6 * n as f64,
            config.max_iterations
        )));
    }

    let eta = linear_predictor(covariates, &beta);
    let e_raw = eta.map(sigmoid);
    Ok(PropensityFit {
        coefficients: beta,
        probabilities: emit_probabilities(&e_raw, config.probability_floor),
        estimator: PropensityEstimator::Logistic,
        probability_floor: config.probability_floor,
    })
}

/// Balance residual `r(beta)`: the inverse-probability-weighted imbalance
/// of the design columns (constant column included, so arm sizes are
/// balanced too), averaged over samples. Probabilities are clamped by the
/// default floor before entering the residual.
fn balance_residual(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    e_clamped: &[f64],
) -> DVector<f64> {
    let (n, k) = covariates.shape();
    let mut r = DVector::zeros(k + 1);
    for i in 0..n {
        let c = if treatment[i] == 1 {
            1.0 / e_clamped[i]
        } else {
            -1.0 / (1.0 - e_clamped[i])
        };
        r[0] += c;
        for j in 0..k {
            r[j + 1] += c * covariates[(i, j)];
        }
    }
    r / n as f64
}

/// Balance objective: `|r(beta)|^2 + ridge * |beta|^2`, where `r` is the
/// weighted imbalance of the design columns (constant included).
pub fn cbps_objective(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    beta: &DVector<f64>,
    ridge: f64,
) -> f64 {
    let eta = linear_predictor(covariates, beta);
    let e: Vec<f64> = eta
        .iter()
        .map(|&z| sigmoid(z).clamp(DEFAULT_PROBABILITY_FLOOR, 1.0 - DEFAULT_PROBABILITY_FLOOR))
        .collect();
    let r = balance_residual(covariates, treatment, &e);
    r.norm_squared() + ridge * beta.norm_squared()
}

/// Analytic gradient of [`cbps_objective`]. Samples whose probability sits
/// on the clamp boundary contribute a zero derivative, matching the
/// piecewise-constant clamp.
pub fn cbps_gradient(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    beta: &DVector<f64>,
    ridge: f64,
) -> DVector<f64> {
    let (n, k) = covariates.shape();
    let eta = linear_predictor(covariates, beta);
    let floor = DEFAULT_PROBABILITY_FLOOR;
    let mut e = vec![0.0; n];
    let mut clamped = vec![false; n];
    for i in 0..n {
        let raw = sigmoid(eta[i]);
        clamped[i] = raw < floor || raw > 1.0 - floor;
        e[i] = raw.clamp(floor, 1.0 - floor);
    }
    let r = balance_residual(covariates, treatment, &e);
    // d r_k / d beta_j = (1/n) sum_i dc_i z_ik z_ij over design rows
    // z_i = [1, x_i], so grad = (2/n) Z' s + 2 ridge beta with
    // s_i = dc_i (z_i . r).
    let mut g = DVector::zeros(k + 1);
    for i in 0..n {
        if clamped[i] {
            continue;
        }
        let dc = if treatment[i] == 1 {
            -(1.0 - e[i]) / e[i]
        } else {
            -e[i] / (1.0 - e[i])
        };
        let zr: f64 = r[0] + (0..k).map(|j| covariates[(i, j)] * r[j + 1]).sum::<f64>();
        let s = dc * zr;
        g[0] += s;
        for j in 0..k {
            g[j + 1] += s * covariates[(i, j)];
        }
    }
    g *= 2.0 / n as f64;
    g + beta * (2.0 * ridge)
}

/// Fits the balance-objective model, returning the fit and the objective
/// value after every accepted descent step (the first entry is the value
/// at the starting point).
pub fn fit_cbps_traced(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    config: &CbpsConfig,
) -> Result<(PropensityFit, Vec<f64>)> {
    check_inputs(covariates, treatment)?;
    let k = covariates.ncols();
    let ridge = config.ridge_penalty;
    let mut beta = match config.init {
        CbpsInit::LogisticMle => {
            fit_logistic(covariates, treatment, &LogisticConfig::default())?.coefficients
        }
        CbpsInit::Zero => DVector::zeros(k + 1),
    };

    let mut f = cbps_objective(covariates, treatment, &beta, ridge);
    let mut g = cbps_gradient(covariates, treatment, &beta, ridge);
    if !f.is_finite() {
        return Err(Error::NonFinite("balance objective at start".into()));
    }
    let mut trace = vec![f];
    let mut step = 1.0f64;

    for _ in 0..config.max_iterations {
        if g.amax() <= config.gradient_tol {
            break;
        }
        let g_sq = g.norm_squared();
        if !g_sq.is_finite() {
            return Err(Error::NonFinite("balance gradient".into()));
        }
        // Backtracking line search along the negative gradient with a
        // sufficient-decrease condition; the accepted step seeds the next
        // search, doubled.
        let mut s = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta - &g * s;
            let cand_f = cbps_objective(covariates, treatment, &cand, ridge);
            if cand_f <= f - 1e-4 * s * g_sq {
                beta = cand;
                f = cand_f;
                g = cbps_gradient(covariates, treatment, &beta, ridge);
                trace.push(f);
                step = (s * 2.0).min(1e6);
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // Descent stalled at line-search resolution; the current
            // iterate is still a valid (improved) solution.
            break;
        }
    }

    let eta = linear_predictor(covariates, &beta);
    let e_raw = eta.map(sigmoid);
    let fit = PropensityFit {
        coefficients: beta,
        probabilities: emit_probabilities(&e_raw, DEFAULT_PROBABILITY_FLOOR),
        estimator: PropensityEstimator::Cbps,
        probability_floor: DEFAULT_PROBABILITY_FLOOR,
    };
    Ok((fit, trace))
}

/// Fits the balance-objective model. See [`fit_cbps_traced`] for the
/// variant that also returns the descent trace.
pub fn fit_cbps(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    config: &CbpsConfig,
) -> Result<PropensityFit> {
    fit_cbps_traced(covariates, treatment, config).map(|(fit, _)| fit)
}

/// Applies a fitted model to new covariate rows, returning the clamped
/// row-stochastic probability matrix.
pub fn predict_propensity(fit: &PropensityFit, covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if covariates.ncols() + 1 != fit.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate columns against {} fitted coefficients (intercept included)",
            covariates.ncols(),
            fit.coefficients.len()
        )));
    }
    if let Some(i) = covariates.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("covariate entry {i}")));
    }
    let eta = linear_predictor(covariates, &fit.coefficients);
    let e_raw = eta.map(sigmoid);
    Ok(emit_probabilities(&e_raw, fit.probability_floor))
}
