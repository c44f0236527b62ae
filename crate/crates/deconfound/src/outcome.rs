//! Weighted outcome models: linear ridge and RBF kernel ridge.
//!
//! Both are single-model ("S-learner") fits over a design whose last
//! column is the treatment indicator; potential outcomes come from
//! predicting with that column forced to 0 and to 1.
//!
//! Weight conventions differ deliberately:
//!
//! - [`fit_weighted_ridge`] rescales weights to mean one before solving,
//!   so coefficient estimates are invariant to the overall weight scale.
//! - [`fit_weighted_kernel_ridge`] uses the weights exactly as given in
//!   the dual system `(K + lambda * diag(1/w)) alpha = y`; splitting a
//!   sample into two half-weight copies then leaves predictions exactly
//!   unchanged. Callers wanting scale invariance normalize first, as the
//!   effect estimators in this crate do.

use nalgebra::{DMatrix, DVector};

use crate::data::WeightVector;
use crate::error::{Error, Result};

/// Settings for the weighted linear ridge model.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    /// Penalty on the non-intercept coefficients.
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { lambda: 1.0 }
    }
}

/// Settings for the weighted RBF kernel ridge model.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRidgeConfig {
    /// Penalty on the function norm.
    pub lambda: f64,
    /// RBF bandwidth; `None` selects 1 / n_columns of the design.
    pub gamma: Option<f64>,
    /// Replace the default bandwidth with 1 / median squared distance.
    pub median_heuristic: bool,
}

impl Default for KernelRidgeConfig {
    fn default() -> Self {
        KernelRidgeConfig {
            lambda: 0.1,
            gamma: None,
            median_heuristic: false,
        }
    }
}

/// Fitted linear model; coefficients are intercept-first.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: DVector<f64>,
}

impl LinearModel {
    /// Predicts rows of a design with the same columns as the fit.
    pub fn predict(&self, design: &DMatrix<f64>) -> Result<Vec<f64>> {
        if design.ncols() + 1 != self.coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} design columns against {} coefficients (intercept included)",
                design.ncols(),
                self.coefficients.len()
            )));
        }
        let slopes = self.coefficients.rows(1, design.ncols());
        let mut out = design * slopes;
        out.add_scalar_mut(self.coefficients[0]);
        Ok(out.iter().copied().collect())
    }
}

/// Fitted kernel model; keeps the training rows for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub alpha: DVector<f64>,
    pub train_rows: DMatrix<f64>,
    pub gamma: f64,
}

impl KernelModel {
    pub fn predict(&self, design: &DMatrix<f64>) -> Result<Vec<f64>> {
        if design.ncols() != self.train_rows.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} design columns against {} in the training rows",
                design.ncols(),
                self.train_rows.ncols()
            )));
        }
        let n = self.train_rows.nrows();
        let m = design.nrows();
        let mut out = Vec::with_capacity(m);
        for q in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                let mut sq = 0.0;
                for j in 0..design.ncols() {
                    let d = design[(q, j)] - self.train_rows[(i, j)];
                    sq += d * d;
                }
                acc += (-self.gamma * sq).exp() * self.alpha[i];
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Either outcome model behind one prediction interface.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeModel {
    Linear(LinearModel),
    Kernel(KernelModel),
}

impl OutcomeModel {
    pub fn predict(&self, design: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            OutcomeModel::Linear(m) => m.predict(design),
            OutcomeModel::Kernel(m) => m.predict(design),
        }
    }

    fn design_columns(&self) -> usize {
        match self {
            OutcomeModel::Linear(m) => m.coefficients.len() - 1,
            OutcomeModel::Kernel(m) => m.train_rows.ncols(),
        }
    }
}

fn check_fit_inputs(design: &DMatrix<f64>, outcome: &[f64], weights: &WeightVector) -> Result<()> {
    let n = design.nrows();
    if outcome.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "design covers {n} samples, outcome {} and weights {}",
            outcome.len(),
            weights.len()
        )));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no samples to fit".into()));
    }
    if let Some(i) = design.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("design entry {i}")));
    }
    if let Some(i) = outcome.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("outcome[{i}]")));
    }
    if let Some(i) = weights
        .weights
        .iter()
        .position(|w| !w.is_finite() || *w < 0.0)
    {
        return Err(Error::DegenerateWeights(format!(
            "weight[{i}] = {} is negative or not finite",
            weights.weights[i]
        )));
    }
    if weights.weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateWeights("weights sum to zero".into()));
    }
    Ok(())
}

/// Solves the weighted ridge normal equations
/// `(Z' W Z + lambda J) beta = Z' W y` with intercept-augmented design Z,
/// weights rescaled to mean one, and J the identity zeroed at the
/// intercept. Minimizes `sum w_i (y_i - z_i beta)^2 + lambda |beta_1..|^2`
/// in the rescaled weights.
pub fn fit_weighted_ridge(
    design: &DMatrix<f64>,
    outcome: &[f64],
    weights: &WeightVector,
    config: &RidgeConfig,
) -> Result<LinearModel> {
    check_fit_inputs(design, outcome, weights)?;
    if !(config.lambda >= 0.0) {
        return Err(Error::Config(format!(
            "ridge lambda {} must be non-negative",
            config.lambda
        )));
    }
    let (n, k) = design.shape();
    let sw: f64 = weights.weights.iter().sum();
    let scale = n as f64 / sw;
    let w: Vec<f64> = weights.weights.iter().map(|v| v * scale).collect();

    // A = Z' W Z + lambda J, b = Z' W y, built in one pass.
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut b = DVector::<f64>::zeros(k + 1);
    for i in 0..n {
        let wi = w[i];
        a[(0, 0)] += wi;
        b[0] += wi * outcome[i];
        for p in 0..k {
            let xp = design[(i, p)] * wi;
            a[(0, p + 1)] += xp;
            b[p + 1] += xp * outcome[i];
            for q in p..k {
                a[(p + 1, q + 1)] += xp * design[(i, q)];
            }
        }
    }
    for p in 0..k {
        a[(p + 1, p + 1)] += config.lambda;
        a[(p + 1, 0)] = a[(0, p + 1)];
        for q in (p + 1)..k {
            a[(q + 1, p + 1)] = a[(p + 1, q + 1)];
        }
    }

    let coefficients = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SingularSystem("weighted ridge normal equations".into()))?,
    };
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularSystem(
            "weighted ridge produced non-finite coefficients".into(),
        ));
    }
    Ok(LinearModel { coefficients })
}

/// RBF Gram matrix between row sets.
fn rbf_gram(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let mut sq = 0.0;
        for c in 0..a.ncols() {
            let d = a[(i, c)] - b[(j, c)];
            sq += d * d;
        }
        (-gamma * sq).exp()
    })
}

/// Median squared pairwise distance of the design rows (distinct pairs).
fn median_squared_distance(design: &DMatrix<f64>) -> Option<f64> {
    let n = design.nrows();
    if n < 2 {
        return None;
    }
    let mut sq = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for c in 0..design.ncols() {
                let d = design[(i, c)] - design[(j, c)];
                s += d * d;
            }
            sq.push(s);
        }
    }
    sq.sort_by(f64::total_cmp);
    let mid = sq.len() / 2;
    let med = if sq.len() % 2 == 1 {
        sq[mid]
    } else {
        0.5 * (sq[mid - 1] + sq[mid])
    };
    (med > 0.0).then_some(med)
}

/// Solves the dual system `(K + lambda * diag(1/w)) alpha = y` with an
/// RBF kernel over the design rows. Zero-weight samples are rejected
/// (their dual diagonal would be infinite).
pub fn fit_weighted_kernel_ridge(
    design: &DMatrix<f64>,
    outcome: &[f64],
    weights: &WeightVector,
    config: &KernelRidgeConfig,
) -> Result<KernelModel> {
    check_fit_inputs(design, outcome, weights)?;
    if !(config.lambda > 0.0) {
        return Err(Error::Config(format!(
            "kernel lambda {} must be positive",
            config.lambda
        )));
    }
    if let Some(i) = weights.weights.iter().position(|w| *w == 0.0) {
        return Err(Error::DegenerateWeights(format!(
            "weight[{i}] is zero; kernel duals need strictly positive weights"
        )));
    }
    let gamma = match (config.gamma, config.median_heuristic) {
        (Some(g), _) if g > 0.0 => g,
        (Some(g), _) => {
            return Err(Error::Config(format!("kernel gamma {g} must be positive")));
        }
        (None, true) => match median_squared_distance(design) {
            Some(med) => 1.0 / med,
            None => 1.0 / design.ncols().max(1) as f64,
        },
        (None, false) => 1.0 / design.ncols().max(1) as f64,
    };

    let n = design.nrows();
    let mut a = rbf_gram(design, design, gamma);
    for i in 0..n {
        a[(i, i)] += config.lambda / weights.weights[i];
    }
    let y = DVector::from_column_slice(outcome);
    let alpha = match a.clone().cholesky() {
        Some(ch) => ch.solve(&y),
        None => a
            .lu()
            .solve(&y)
            .ok_or_else(|| Error::SingularSystem("kernel ridge dual system".into()))?,
    };
    if alpha.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularSystem(
            "kernel ridge produced non-finite duals".into(),
        ));
    }
    Ok(KernelModel {
        alpha,
        train_rows: design.clone(),
        gamma,
    })
}

/// Predicts both potential outcomes for covariate rows by forcing the
/// trailing treatment column of the design to 0 and to 1.
///
/// Returns `(y0_hat, y1_hat)`.
pub fn predict_potential_outcomes(
    model: &OutcomeModel,
    covariates: &DMatrix<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = covariates.ncols();
    if k + 1 != model.design_columns() {
        return Err(Error::DimensionMismatch(format!(
            "{k} covariate columns against a model fit on {} design columns \
             (covariates plus treatment)",
            model.design_columns()
        )));
    }
    let m = covariates.nrows();
    let with_t =
        |t: f64| DMatrix::from_fn(m, k + 1, |i, j| if j == k { t } else { covariates[(i, j)] });
    let y0 = model.predict(&with_t(0.0))?;
    let y1 = model.predict(&with_t(1.0))?;
    Ok((y0, y1))
}

/// Appends the treatment indicator as the last design column.
pub fn design_with_treatment(covariates: &DMatrix<f64>, treatment: &[u8]) -> Result<DMatrix<f64>> {
    let (n, k) = covariates.shape();
    if treatment.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "treatment has length {}, covariates cover {n} samples",
            treatment.len()
        )));
    }
    Ok(DMatrix::from_fn(n, k + 1, |i, j| {
        if j == k {
            f64::from(treatment[i])
        } else {
            covariates[(i, j)]
        }
    }))
}
