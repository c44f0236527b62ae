//! Weighted balance diagnostics: means, variances, standardized mean
//! differences, empirical CDFs, two-sample K-S statistics, and
//! replication confidence intervals.

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::data::WeightVector;
use crate::error::{Error, Result};

fn check_pair(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("value[{i}] is not finite")));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateWeights(format!(
            "weight[{i}] = {} is negative or not finite",
            weights[i]
        )));
    }
    Ok(())
}

/// Weighted mean. Errors when the weights sum to zero.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    check_pair(values, weights)?;
    let sw: f64 = weights.iter().sum();
    if sw <= 0.0 {
        return Err(Error::DegenerateWeights("weights sum to zero".into()));
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / sw)
}

/// Unbiased weighted variance under normalized (reliability) weights:
///
/// `s2 = [sum(w) / (sum(w)^2 - sum(w^2))] * sum(w * (x - mean)^2)`
///
/// Reduces to the n-1 sample variance for equal weights. Errors when
/// `sum(w)^2 <= sum(w^2)`, i.e. the weight mass sits on a single sample.
pub fn weighted_variance(values: &[f64], weights: &[f64]) -> Result<f64> {
    check_pair(values, weights)?;
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    let denom = sw * sw - sw2;
    if !(denom > 0.0) {
        return Err(Error::DegenerateWeights(format!(
            "effective sample size too small: sum(w)^2 = {} <= sum(w^2) = {sw2}",
            sw * sw
        )));
    }
    let mean = weighted_mean(values, weights)?;
    let ss: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum();
    Ok(ss * sw / denom)
}

/// Signed standardized mean difference, in percent:
///
/// `100 * (mean_t - mean_c) / sqrt((var_t + var_c) / 2)`
///
/// Errors when the pooled variance is zero.
pub fn smd(
    treated_values: &[f64],
    treated_weights: &[f64],
    control_values: &[f64],
    control_weights: &[f64],
) -> Result<f64> {
    let mt = weighted_mean(treated_values, treated_weights)?;
    let mc = weighted_mean(control_values, control_weights)?;
    let vt = weighted_variance(treated_values, treated_weights)?;
    let vc = weighted_variance(control_values, control_weights)?;
    let pooled = ((vt + vc) / 2.0).sqrt();
    if pooled <= 0.0 {
        return Err(Error::DegenerateWeights(
            "pooled variance is zero, standardized difference undefined".into(),
        ));
    }
    Ok(100.0 * (mt - mc) / pooled)
}

/// A weighted empirical CDF: cumulative normalized weight at each
/// distinct sample value, in increasing order. Right-continuous.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcdfTrace {
    /// `(value, cumulative)` pairs at the distinct sorted values.
    pub points: Vec<(f64, f64)>,
}

impl EcdfTrace {
    /// F(x): the cumulative weight of samples with value <= x.
    pub fn eval(&self, x: f64) -> f64 {
        match self.points.partition_point(|&(v, _)| v <= x).checked_sub(1) {
            Some(i) => self.points[i].1,
            None => 0.0,
        }
    }
}

/// Weighted empirical CDF. Errors when the weights sum to zero.
pub fn weighted_ecdf(values: &[f64], weights: &[f64]) -> Result<EcdfTrace> {
    check_pair(values, weights)?;
    let sw: f64 = weights.iter().sum();
    if sw <= 0.0 {
        return Err(Error::DegenerateWeights("weights sum to zero".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i] / sw;
        match points.last_mut() {
            Some(last) if last.0 == values[i] => last.1 = cum,
            _ => points.push((values[i], cum)),
        }
    }
    // Guard against rounding drift in the final step.
    if let Some(last) = points.last_mut() {
        last.1 = 1.0;
    }
    Ok(EcdfTrace { points })
}

/// Two-sample weighted Kolmogorov-Smirnov statistic: the largest gap
/// between the two weighted ECDFs, evaluated at every pooled jump point.
pub fn ks_statistic(
    treated_values: &[f64],
    treated_weights: &[f64],
    control_values: &[f64],
    control_weights: &[f64],
) -> Result<f64> {
    let ft = weighted_ecdf(treated_values, treated_weights)?;
    let fc = weighted_ecdf(control_values, control_weights)?;
    let mut sup: f64 = 0.0;
    for &(v, _) in ft.points.iter().chain(fc.points.iter()) {
        let gap = (ft.eval(v) - fc.eval(v)).abs();
        if gap > sup {
            sup = gap;
        }
    }
    Ok(sup)
}

/// Percentile interval across replications.
///
/// Returns `(lower, point, upper)` where the point estimate is the mean
/// and the bounds are linearly interpolated order statistics at
/// `(1 - level) / 2` and `1 - (1 - level) / 2`. Requires at least two
/// replications.
pub fn replication_ci(values: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 replications for an interval, got {}",
            values.len()
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("replication value [{i}]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let point = values.iter().sum::<f64>() / values.len() as f64;
    Ok((
        percentile_sorted(&sorted, alpha / 2.0),
        point,
        percentile_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}

/// Linear interpolation between closest ranks (the common spreadsheet
/// convention): index h = (n - 1) p.
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Balance summary for one covariate under one weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBalance {
    pub feature: String,
    /// Signed standardized mean difference, percent.
    pub smd: f64,
    /// Two-sample K-S statistic between the weighted arm distributions.
    pub ks: f64,
}

/// Per-feature SMD and K-S between the two arms of a binary study,
/// under the given weights.
pub fn evaluate_balance(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    weights: &WeightVector,
    feature_names: &[String],
) -> Result<Vec<FeatureBalance>> {
    let (n, k) = covariates.shape();
    if treatment.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "covariates cover {n} samples, treatment {} and weights {}",
            treatment.len(),
            weights.len()
        )));
    }
    if feature_names.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{} feature names for {k} columns",
            feature_names.len()
        )));
    }
    if let Some(&bad) = treatment.iter().find(|&&t| t > 1) {
        return Err(Error::TreatmentCoding(format!(
            "balance diagnostics are binary-only, found label {bad}"
        )));
    }
    let treated: Vec<usize> = (0..n).filter(|&i| treatment[i] == 1).collect();
    let control: Vec<usize> = (0..n).filter(|&i| treatment[i] == 0).collect();
    if treated.is_empty() || control.is_empty() {
        return Err(Error::EmptyArm("balance needs both arms populated".into()));
    }
    let tw: Vec<f64> = treated.iter().map(|&i| weights.weights[i]).collect();
    let cw: Vec<f64> = control.iter().map(|&i| weights.weights[i]).collect();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let tv: Vec<f64> = treated.iter().map(|&i| covariates[(i, j)]).collect();
        let cv: Vec<f64> = control.iter().map(|&i| covariates[(i, j)]).collect();
        out.push(FeatureBalance {
            feature: feature_names[j].clone(),
            smd: smd(&tv, &tw, &cv, &cw)?,
            ks: ks_statistic(&tv, &tw, &cv, &cw)?,
        });
    }
    Ok(out)
}

/// Weighted arm ECDFs for one covariate column of a binary study.
pub fn arm_ecdfs(
    covariates: &DMatrix<f64>,
    treatment: &[u8],
    weights: &WeightVector,
    column: usize,
) -> Result<(EcdfTrace, EcdfTrace)> {
    let n = covariates.nrows();
    if column >= covariates.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "column {column} out of range for {} columns",
            covariates.ncols()
        )));
    }
    if treatment.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch(
            "treatment and weights must cover every sample".into(),
        ));
    }
    let mut tv = Vec::new();
    let mut tw = Vec::new();
    let mut cv = Vec::new();
    let mut cw = Vec::new();
    for i in 0..n {
        match treatment[i] {
            1 => {
                tv.push(covariates[(i, column)]);
                tw.push(weights.weights[i]);
            }
            0 => {
                cv.push(covariates[(i, column)]);
                cw.push(weights.weights[i]);
            }
            other => {
                return Err(Error::TreatmentCoding(format!(
                    "binary-only diagnostic, found label {other}"
                )))
            }
        }
    }
    Ok((weighted_ecdf(&tv, &tw)?, weighted_ecdf(&cv, &cw)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn weighted_mean_hand_value() {
        let m = weighted_mean(&[1.0, 2.0, 3.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn weighted_variance_hand_value() {
        let v = weighted_variance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn weighted_variance_equal_weights_is_sample_variance() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let w = vec![3.0; xs.len()];
        let v = weighted_variance(&xs, &w).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sv = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_abs_diff_eq!(v, sv, epsilon = 1e-12);
    }

    #[test]
    fn weighted_variance_degenerate_rejected() {
        // All mass on one sample.
        assert!(matches!(
            weighted_variance(&[1.0, 2.0], &[1.0, 0.0]),
            Err(Error::DegenerateWeights(_))
        ));
        assert!(weighted_variance(&[1.0], &[2.5]).is_err());
    }

    #[test]
    fn smd_hand_value() {
        // Unit variance in both arms, mean gap 1 -> 100 / sqrt(1).
        // Shifted copies of the same spread keep both variances at 0.5.
        let t = [1.5, 2.5];
        let c = [0.5, 1.5];
        let w = [1.0, 1.0];
        let got = smd(&t, &w, &c, &w).unwrap();
        assert_abs_diff_eq!(got, 100.0 / 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(got, 141.421_356_237_309_5, epsilon = 1e-9);
    }

    #[test]
    fn smd_is_antisymmetric() {
        let t = [3.0, 4.0, 5.5];
        let c = [1.0, 2.0, 2.5];
        let tw = [1.0, 2.0, 1.5];
        let cw = [2.0, 1.0, 1.0];
        let a = smd(&t, &tw, &c, &cw).unwrap();
        let b = smd(&c, &cw, &t, &tw).unwrap();
        assert_abs_diff_eq!(a, -b, epsilon = 1e-12);
    }

    #[test]
    fn ecdf_steps_and_eval() {
        let trace = weighted_ecdf(&[2.0, 1.0, 2.0, 3.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(trace.points.len(), 3);
        assert_abs_diff_eq!(trace.eval(0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.eval(1.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.eval(1.5), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.eval(2.0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.eval(9.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ks_hand_value() {
        // T = {1, 2}, C = {1.5, 2.5}: largest gap 0.5.
        let got = ks_statistic(&[1.0, 2.0], &[1.0, 1.0], &[1.5, 2.5], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(got, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let v = [1.0, 2.0, 3.0];
        let w = [1.0, 2.0, 0.5];
        assert_abs_diff_eq!(ks_statistic(&v, &w, &v, &w).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn replication_ci_hand_values() {
        let vals: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let (lo, point, hi) = replication_ci(&vals, 0.95).unwrap();
        assert_abs_diff_eq!(lo, 0.1225, epsilon = 1e-12);
        assert_abs_diff_eq!(point, 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.9775, epsilon = 1e-12);
    }

    #[test]
    fn replication_ci_needs_two() {
        assert!(matches!(
            replication_ci(&[1.0], 0.95),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn replication_ci_constant_values() {
        let (lo, point, hi) = replication_ci(&[2.5, 2.5, 2.5], 0.9).unwrap();
        assert_eq!((lo, point, hi), (2.5, 2.5, 2.5));
    }

    #[test]
    fn evaluate_balance_shapes() {
        let x = nalgebra::dmatrix![1.0, 10.0; 2.0, 20.0; 3.0, 30.0; 4.0, 40.0];
        let t = [1u8, 0, 1, 0];
        let w = WeightVector::new(vec![1.0; 4], crate::data::Scheme::Unit);
        let names = vec!["a".to_string(), "b".to_string()];
        let fb = evaluate_balance(&x, &t, &w, &names).unwrap();
        assert_eq!(fb.len(), 2);
        assert_eq!(fb[0].feature, "a");
        assert!(fb.iter().all(|f| f.ks >= 0.0 && f.ks <= 1.0));
    }

    // Brute-force K-S oracle: evaluate both weighted ECDFs by direct
    // summation at every pooled value.
    fn ks_brute(tv: &[f64], tw: &[f64], cv: &[f64], cw: &[f64]) -> f64 {
        let swt: f64 = tw.iter().sum();
        let swc: f64 = cw.iter().sum();
        let f = |vals: &[f64], ws: &[f64], sw: f64, x: f64| -> f64 {
            vals.iter()
                .zip(ws)
                .filter(|(v, _)| **v <= x)
                .map(|(_, w)| *w)
                .sum::<f64>()
                / sw
        };
        let mut sup: f64 = 0.0;
        for &x in tv.iter().chain(cv.iter()) {
            let gap = (f(tv, tw, swt, x) - f(cv, cw, swc, x)).abs();
            sup = sup.max(gap);
        }
        sup
    }

    proptest! {
        #[test]
        fn ks_matches_brute_force(
            tv in prop::collection::vec(-5.0f64..5.0, 2..30),
            cv in prop::collection::vec(-5.0f64..5.0, 2..30),
            tw in prop::collection::vec(0.05f64..4.0, 30),
            cw in prop::collection::vec(0.05f64..4.0, 30),
        ) {
            // Duplicate some values to exercise ties across groups.
            let mut tv = tv;
            if tv.len() > 3 {
                let v = cv[0];
                tv[0] = v;
                tv[1] = v;
            }
            let tw = &tw[..tv.len()];
            let cw = &cw[..cv.len()];
            let fast = ks_statistic(&tv, tw, &cv, cw).unwrap();
            let brute = ks_brute(&tv, tw, &cv, cw);
            prop_assert!((fast - brute).abs() <= 1e-12, "{fast} vs {brute}");
        }

        #[test]
        fn ecdf_is_monotone_within_unit_range(
            vals in prop::collection::vec(-10.0f64..10.0, 1..50),
            ws in prop::collection::vec(0.01f64..5.0, 50),
        ) {
            let ws = &ws[..vals.len()];
            let trace = weighted_ecdf(&vals, ws).unwrap();
            let mut prev = 0.0;
            for &(_, c) in &trace.points {
                prop_assert!(c >= prev - 1e-12);
                prop_assert!(c <= 1.0 + 1e-12);
                prev = c;
            }
            prop_assert!((trace.points.last().unwrap().1 - 1.0).abs() <= 1e-12);
            // Distinct, increasing values.
            for pair in trace.points.windows(2) {
                prop_assert!(pair[0].0 < pair[1].0);
            }
        }

        #[test]
        fn smd_shift_invariance(
            t in prop::collection::vec(-3.0f64..3.0, 3..20),
            c in prop::collection::vec(-3.0f64..3.0, 3..20),
            shift in -50.0f64..50.0,
        ) {
            prop_assume!(spread(&t) > 1e-3 && spread(&c) > 1e-3);
            let tw = vec![1.0; t.len()];
            let cw = vec![1.0; c.len()];
            let base = smd(&t, &tw, &c, &cw).unwrap();
            let ts: Vec<f64> = t.iter().map(|v| v + shift).collect();
            let cs: Vec<f64> = c.iter().map(|v| v + shift).collect();
            let shifted = smd(&ts, &tw, &cs, &cw).unwrap();
            prop_assert!((base - shifted).abs() <= 1e-6 * (1.0 + base.abs()));
        }
    }

    fn spread(v: &[f64]) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        hi - lo
    }
}
