//! Weighting schemes over fitted assignment probabilities.
//!
//! All constructors validate their inputs and tag the result with the
//! scheme that produced it. For binary studies with probability of
//! treatment `e`:
//!
//! - deconfounding factor: `w = 1 - P(T = t | X)`, in (0, 1) for any
//!   number of arms
//! - inverse probability: `w = t / e + (1 - t) / (1 - e)`, always >= 1
//! - overlap: `w = 1 - e` for treated, `e` for controls
//! - unit: `w = 1`

use nalgebra::DMatrix;

use crate::data::{PropensityFit, Scheme, WeightVector};
use crate::error::{Error, Result};

fn check_probability(p: f64, what: &str, i: usize) -> Result<()> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::DegenerateWeights(format!(
            "{what}[{i}] = {p} outside the open interval (0, 1)"
        )));
    }
    Ok(())
}

/// Deconfounding-factor weights from a row-stochastic probability matrix.
///
/// Accepts any number of arms: `w_i = 1 - probabilities[i][t_i]`.
pub fn dfw_weights(probabilities: &DMatrix<f64>, treatment: &[u8]) -> Result<WeightVector> {
    let (n, m) = probabilities.shape();
    if treatment.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "treatment has length {}, probabilities cover {n} samples",
            treatment.len()
        )));
    }
    let mut weights = Vec::with_capacity(n);
    for (i, &t) in treatment.iter().enumerate() {
        if (t as usize) >= m {
            return Err(Error::TreatmentCoding(format!(
                "label {t} outside the {m} probability columns at sample {i}"
            )));
        }
        let p = probabilities[(i, t as usize)];
        check_probability(p, "received probability", i)?;
        weights.push(1.0 - p);
    }
    Ok(WeightVector::new(weights, Scheme::Dfw))
}

/// Inverse-probability weights from treated-arm probabilities (binary).
pub fn ipw_weights(treated_probability: &[f64], treatment: &[u8]) -> Result<WeightVector> {
    check_binary(treated_probability, treatment)?;
    let weights = treatment
        .iter()
        .zip(treated_probability)
        .map(|(&t, &e)| if t == 1 { 1.0 / e } else { 1.0 / (1.0 - e) })
        .collect();
    Ok(WeightVector::new(weights, Scheme::Ipw))
}

/// Overlap weights from treated-arm probabilities (binary).
pub fn overlap_weights(treated_probability: &[f64], treatment: &[u8]) -> Result<WeightVector> {
    check_binary(treated_probability, treatment)?;
    let weights = treatment
        .iter()
        .zip(treated_probability)
        .map(|(&t, &e)| if t == 1 { 1.0 - e } else { e })
        .collect();
    Ok(WeightVector::new(weights, Scheme::Overlap))
}

/// Weights of one for every sample.
pub fn unit_weights(n: usize) -> WeightVector {
    WeightVector::new(vec![1.0; n], Scheme::Unit)
}

fn check_binary(treated_probability: &[f64], treatment: &[u8]) -> Result<()> {
    if treated_probability.len() != treatment.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} treatment labels",
            treated_probability.len(),
            treatment.len()
        )));
    }
    for (i, &e) in treated_probability.iter().enumerate() {
        check_probability(e, "treated probability", i)?;
    }
    if let Some(&bad) = treatment.iter().find(|&&t| t > 1) {
        return Err(Error::TreatmentCoding(format!(
            "label {bad} in a binary-only scheme"
        )));
    }
    Ok(())
}

/// Coefficient of variation (population standard deviation over mean)
/// of a weight vector. The dispersion summary used to compare schemes.
pub fn cv_of_weights(weights: &WeightVector) -> Result<f64> {
    let w = &weights.weights;
    if w.is_empty() {
        return Err(Error::InsufficientData(
            "coefficient of variation of zero weights".into(),
        ));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::DegenerateWeights(format!(
            "weight[{i}] = {} is not positive and finite",
            w[i]
        )));
    }
    Ok(population_cv(w))
}

/// Population coefficient of variation of an already-validated
/// positive slice. Constant input gives exactly zero, so exact-tie
/// comparisons between schemes stay meaningful.
pub fn population_cv(w: &[f64]) -> f64 {
    if w.iter().all(|v| *v == w[0]) {
        return 0.0;
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Builds weights for one scheme from the propensity fits at hand.
///
/// The balance-objective scheme draws its probabilities from the CBPS fit
/// and every other scheme from the likelihood fit, so passing the same
/// fits to every call keeps schemes comparable within a replication.
pub fn weights_for_scheme(
    scheme: Scheme,
    logistic: &PropensityFit,
    cbps: Option<&PropensityFit>,
    treatment: &[u8],
) -> Result<WeightVector> {
    match scheme {
        Scheme::Dfw => dfw_weights(&logistic.probabilities, treatment),
        Scheme::Ipw => ipw_weights(&logistic.treated_probability(), treatment),
        Scheme::Overlap => overlap_weights(&logistic.treated_probability(), treatment),
        Scheme::Cbps => {
            let fit = cbps.ok_or_else(|| {
                Error::Config("balance-objective scheme requested without a CBPS fit".into())
            })?;
            let w = ipw_weights(&fit.treated_probability(), treatment)?;
            Ok(WeightVector::new(w.weights, Scheme::Cbps))
        }
        Scheme::Unit => Ok(unit_weights(treatment.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn dfw_binary_hand_values() {
        let probs = dmatrix![0.2, 0.8; 0.9, 0.1; 0.5, 0.5];
        let w = dfw_weights(&probs, &[1, 0, 1]).unwrap();
        assert_eq!(w.scheme, Scheme::Dfw);
        assert_abs_diff_eq!(w.weights[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dfw_three_arm_hand_values() {
        let probs = dmatrix![0.2, 0.3, 0.5; 0.6, 0.3, 0.1];
        let w = dfw_weights(&probs, &[2, 0]).unwrap();
        assert_abs_diff_eq!(w.weights[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[1], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn ipw_hand_values() {
        let w = ipw_weights(&[0.25, 0.25], &[1, 0]).unwrap();
        assert_abs_diff_eq!(w.weights[0], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[1], 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn overlap_hand_values() {
        let w = overlap_weights(&[0.25, 0.25], &[1, 0]).unwrap();
        assert_abs_diff_eq!(w.weights[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(w.weights[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn boundary_probabilities_rejected() {
        assert!(ipw_weights(&[0.0], &[1]).is_err());
        assert!(ipw_weights(&[1.0], &[0]).is_err());
        assert!(overlap_weights(&[f64::NAN], &[0]).is_err());
        let probs = dmatrix![1.0, 0.0];
        assert!(dfw_weights(&probs, &[1]).is_err());
    }

    #[test]
    fn label_outside_columns_rejected() {
        let probs = dmatrix![0.2, 0.8];
        assert!(matches!(
            dfw_weights(&probs, &[2]),
            Err(Error::TreatmentCoding(_))
        ));
        assert!(matches!(
            ipw_weights(&[0.5], &[2]),
            Err(Error::TreatmentCoding(_))
        ));
    }

    #[test]
    fn cv_hand_value() {
        let w = WeightVector::new(vec![1.0, 3.0], Scheme::Unit);
        assert_abs_diff_eq!(cv_of_weights(&w).unwrap(), 0.5, epsilon = 1e-15);
        let u = unit_weights(10);
        assert_abs_diff_eq!(cv_of_weights(&u).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cv_rejects_nonpositive() {
        let w = WeightVector::new(vec![1.0, 0.0], Scheme::Unit);
        assert!(cv_of_weights(&w).is_err());
    }

    #[test]
    fn cbps_scheme_requires_cbps_fit() {
        let fit = PropensityFit {
            coefficients: nalgebra::dvector![0.0],
            probabilities: dmatrix![0.5, 0.5; 0.5, 0.5],
            estimator: crate::data::PropensityEstimator::Logistic,
            probability_floor: 1e-6,
        };
        let err = weights_for_scheme(Scheme::Cbps, &fit, None, &[0, 1]);
        assert!(matches!(err, Err(Error::Config(_))));
        let ok = weights_for_scheme(Scheme::Cbps, &fit, Some(&fit), &[0, 1]).unwrap();
        assert_eq!(ok.scheme, Scheme::Cbps);
        assert_eq!(ok.weights, vec![2.0, 2.0]);
    }

    proptest! {
        // Bounds that define each scheme, over random valid inputs.
        #[test]
        fn dfw_weights_lie_in_open_unit_interval(
            rows in prop::collection::vec((1e-9f64..1.0, 1e-9f64..1.0, 1e-9f64..1.0), 1..60),
            labels in prop::collection::vec(0u8..3, 60),
        ) {
            let n = rows.len();
            let probs = DMatrix::from_fn(n, 3, |i, j| {
                let (a, b, c) = rows[i];
                let s = a + b + c;
                [a / s, b / s, c / s][j]
            });
            let t: Vec<u8> = labels[..n].to_vec();
            let w = dfw_weights(&probs, &t).unwrap();
            for v in &w.weights {
                prop_assert!(*v > 0.0 && *v < 1.0);
            }
        }

        #[test]
        fn ipw_weights_are_at_least_one(
            es in prop::collection::vec(1e-9f64..1.0, 1..60),
            labels in prop::collection::vec(0u8..2, 60),
        ) {
            let es: Vec<f64> = es.into_iter().filter(|e| *e < 1.0).collect();
            prop_assume!(!es.is_empty());
            let t: Vec<u8> = labels[..es.len()].to_vec();
            let w = ipw_weights(&es, &t).unwrap();
            for v in &w.weights {
                prop_assert!(*v >= 1.0);
            }
        }

        // In the binary case the deconfounding factor and overlap weights
        // coincide sample by sample.
        #[test]
        fn dfw_equals_overlap_in_binary_case(
            es in prop::collection::vec(1e-9f64..1.0, 1..60),
            labels in prop::collection::vec(0u8..2, 60),
        ) {
            let es: Vec<f64> = es.into_iter().filter(|e| *e < 1.0).collect();
            prop_assume!(!es.is_empty());
            let n = es.len();
            let t: Vec<u8> = labels[..n].to_vec();
            let probs = DMatrix::from_fn(n, 2, |i, j| if j == 1 { es[i] } else { 1.0 - es[i] });
            let d = dfw_weights(&probs, &t).unwrap();
            let o = overlap_weights(&es, &t).unwrap();
            for i in 0..n {
                prop_assert!((d.weights[i] - o.weights[i]).abs() <= 1e-15);
            }
        }

        // Scaling invariance of the dispersion summary.
        #[test]
        fn cv_is_scale_invariant(
            ws in prop::collection::vec(1e-6f64..1e3, 2..40),
            scale in 1e-3f64..1e3,
        ) {
            let a = WeightVector::new(ws.clone(), Scheme::Unit);
            let b = WeightVector::new(ws.iter().map(|w| w * scale).collect(), Scheme::Unit);
            let ca = cv_of_weights(&a).unwrap();
            let cb = cv_of_weights(&b).unwrap();
            prop_assert!((ca - cb).abs() <= 1e-9 * (1.0 + ca.abs()));
        }
    }
}
