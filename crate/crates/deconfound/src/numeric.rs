//! Small numeric helpers shared across modules.

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + exp(z)) without overflow at either tail.
pub fn ln1pexp(z: f64) -> f64 {
    if z > 33.0 {
        // exp(-z) < 5e-15 here, the first-order tail term suffices.
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Neumaier-compensated sum; exact to one final rounding.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated arithmetic mean.
pub fn compensated_mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigmoid_matches_definition_and_saturates_cleanly() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(1.0), 1.0 / (1.0 + (-1.0f64).exp()), epsilon = 1e-16);
        assert_abs_diff_eq!(sigmoid(-3.0), 1.0 - sigmoid(3.0), epsilon = 1e-15);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn ln1pexp_is_accurate_across_ranges() {
        for &z in &[-50.0f64, -5.0, 0.0, 5.0, 30.0] {
            let direct = (1.0 + z.exp()).ln();
            assert_abs_diff_eq!(ln1pexp(z), direct, epsilon = 1e-12);
        }
        // Far positive tail: ln(1 + e^z) = z + ln(1 + e^-z) ~ z.
        assert_abs_diff_eq!(ln1pexp(100.0), 100.0, epsilon = 1e-12);
        assert!(ln1pexp(800.0).is_finite());
    }

    #[test]
    fn compensated_mean_of_constant_is_exact() {
        let v = vec![2.0; 1500];
        assert_eq!(compensated_mean(&v), 2.0);
        let v = vec![0.3; 1500];
        assert_eq!(compensated_mean(&v), 0.3);
        let v = vec![0.1; 999];
        assert_eq!(compensated_mean(&v), 0.1);
    }

    #[test]
    fn compensated_sum_beats_cancellation() {
        let vals = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(&vals), 1.0);
    }
}
