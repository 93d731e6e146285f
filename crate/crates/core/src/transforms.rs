//! Pointwise signal conditioning: min-max normalization, sigmoid smoothing and
//! activation, and double-sigmoid clumping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic curve `1 / (1 + exp(-steepness * (x - threshold)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    pub steepness: f64,
    pub threshold: f64,
}

impl SigmoidParams {
    pub const fn new(steepness: f64, threshold: f64) -> Self {
        Self {
            steepness,
            threshold,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64, p: SigmoidParams) -> f64 {
    1.0 / (1.0 + (-p.steepness * (x - p.threshold)).exp())
}

/// Two steepness/threshold pairs of a double sigmoid. `beta` and `lambda`
/// are the lower and upper inflection points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClumpParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl ClumpParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.gamma, self.lambda]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "clump parameters must be finite".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(
                "clump steepnesses must be positive".into(),
            ));
        }
        if self.beta > self.lambda {
            return Err(Error::InvalidParameter(format!(
                "clump thresholds out of order: beta {} > lambda {}",
                self.beta, self.lambda
            )));
        }
        Ok(())
    }

    /// Builds parameters from unordered thresholds, swapping them if needed.
    pub fn sorted(alpha: f64, t1: f64, gamma: f64, t2: f64) -> Self {
        let (beta, lambda) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        Self {
            alpha,
            beta,
            gamma,
            lambda,
        }
    }
}

impl Default for ClumpParams {
    fn default() -> Self {
        Self {
            alpha: 20.0,
            beta: 0.33,
            gamma: 20.0,
            lambda: 0.66,
        }
    }
}

/// Soft discretization: mean of two sigmoids, giving plateaus near 0, 1/2 and 1.
#[inline]
pub fn clump(x: f64, p: ClumpParams) -> f64 {
    0.5 * (sigmoid(x, SigmoidParams::new(p.alpha, p.beta))
        + sigmoid(x, SigmoidParams::new(p.gamma, p.lambda)))
}

/// Maps a series affinely onto `[0, 1]`. A constant series maps to all zeros.
pub fn minmax_normalize(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("series"));
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if range <= 0.0 || !range.is_finite() {
        return Ok(vec![0.0; series.len()]);
    }
    Ok(series.iter().map(|&x| (x - lo) / range).collect())
}

pub fn smooth(series: &[f64], p: SigmoidParams) -> Vec<f64> {
    series.iter().map(|&x| sigmoid(x, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_inflection_and_asymptotes() {
        let p = SigmoidParams::new(7.0, 0.3);
        assert_abs_diff_eq!(sigmoid(0.3, p), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(1e6, p), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(-1e6, p), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_direct_evaluation() {
        // 1 / (1 + e^-3)
        let expected = 1.0 / (1.0 + (-3.0f64).exp());
        assert_abs_diff_eq!(expected, 0.952_574_126_822_433_4, epsilon = 1e-15);
        let got = sigmoid(0.8, SigmoidParams::new(10.0, 0.5));
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn smooth_is_elementwise_sigmoid() {
        let p = SigmoidParams::new(10.0, 0.5);
        let out = smooth(&[0.5, 0.8, 1e6], p);
        assert_abs_diff_eq!(out[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.952_574_126_822_433_4, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn clump_degenerate_merge() {
        let p = ClumpParams::new(12.0, 0.4, 12.0, 0.4).unwrap();
        for &x in &[0.0, 0.2, 0.4, 0.77, 1.0] {
            let single = sigmoid(x, SigmoidParams::new(12.0, 0.4));
            assert_abs_diff_eq!(clump(x, p), single, epsilon = 1e-15);
        }
    }

    #[test]
    fn clump_plateaus_with_steep_sigmoids() {
        let p = ClumpParams::new(80.0, 0.33, 80.0, 0.66).unwrap();
        assert_abs_diff_eq!(clump(0.0, p), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(clump(0.5, p), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(clump(1.0, p), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn clump_rejects_bad_params() {
        assert!(ClumpParams::new(10.0, 0.7, 10.0, 0.2).is_err());
        assert!(ClumpParams::new(0.0, 0.2, 10.0, 0.7).is_err());
        assert!(ClumpParams::new(f64::NAN, 0.2, 10.0, 0.7).is_err());
        let s = ClumpParams::sorted(5.0, 0.9, 6.0, 0.1);
        assert_eq!((s.beta, s.lambda), (0.1, 0.9));
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(
            minmax_normalize(&[2.0, 4.0, 6.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(minmax_normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(minmax_normalize(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(minmax_normalize(&[]), Err(Error::EmptyInput(_))));
    }

    fn clump_params() -> impl Strategy<Value = ClumpParams> {
        (0.1f64..150.0, 0.0f64..1.0, 0.1f64..150.0, 0.0f64..1.0)
            .prop_map(|(a, t1, g, t2)| ClumpParams::sorted(a, t1, g, t2))
    }

    proptest! {
        #[test]
        fn clump_is_monotone_and_bounded(p in clump_params(), x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let (a, b) = (clump(lo, p), clump(hi, p));
            prop_assert!(a <= b);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }

        #[test]
        fn minmax_idempotent_on_unit_span(mut v in prop::collection::vec(0.0f64..1.0, 1..40)) {
            v.push(0.0);
            v.push(1.0);
            let once = minmax_normalize(&v).unwrap();
            prop_assert_eq!(&once, &v);
            let out = minmax_normalize(&once).unwrap();
            prop_assert!(out.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
