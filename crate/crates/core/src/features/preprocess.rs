//! Fitted feature preprocessing.
//!
//! Most feature distributions here are heavily right-skewed, so each such
//! feature is reshaped with a Yeo-Johnson power transform (the family handles
//! the zeros that citation counts contain) and then standardized. The year
//! and percent-not-cited features are min-max scaled to [0, 1] instead.
//! All statistics are fitted on training data only; targets are transformed
//! for training and inverted before metrics are computed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureConfigName, Sample};

const LAMBDA_LO: f64 = -5.0;
const LAMBDA_HI: f64 = 5.0;
const LAMBDA_TOL: f64 = 1e-4;

/// Yeo-Johnson transform of a single value.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            x.ln_1p()
        } else {
            (lambda * x.ln_1p()).exp_m1() / lambda
        }
    } else if lambda == 2.0 {
        -(-x).ln_1p()
    } else {
        -((2.0 - lambda) * (-x).ln_1p()).exp_m1() / (2.0 - lambda)
    }
}

/// Inverse of [`yeo_johnson`].
pub fn yeo_johnson_inverse(y: f64, lambda: f64) -> f64 {
    if y >= 0.0 {
        if lambda == 0.0 {
            y.exp_m1()
        } else {
            ((lambda * y).ln_1p() / lambda).exp_m1()
        }
    } else if lambda == 2.0 {
        -(-y).exp_m1()
    } else {
        -(((lambda - 2.0) * y).ln_1p() / (2.0 - lambda)).exp_m1()
    }
}

/// Gaussian log-likelihood of the data under a Yeo-Johnson transform with
/// parameter `lambda`, up to constants.
fn yeo_johnson_log_likelihood(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let transformed: Vec<f64> = values.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let mean = transformed.iter().sum::<f64>() / n;
    let variance = transformed.iter().map(|&t| (t - mean).powi(2)).sum::<f64>() / n;
    if !variance.is_finite() || variance <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = values
        .iter()
        .map(|&x| x.signum() * x.abs().ln_1p())
        .sum::<f64>();
    -0.5 * n * variance.ln() + (lambda - 1.0) * jacobian
}

/// Fits the power parameter by golden-section search of the transform
/// log-likelihood over [-5, 5].
pub fn fit_power_lambda(values: &[f64]) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut lo = LAMBDA_LO;
    let mut hi = LAMBDA_HI;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = yeo_johnson_log_likelihood(values, c);
    let mut fd = yeo_johnson_log_likelihood(values, d);
    while hi - lo > LAMBDA_TOL {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = yeo_johnson_log_likelihood(values, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = yeo_johnson_log_likelihood(values, d);
        }
    }
    (lo + hi) / 2.0
}

/// A fitted per-feature transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedTransform {
    /// Scale to [0, 1] over the training range. A degenerate range maps
    /// everything to 0.5.
    MinMax { lo: f64, hi: f64 },
    /// Yeo-Johnson transform followed by standardization.
    Power { lambda: f64, mean: f64, std: f64 },
}

impl FittedTransform {
    fn fit_min_max(values: &[f64]) -> FittedTransform {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        FittedTransform::MinMax { lo, hi }
    }

    fn fit_power(values: &[f64]) -> FittedTransform {
        let lambda = fit_power_lambda(values);
        let n = values.len() as f64;
        let transformed: Vec<f64> = values.iter().map(|&x| yeo_johnson(x, lambda)).collect();
        let mean = transformed.iter().sum::<f64>() / n;
        let variance = transformed.iter().map(|&t| (t - mean).powi(2)).sum::<f64>() / n;
        if variance.is_finite() && variance > 0.0 {
            FittedTransform::Power {
                lambda,
                mean,
                std: variance.sqrt(),
            }
        } else {
            // Constant feature: identity transform, zero after centering.
            let mean = values.iter().sum::<f64>() / n;
            FittedTransform::Power {
                lambda: 1.0,
                mean,
                std: 1.0,
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            FittedTransform::MinMax { lo, hi } => {
                if hi > lo {
                    (x - lo) / (hi - lo)
                } else {
                    0.5
                }
            }
            FittedTransform::Power { lambda, mean, std } => (yeo_johnson(x, lambda) - mean) / std,
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match *self {
            FittedTransform::MinMax { lo, hi } => {
                if hi > lo {
                    lo + y * (hi - lo)
                } else {
                    lo
                }
            }
            FittedTransform::Power { lambda, mean, std } => {
                yeo_johnson_inverse(y * std + mean, lambda)
            }
        }
    }
}

/// Per-feature transforms fitted on a training sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub config_name: FeatureConfigName,
    pub window_len: usize,
    inputs: Vec<FittedTransform>,
    target: FittedTransform,
}

impl Preprocessor {
    /// Fits one transform per input feature and one for the target, pooling
    /// values across samples and window positions.
    pub fn fit(train_samples: &[Sample], config: &FeatureConfig) -> Result<Self> {
        let first = train_samples.first().ok_or_else(|| {
            Error::InvalidConfig("cannot fit a preprocessor on an empty sample set".into())
        })?;
        let n_features = config.inputs.len();
        if first.n_features() != n_features {
            return Err(Error::ShapeMismatch {
                expected: format!("{n_features} features"),
                actual: format!("{}", first.n_features()),
            });
        }
        let window_len = first.window_len();

        let mut inputs = Vec::with_capacity(n_features);
        let mut column = Vec::with_capacity(train_samples.len() * window_len);
        for (idx, feature) in config.inputs.iter().enumerate() {
            column.clear();
            for sample in train_samples {
                for row in &sample.inputs {
                    column.push(row[idx]);
                }
            }
            inputs.push(if feature.uses_min_max() {
                FittedTransform::fit_min_max(&column)
            } else {
                FittedTransform::fit_power(&column)
            });
        }

        let targets: Vec<f64> = train_samples.iter().map(|s| s.target).collect();
        let target = if config.target.uses_min_max() {
            FittedTransform::fit_min_max(&targets)
        } else {
            FittedTransform::fit_power(&targets)
        };

        Ok(Self {
            config_name: config.name,
            window_len,
            inputs,
            target,
        })
    }

    pub fn input_transforms(&self) -> &[FittedTransform] {
        &self.inputs
    }

    pub fn target_transform(&self) -> &FittedTransform {
        &self.target
    }

    /// Transforms an input window in place-compatible copy form.
    pub fn apply_inputs(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        inputs
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.inputs)
                    .map(|(&v, t)| t.apply(v))
                    .collect()
            })
            .collect()
    }

    pub fn transform_target(&self, value: f64) -> f64 {
        self.target.apply(value)
    }

    /// Maps a model output back to the raw target scale.
    pub fn invert_target(&self, value: f64) -> f64 {
        self.target.invert(value)
    }

    /// Returns transformed copies of `samples` (inputs and target).
    pub fn apply(&self, samples: &[Sample]) -> Vec<Sample> {
        samples
            .iter()
            .map(|sample| Sample {
                journal_id: sample.journal_id.clone(),
                window_years: sample.window_years.clone(),
                inputs: self.apply_inputs(&sample.inputs),
                target: self.transform_target(sample.target),
                target_year: sample.target_year,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn lambda_near_one_for_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..4000).map(|_| normal.sample(&mut rng)).collect();
        let lambda = fit_power_lambda(&values);
        assert!(
            (lambda - 1.0).abs() <= 0.1,
            "expected lambda near 1, got {lambda}"
        );
    }

    #[test]
    fn min_max_midpoint_is_half() {
        let transform = FittedTransform::fit_min_max(
            &(2000..=2020).map(|y| y as f64).collect::<Vec<_>>(),
        );
        assert_eq!(transform.apply(2010.0), 0.5);
        assert_eq!(transform.apply(2000.0), 0.0);
        assert_eq!(transform.apply(2020.0), 1.0);
    }

    #[test]
    fn min_max_does_not_clip_out_of_range() {
        let transform = FittedTransform::MinMax { lo: 0.0, hi: 10.0 };
        assert!(transform.apply(15.0) > 1.0);
        assert!(transform.apply(-5.0) < 0.0);
    }

    #[test]
    fn constant_min_max_maps_to_half() {
        let transform = FittedTransform::fit_min_max(&[7.0, 7.0, 7.0]);
        assert_eq!(transform.apply(7.0), 0.5);
    }

    #[test]
    fn constant_power_feature_maps_to_zero() {
        let transform = FittedTransform::fit_power(&[3.0, 3.0, 3.0, 3.0]);
        assert_eq!(transform.apply(3.0), 0.0);
        match transform {
            FittedTransform::Power { lambda, std, .. } => {
                assert_eq!(lambda, 1.0);
                assert_eq!(std, 1.0);
            }
            _ => panic!("expected power transform"),
        }
    }

    /// Two-pass sample skewness, implemented independently of the transform
    /// code as the oracle for the skew-reduction check.
    fn skewness(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        m3 / m2.powf(1.5)
    }

    #[test]
    fn power_transform_halves_lognormal_skewness() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.2).unwrap();
        let values: Vec<f64> = (0..4000)
            .map(|_| f64::exp(normal.sample(&mut rng)) * 50.0)
            .collect();
        let before = skewness(&values);
        let transform = FittedTransform::fit_power(&values);
        let after: Vec<f64> = values.iter().map(|&v| transform.apply(v)).collect();
        let after_skew = skewness(&after);
        assert!(
            after_skew.abs() < 0.5 * before.abs(),
            "skewness {before} only reduced to {after_skew}"
        );
    }

    #[test]
    fn round_trip_of_random_positive_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let values: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 5000.0 + 0.01).collect();
        let transform = FittedTransform::fit_power(&values);
        let mut worst: f64 = 0.0;
        for &v in &values {
            let back = transform.invert(transform.apply(v));
            worst = worst.max((back - v).abs() / v.abs().max(1e-12));
        }
        assert!(worst < 1e-9, "round-trip relative error {worst}");
    }

    #[test]
    fn preprocessor_transforms_and_inverts_targets() {
        let config = FeatureConfigName::CitationsBasic.config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Sample> = (0..50)
            .map(|i| {
                let rows: Vec<Vec<f64>> = (0..3)
                    .map(|_| {
                        vec![
                            2010.0 + (i % 10) as f64,
                            rng.random::<f64>() * 100.0,
                            rng.random::<f64>() * 4000.0,
                            rng.random::<f64>() * 300.0,
                        ]
                    })
                    .collect();
                Sample {
                    journal_id: format!("J{i}"),
                    window_years: vec![2015, 2016, 2017],
                    inputs: rows,
                    target: rng.random::<f64>() * 4000.0,
                    target_year: 2018,
                }
            })
            .collect();
        let pre = Preprocessor::fit(&samples, &config).unwrap();
        let transformed = pre.apply(&samples);
        for (raw, cooked) in samples.iter().zip(&transformed) {
            let back = pre.invert_target(cooked.target);
            let rel = (back - raw.target).abs() / raw.target.abs().max(1e-12);
            assert!(rel < 1e-9);
        }
        // Year column is min-max scaled into [0, 1].
        for s in &transformed {
            for row in &s.inputs {
                assert!((0.0..=1.0).contains(&row[0]));
            }
        }
    }

    #[test]
    fn fit_rejects_empty_samples() {
        let config = FeatureConfigName::CitationsBasic.config();
        assert!(Preprocessor::fit(&[], &config).is_err());
    }

    proptest! {
        // Lambda is kept to the range the likelihood fit lands in for real
        // feature distributions; at extreme |lambda| the transform saturates
        // below f64 resolution for large inputs.
        #[test]
        fn yeo_johnson_is_strictly_monotone(
            a in -1e3f64..1e3,
            b in -1e3f64..1e3,
            lambda in -2.0f64..2.0,
        ) {
            prop_assume!((a - b).abs() > 1e-2);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(yeo_johnson(lo, lambda) < yeo_johnson(hi, lambda));
        }

        #[test]
        fn yeo_johnson_round_trips(x in -1e3f64..1e3, lambda in -2.0f64..2.0) {
            let back = yeo_johnson_inverse(yeo_johnson(x, lambda), lambda);
            let rel = (back - x).abs() / x.abs().max(1.0);
            prop_assert!(rel < 1e-9, "x {} lambda {} -> {}", x, lambda, back);
        }
    }
}
