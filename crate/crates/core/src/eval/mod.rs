//! Error metrics, bucketized reports, k-fold partitioning and
//! error-reduction comparisons. Grid search lives in [`grid`].

pub mod grid;

pub use grid::{grid_search, model_grid, GridEntry, GridSearchOutcome, GridSearchSpec, Task};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Buckets with fewer samples than this are flagged low-confidence.
pub const LOW_CONFIDENCE_BUCKET: usize = 20;

/// The five summary metrics plus bookkeeping counts.
///
/// MAPE and MedAPE are computed over nonzero ground truths only, with the
/// exclusion count reported. Metrics whose denominator vanishes (all-zero
/// targets for MAPE, constant targets for the coefficient of determination)
/// are reported as undefined rather than a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub medae: f64,
    pub mape: Option<f64>,
    pub medape: Option<f64>,
    pub r2: Option<f64>,
    pub n_samples: usize,
    pub n_excluded_from_mape: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Computes the metric set on raw-scale predictions and ground truths.
pub fn compute_metrics(preds: &[f64], targets: &[f64]) -> Result<MetricSet> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::InvalidConfig(format!(
            "metrics require equal nonempty lengths, got {} and {}",
            preds.len(),
            targets.len()
        )));
    }
    let n = preds.len();
    let mut abs_errors: Vec<f64> = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .collect();
    let mae = abs_errors.iter().sum::<f64>() / n as f64;
    abs_errors.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let medae = median(&abs_errors);

    let mut apes: Vec<f64> = Vec::with_capacity(n);
    for (p, t) in preds.iter().zip(targets) {
        if *t != 0.0 {
            apes.push(100.0 * (p - t).abs() / t.abs());
        }
    }
    let n_excluded = n - apes.len();
    let (mape, medape) = if apes.is_empty() {
        (None, None)
    } else {
        let mape = apes.iter().sum::<f64>() / apes.len() as f64;
        apes.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        (Some(mape), Some(median(&apes)))
    };

    let target_mean = targets.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - target_mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        let ss_res: f64 = preds
            .iter()
            .zip(targets)
            .map(|(p, t)| (t - p).powi(2))
            .sum();
        Some(1.0 - ss_res / ss_tot)
    } else {
        None
    };

    Ok(MetricSet {
        mae,
        medae,
        mape,
        medape,
        r2,
        n_samples: n,
        n_excluded_from_mape: n_excluded,
    })
}

/// Metrics for one ground-truth interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// `None` for empty buckets.
    pub metrics: Option<MetricSet>,
    pub low_confidence: bool,
}

/// Per-bucket breakdown of prediction errors by ground-truth value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub edges: Vec<f64>,
    pub buckets: Vec<BucketMetrics>,
    /// Samples whose ground truth fell outside `[edges.first, edges.last)`.
    pub n_out_of_range: usize,
}

/// Assigns each sample to the half-open bucket `[edge_i, edge_{i+1})`
/// containing its ground truth and computes per-bucket metrics.
pub fn bucketize_errors(preds: &[f64], targets: &[f64], edges: &[f64]) -> Result<BucketReport> {
    if edges.len() < 2 {
        return Err(Error::InvalidConfig("need at least two bucket edges".into()));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidConfig(
            "bucket edges must be finite and strictly ascending".into(),
        ));
    }
    if preds.len() != targets.len() {
        return Err(Error::InvalidConfig(
            "bucketize requires equal-length predictions and targets".into(),
        ));
    }
    let n_buckets = edges.len() - 1;
    let mut members: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n_buckets];
    let mut out_of_range = 0usize;
    for (p, t) in preds.iter().zip(targets) {
        if *t < edges[0] || *t >= edges[n_buckets] {
            out_of_range += 1;
            continue;
        }
        // Rightmost edge <= t; a value exactly on an interior edge belongs
        // to the bucket starting there.
        let idx = match edges.binary_search_by(|e| e.partial_cmp(t).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        members[idx].0.push(*p);
        members[idx].1.push(*t);
    }

    let buckets = members
        .into_iter()
        .enumerate()
        .map(|(i, (p, t))| {
            let n = p.len();
            let metrics = if n > 0 {
                Some(compute_metrics(&p, &t).expect("nonempty bucket"))
            } else {
                None
            };
            BucketMetrics {
                lo: edges[i],
                hi: edges[i + 1],
                n,
                metrics,
                low_confidence: n < LOW_CONFIDENCE_BUCKET,
            }
        })
        .collect();

    Ok(BucketReport {
        edges: edges.to_vec(),
        buckets,
        n_out_of_range: out_of_range,
    })
}

/// Deterministically shuffles `0..n` into `k` disjoint folds whose sizes
/// differ by at most one. Fold contents are sorted for stable iteration.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = n / k;
    let remainder = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for fold_idx in 0..k {
        let size = base + usize::from(fold_idx < remainder);
        let mut fold: Vec<usize> = indices[cursor..cursor + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        cursor += size;
    }
    Ok(folds)
}

/// Percentage reductions in MAE and MAPE relative to a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReduction {
    pub mae_reduction_pct: f64,
    pub mape_reduction_pct: f64,
}

pub fn error_reduction(model: &MetricSet, baseline: &MetricSet) -> Result<ErrorReduction> {
    if baseline.mae == 0.0 {
        return Err(Error::UndefinedMetric(
            "baseline MAE is zero; reduction undefined".into(),
        ));
    }
    let (model_mape, baseline_mape) = match (model.mape, baseline.mape) {
        (Some(m), Some(b)) if b != 0.0 => (m, b),
        _ => {
            return Err(Error::UndefinedMetric(
                "MAPE undefined or zero; reduction undefined".into(),
            ))
        }
    };
    Ok(ErrorReduction {
        mae_reduction_pct: 100.0 * (baseline.mae - model.mae) / baseline.mae,
        mape_reduction_pct: 100.0 * (baseline_mape - model_mape) / baseline_mape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn perfect_predictions() {
        let t = [5.0, 10.0, 20.0];
        let m = compute_metrics(&t, &t).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.mape, Some(0.0));
        assert_eq!(m.r2, Some(1.0));
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let targets = [1.0, 2.0, 3.0, 6.0];
        let mean = targets.iter().sum::<f64>() / 4.0;
        let preds = [mean; 4];
        let m = compute_metrics(&preds, &targets).unwrap();
        assert_eq!(m.r2, Some(0.0));
    }

    #[test]
    fn hand_computed_example() {
        let targets = [100.0, 200.0];
        let preds = [110.0, 180.0];
        let m = compute_metrics(&preds, &targets).unwrap();
        assert_eq!(m.mae, 15.0);
        assert_eq!(m.mape, Some(10.0));
        assert_eq!(m.r2, Some(0.9));
        assert_eq!(m.medae, 15.0); // even length: mean of middle two
    }

    #[test]
    fn zero_targets_leave_mape_undefined() {
        let m = compute_metrics(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.n_excluded_from_mape, 2);
    }

    #[test]
    fn constant_targets_leave_r2_undefined() {
        let m = compute_metrics(&[1.0, 2.0], &[5.0, 5.0]).unwrap();
        assert_eq!(m.r2, None);
        assert!(m.mape.is_some());
    }

    #[test]
    fn mape_excludes_only_zero_targets() {
        let m = compute_metrics(&[1.0, 2.0, 33.0], &[0.0, 4.0, 30.0]).unwrap();
        assert_eq!(m.n_excluded_from_mape, 1);
        // (50% + 10%) / 2
        assert!((m.mape.unwrap() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_mae_is_weighted_mean_of_bucket_maes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let targets: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 1000.0).collect();
        let preds: Vec<f64> = targets
            .iter()
            .map(|t| t + rng.random::<f64>() * 40.0 - 20.0)
            .collect();
        let edges: Vec<f64> = (0..=10).map(|i| i as f64 * 100.0).collect();
        let report = bucketize_errors(&preds, &targets, &edges).unwrap();
        let pooled = compute_metrics(&preds, &targets).unwrap();
        let mut weighted = 0.0;
        let mut count = 0usize;
        for bucket in &report.buckets {
            if let Some(m) = &bucket.metrics {
                weighted += m.mae * bucket.n as f64;
                count += bucket.n;
            }
        }
        assert_eq!(count, 500);
        assert!((weighted / 500.0 - pooled.mae).abs() < 1e-9);
    }

    #[test]
    fn r2_is_invariant_under_common_shift() {
        let targets = [3.0, 9.0, 4.0, 7.0];
        let preds = [2.5, 8.0, 5.0, 7.5];
        let r2 = compute_metrics(&preds, &targets).unwrap().r2.unwrap();
        let shifted_t: Vec<f64> = targets.iter().map(|t| t + 42.0).collect();
        let shifted_p: Vec<f64> = preds.iter().map(|p| p + 42.0).collect();
        let r2_shifted = compute_metrics(&shifted_p, &shifted_t).unwrap().r2.unwrap();
        assert!((r2 - r2_shifted).abs() < 1e-12);
    }

    #[test]
    fn ten_equal_buckets() {
        let edges: Vec<f64> = (0..=10).map(|i| i as f64 * 100.0).collect();
        let targets = [50.0, 150.0, 999.0];
        let preds = [60.0, 140.0, 1000.0];
        let report = bucketize_errors(&preds, &targets, &edges).unwrap();
        assert_eq!(report.buckets.len(), 10);
        assert_eq!(report.buckets[0].n, 1);
        assert_eq!(report.buckets[1].n, 1);
        assert_eq!(report.buckets[9].n, 1);
        assert!(report.buckets[0].low_confidence);
    }

    #[test]
    fn interior_edge_goes_right() {
        let edges = [0.0, 100.0, 200.0];
        let report = bucketize_errors(&[1.0], &[100.0], &edges).unwrap();
        assert_eq!(report.buckets[0].n, 0);
        assert_eq!(report.buckets[1].n, 1);
    }

    #[test]
    fn out_of_range_samples_are_counted() {
        let edges = [0.0, 100.0];
        let report = bucketize_errors(&[1.0, 2.0, 3.0], &[-5.0, 50.0, 100.0], &edges).unwrap();
        assert_eq!(report.n_out_of_range, 2);
        assert_eq!(report.buckets[0].n, 1);
    }

    #[test]
    fn uniform_targets_fill_buckets_evenly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let targets: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 1000.0).collect();
        let preds = vec![0.0; n];
        let edges: Vec<f64> = (0..=10).map(|i| i as f64 * 100.0).collect();
        let report = bucketize_errors(&preds, &targets, &edges).unwrap();
        // Direct counting oracle.
        for (i, bucket) in report.buckets.iter().enumerate() {
            let lo = i as f64 * 100.0;
            let hi = lo + 100.0;
            let direct = targets.iter().filter(|t| **t >= lo && **t < hi).count();
            assert_eq!(bucket.n, direct);
            let expected = n as f64 / 10.0;
            assert!(
                (bucket.n as f64 - expected).abs() < 0.05 * expected,
                "bucket {i} count {} deviates more than 5% from {expected}",
                bucket.n
            );
        }
    }

    #[test]
    fn kfold_sizes() {
        let folds = kfold_split(100, 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));
        let folds = kfold_split(101, 10, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10, 10, 10, 10, 11]);
    }

    #[test]
    fn kfold_is_deterministic_and_partitions() {
        let a = kfold_split(57, 7, 99).unwrap();
        let b = kfold_split(57, 7, 99).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_rejects_bad_input() {
        assert!(kfold_split(5, 1, 0).is_err());
        assert!(kfold_split(3, 4, 0).is_err());
    }

    #[test]
    fn error_reduction_paper_inputs() {
        let model = MetricSet {
            mae: 246.787,
            medae: 0.0,
            mape: Some(9.51),
            medape: None,
            r2: None,
            n_samples: 1,
            n_excluded_from_mape: 0,
        };
        let baseline = MetricSet {
            mae: 426.141,
            medae: 0.0,
            mape: Some(12.53),
            medape: None,
            r2: None,
            n_samples: 1,
            n_excluded_from_mape: 0,
        };
        let red = error_reduction(&model, &baseline).unwrap();
        assert!((red.mae_reduction_pct - 42.1).abs() < 0.05);
        assert!((red.mape_reduction_pct - 24.1).abs() < 0.05);
    }

    #[test]
    fn error_reduction_identity_is_zero() {
        let m = MetricSet {
            mae: 3.0,
            medae: 1.0,
            mape: Some(5.0),
            medape: Some(4.0),
            r2: Some(0.5),
            n_samples: 10,
            n_excluded_from_mape: 0,
        };
        let red = error_reduction(&m, &m).unwrap();
        assert_eq!(red.mae_reduction_pct, 0.0);
        assert_eq!(red.mape_reduction_pct, 0.0);
    }

    #[test]
    fn error_reduction_zero_baseline_is_undefined() {
        let mut baseline = MetricSet {
            mae: 0.0,
            medae: 0.0,
            mape: Some(5.0),
            medape: None,
            r2: None,
            n_samples: 1,
            n_excluded_from_mape: 0,
        };
        let model = baseline.clone();
        assert!(error_reduction(&model, &baseline).is_err());
        baseline.mae = 1.0;
        let mut no_mape = baseline.clone();
        no_mape.mape = None;
        assert!(error_reduction(&no_mape, &baseline).is_err());
    }
}
