//! Heuristic prediction baselines over a univariate annual series.
//!
//! All three baselines read a chronologically ordered series `v_1..v_n` and
//! predict the next value. The delta variants extrapolate from year-to-year
//! differences; the published description of those formulas prints sums
//! inside the parenthesized terms, which would not reproduce a linear trend,
//! so the difference form is the default and the printed form stays
//! available behind [`DeltaVariant::PrintedSum`] for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights applied to the last four differences, most recent first.
pub const WEIGHTED_DELTA_WEIGHTS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

/// Which reading of the delta formulas to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaVariant {
    /// Differences between consecutive elements (linear extrapolation).
    #[default]
    Difference,
    /// The formulas exactly as printed, with sums in place of differences.
    PrintedSum,
}

fn require_len(series: &[f64], needed: usize) -> Result<()> {
    if series.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            actual: series.len(),
        });
    }
    Ok(())
}

/// Repeats the final known value.
pub fn persistence_predict(series: &[f64]) -> Result<f64> {
    require_len(series, 1)?;
    Ok(series[series.len() - 1])
}

/// Adds the last year-to-year change to the final value.
pub fn delta_predict(series: &[f64]) -> Result<f64> {
    delta_predict_variant(series, DeltaVariant::Difference)
}

pub fn delta_predict_variant(series: &[f64], variant: DeltaVariant) -> Result<f64> {
    require_len(series, 2)?;
    let n = series.len();
    let (last, prev) = (series[n - 1], series[n - 2]);
    Ok(match variant {
        DeltaVariant::Difference => last + (last - prev),
        DeltaVariant::PrintedSum => last + (last + prev) / 2.0,
    })
}

/// Adds a weighted sum of the last four year-to-year changes to the final
/// value. Weights decrease monotonically from the most recent year.
pub fn weighted_delta_predict(series: &[f64]) -> Result<f64> {
    weighted_delta_predict_variant(series, DeltaVariant::Difference)
}

pub fn weighted_delta_predict_variant(series: &[f64], variant: DeltaVariant) -> Result<f64> {
    require_len(series, 5)?;
    let n = series.len();
    let mut prediction = series[n - 1];
    for (i, w) in WEIGHTED_DELTA_WEIGHTS.iter().enumerate() {
        let newer = series[n - 1 - i];
        let older = series[n - 2 - i];
        prediction += match variant {
            DeltaVariant::Difference => w * (newer - older),
            DeltaVariant::PrintedSum => w * (newer + older),
        };
    }
    Ok(prediction)
}

/// Baseline families exposed as model choices in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Persistence,
    Delta,
    WeightedDelta,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Persistence,
        BaselineKind::Delta,
        BaselineKind::WeightedDelta,
    ];

    /// Minimum series length the baseline needs.
    pub fn min_history(self) -> usize {
        match self {
            BaselineKind::Persistence => 1,
            BaselineKind::Delta => 2,
            BaselineKind::WeightedDelta => 5,
        }
    }

    pub fn predict(self, series: &[f64]) -> Result<f64> {
        match self {
            BaselineKind::Persistence => persistence_predict(series),
            BaselineKind::Delta => delta_predict(series),
            BaselineKind::WeightedDelta => weighted_delta_predict(series),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Persistence => "persistence",
            BaselineKind::Delta => "delta",
            BaselineKind::WeightedDelta => "weighted_delta",
        }
    }
}
