//! k-nearest-neighbors regression.
//!
//! Euclidean distance in the preprocessed feature space, unweighted mean of
//! the k nearest targets. Distance ties resolve by training-sample index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub fn fit(rows: &[Vec<f64>], targets: &[f64], k: usize) -> Result<KnnModel> {
    if rows.is_empty() || rows.len() != targets.len() {
        return Err(Error::InvalidConfig(
            "knn requires equal nonempty rows and targets".into(),
        ));
    }
    if k == 0 || k > rows.len() {
        return Err(Error::InvalidConfig(format!(
            "k must be in 1..={}, got {k}",
            rows.len()
        )));
    }
    Ok(KnnModel {
        k,
        points: rows.to_vec(),
        targets: targets.to_vec(),
    })
}

impl KnnModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut distances: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(idx, point)| {
                let d2: f64 = point
                    .iter()
                    .zip(row)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, idx)
            })
            .collect();
        distances.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        distances
            .iter()
            .take(self.k)
            .map(|&(_, idx)| self.targets[idx])
            .sum::<f64>()
            / self.k as f64
    }
}
