//! Report files, content hashing and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use citecast_core::error::Result;
use citecast_core::eval::{BucketReport, ErrorReduction, MetricSet};
use citecast_core::util::sha256_hex;

/// Writes pretty JSON with a trailing newline and logs the artifact.
pub fn write_json<T: Serialize>(log: &mut ArtifactLog, path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, &text)?;
    log.record(path)?;
    Ok(())
}

/// Tracks every emitted file with its content hash.
#[derive(Debug, Default)]
pub struct ArtifactLog {
    root: PathBuf,
    files: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

impl ArtifactLog {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.files.push(ArtifactEntry {
            path: rel,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.files
    }
}

/// Per-predictor metrics report: the across-run mean plus each run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub task: String,
    pub runs: usize,
    pub overall: MetricSet,
    pub per_run: Vec<MetricSet>,
}

/// Mean of per-run metric sets, field by field. Optional metrics stay
/// defined only when defined in every run.
pub fn mean_metrics(per_run: &[MetricSet]) -> MetricSet {
    let n = per_run.len() as f64;
    let mean_opt = |get: fn(&MetricSet) -> Option<f64>| -> Option<f64> {
        per_run
            .iter()
            .map(get)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n)
    };
    MetricSet {
        mae: per_run.iter().map(|m| m.mae).sum::<f64>() / n,
        medae: per_run.iter().map(|m| m.medae).sum::<f64>() / n,
        mape: mean_opt(|m| m.mape),
        medape: mean_opt(|m| m.medape),
        r2: mean_opt(|m| m.r2),
        n_samples: per_run.first().map(|m| m.n_samples).unwrap_or(0),
        n_excluded_from_mape: per_run.first().map(|m| m.n_excluded_from_mape).unwrap_or(0),
    }
}

/// Plot-ready CSV: one row per bucket with the columns used by the
/// bucketized-error figures.
pub fn write_bucket_csv(log: &mut ArtifactLog, path: &Path, report: &BucketReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["bucket_lo", "bucket_hi", "n", "mae", "mape"])?;
    for bucket in &report.buckets {
        let (mae, mape) = match &bucket.metrics {
            Some(m) => (
                m.mae.to_string(),
                m.mape.map(|v| v.to_string()).unwrap_or_default(),
            ),
            None => (String::new(), String::new()),
        };
        writer.write_record([
            bucket.lo.to_string(),
            bucket.hi.to_string(),
            bucket.n.to_string(),
            mae,
            mape,
        ])?;
    }
    writer.flush()?;
    log.record(path)?;
    Ok(())
}

/// Error reductions of the selected model against each baseline; `None`
/// marks an undefined comparison (zero or undefined baseline metric).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReductionReport {
    pub model: String,
    pub vs_baseline: BTreeMap<String, Option<ErrorReduction>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSeeds {
    pub split: u64,
    pub evaluation_base: u64,
    pub synth: Option<u64>,
}

/// Run manifest: configuration echo, seeds, timings and artifact hashes.
/// Timings vary run to run; every other field is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: String,
    pub config: serde_json::Value,
    pub seeds: ManifestSeeds,
    pub fixed_epochs: Vec<Option<usize>>,
    pub grid_tuples: Option<usize>,
    pub timings_ms: BTreeMap<String, u128>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
