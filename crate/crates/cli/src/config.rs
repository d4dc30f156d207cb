//! Experiment configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use citecast_core::baselines::BaselineKind;
use citecast_core::data::SynthConfig;
use citecast_core::error::{Error, Result};
use citecast_core::eval::Task;
use citecast_core::features::{FeatureConfigName, FeatureId};
use citecast_core::models::{ModelConfig, ModelFamily};

/// Where the experiment's journals come from. Exactly one source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// NDJSON file of journal histories.
    Ingest { path: PathBuf },
    /// Synthetic generator configuration (includes its own seed).
    Synth(SynthConfig),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

/// A learned model family with hyperparameters, or a heuristic baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Baseline { baseline: BaselineKind },
    Learned(ModelConfig),
}

impl ModelChoice {
    pub fn slug(&self) -> String {
        match self {
            ModelChoice::Baseline { baseline } => baseline.name().to_string(),
            ModelChoice::Learned(config) => config.family().name().to_string(),
        }
    }

    pub fn is_iterative(&self) -> bool {
        matches!(self, ModelChoice::Learned(c) if c.family().is_iterative())
    }
}

/// One pinned (feature config, window, model) component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PinnedModel {
    pub feature_config: FeatureConfigName,
    pub window_len: usize,
    pub model: ModelChoice,
    /// Fixed epoch count for iterative families; required when pinning one.
    #[serde(default)]
    pub epochs: Option<usize>,
}

/// Grid-search selection stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSelection {
    /// Families to search; each expands to its hyperparameter grid.
    pub families: Vec<ModelFamily>,
    /// Defaults to the task's feature configurations.
    #[serde(default)]
    pub feature_configs: Option<Vec<FeatureConfigName>>,
    /// Defaults to the six window lengths.
    #[serde(default)]
    pub window_lens: Option<Vec<usize>>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub journal_level_folds: bool,
    /// Epoch cap for iterative families during cross-validation.
    #[serde(default)]
    pub max_epochs: Option<usize>,
}

fn default_k() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Exhaustive search; the best tuple(s) feed the final runs.
    Grid(GridSelection),
    /// Explicit components: one for citations or sum-window CiteScore, four
    /// (lag 0..3 targets, in that order) for per-year CiteScore.
    Pinned(Vec<PinnedModel>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SumWindow,
    PerYear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSpec {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to the task's primary range.
    #[serde(default)]
    pub bucket_edges: Option<Vec<f64>>,
    /// Defaults to the task's wide range.
    #[serde(default)]
    pub secondary_bucket_edges: Option<Vec<f64>>,
}

fn default_runs() -> usize {
    10
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            runs: default_runs(),
            base_seed: 0,
            bucket_edges: None,
            secondary_bucket_edges: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    pub selection: Selection,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    /// CiteScore composition; ignored for the citations task.
    #[serde(default)]
    pub strategy: Option<StrategyKind>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn strategy_kind(&self) -> StrategyKind {
        self.strategy.unwrap_or(StrategyKind::SumWindow)
    }

    /// Default bucket edges for the task's dense value range.
    pub fn primary_edges(&self) -> Vec<f64> {
        if let Some(edges) = &self.evaluation.bucket_edges {
            return edges.clone();
        }
        match self.task {
            Task::Citations => (0..=10).map(|i| i as f64 * 100.0).collect(),
            Task::CiteScore => (0..=10).map(|i| i as f64 * 0.5).collect(),
        }
    }

    /// Default bucket edges for the wide value range.
    pub fn secondary_edges(&self) -> Vec<f64> {
        if let Some(edges) = &self.evaluation.secondary_bucket_edges {
            return edges.clone();
        }
        match self.task {
            Task::Citations => (0..=5).map(|i| i as f64 * 10_000.0).collect(),
            Task::CiteScore => (0..=5).map(|i| i as f64 * 5.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if let DataSource::Synth(synth) = &self.data {
            synth.validate()?;
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad("split.train_fraction must be in (0, 1)".into());
        }
        if self.evaluation.runs == 0 {
            return bad("evaluation.runs must be >= 1".into());
        }
        match &self.selection {
            Selection::Grid(grid) => {
                if grid.families.is_empty() {
                    return bad("grid selection needs at least one family".into());
                }
                if let Some(configs) = &grid.feature_configs {
                    self.check_task_configs(configs)?;
                }
            }
            Selection::Pinned(components) => {
                self.validate_pinned(components)?;
            }
        }
        Ok(())
    }

    fn check_task_configs(&self, configs: &[FeatureConfigName]) -> Result<()> {
        let allowed = self.task.feature_configs();
        for c in configs {
            if !allowed.contains(c) {
                return Err(Error::InvalidConfig(format!(
                    "feature config {c} does not belong to the {} task",
                    self.task.name()
                )));
            }
        }
        Ok(())
    }

    fn validate_pinned(&self, components: &[PinnedModel]) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for component in components {
            self.check_task_configs(std::slice::from_ref(&component.feature_config))?;
            if component.model.is_iterative() && component.epochs.is_none() {
                return bad(format!(
                    "pinned {} needs an explicit epoch count",
                    component.model.slug()
                ));
            }
            if matches!(component.model, ModelChoice::Baseline { .. }) && components.len() > 1 {
                return bad("baselines cannot be combined with other components".into());
            }
        }
        match self.task {
            Task::Citations => {
                if components.len() != 1 {
                    return bad("citations task takes exactly one pinned component".into());
                }
            }
            Task::CiteScore => match self.strategy_kind() {
                StrategyKind::SumWindow => {
                    if components.len() != 1 {
                        return bad("sum-window strategy takes exactly one component".into());
                    }
                    if matches!(components[0].model, ModelChoice::Learned(_))
                        && components[0].feature_config.config().target
                            != FeatureId::TargetCitationsWindow4
                    {
                        return bad(
                            "sum-window component must use a window-sum target column".into(),
                        );
                    }
                }
                StrategyKind::PerYear => {
                    if components.len() != 4 {
                        return bad("per-year strategy takes exactly four components".into());
                    }
                    let expected = [
                        FeatureId::TargetCitationsLag0,
                        FeatureId::TargetCitationsLag1,
                        FeatureId::TargetCitationsLag2,
                        FeatureId::TargetCitationsLag3,
                    ];
                    for (component, want) in components.iter().zip(expected) {
                        if component.feature_config.config().target != want {
                            return bad(format!(
                                "per-year slot expects a column with target {want}"
                            ));
                        }
                        if matches!(component.model, ModelChoice::Baseline { .. }) {
                            return bad("per-year strategy cannot use baselines".into());
                        }
                    }
                }
            },
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pinned_learned_and_baseline_choices() {
        let json = r#"{
            "task": "citations",
            "data": { "synth": { "n_journals": 10, "seed": 3 } },
            "split": { "train_fraction": 0.9, "seed": 1 },
            "selection": { "pinned": [
                { "feature_config": "citations_full", "window_len": 10,
                  "model": { "family": "lstm", "n_layers": 1, "layer_size": 25 },
                  "epochs": 20 }
            ] },
            "evaluation": { "runs": 2, "base_seed": 5 }
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
        match &config.selection {
            Selection::Pinned(components) => {
                assert!(matches!(
                    components[0].model,
                    ModelChoice::Learned(ModelConfig::Lstm {
                        n_layers: 1,
                        layer_size: 25
                    })
                ));
            }
            _ => panic!("expected pinned"),
        }

        let baseline = r#"{
            "task": "citations",
            "data": { "synth": { "n_journals": 10 } },
            "selection": { "pinned": [
                { "feature_config": "citations_basic", "window_len": 3,
                  "model": { "baseline": "persistence" } }
            ] }
        }"#;
        let config: ExperimentConfig = serde_json::from_str(baseline).unwrap();
        config.validate().unwrap();
        match &config.selection {
            Selection::Pinned(components) => assert!(matches!(
                components[0].model,
                ModelChoice::Baseline {
                    baseline: BaselineKind::Persistence
                }
            )),
            _ => panic!("expected pinned"),
        }
    }

    #[test]
    fn rejects_iterative_without_epochs() {
        let json = r#"{
            "task": "citations",
            "data": { "synth": { "n_journals": 10 } },
            "selection": { "pinned": [
                { "feature_config": "citations_full", "window_len": 5,
                  "model": { "family": "mlp", "n_layers": 1, "layer_size": 50 } }
            ] }
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_cross_task_feature_config() {
        let json = r#"{
            "task": "citations",
            "data": { "synth": { "n_journals": 10 } },
            "selection": { "pinned": [
                { "feature_config": "citescore_sum_basic", "window_len": 5,
                  "model": { "baseline": "persistence" } }
            ] }
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn per_year_needs_four_lag_components() {
        let json = r#"{
            "task": "citescore",
            "strategy": "per_year",
            "data": { "synth": { "n_journals": 10 } },
            "selection": { "pinned": [
                { "feature_config": "citescore_year4", "window_len": 3,
                  "model": { "family": "linear_regression" } },
                { "feature_config": "citescore_year3", "window_len": 3,
                  "model": { "family": "linear_regression" } },
                { "feature_config": "citescore_year2_basic", "window_len": 3,
                  "model": { "family": "linear_regression" } },
                { "feature_config": "citescore_year1_basic", "window_len": 3,
                  "model": { "family": "linear_regression" } }
            ] }
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
    }
}
