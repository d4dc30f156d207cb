//! Exhaustive grid search over feature configurations, window lengths and
//! model hyperparameters, scored by cross-validated MAPE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, kfold_split};
use crate::features::{
    enumerate_samples, FeatureConfigName, Preprocessor, Sample, WINDOW_LENGTHS,
};
use crate::models::{train, ModelConfig, ModelFamily, TrainOptions};
use crate::util::derive_seed;

/// Which prediction task an experiment addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Citations,
    CiteScore,
}

impl Task {
    /// The feature configurations searched for this task.
    pub fn feature_configs(self) -> Vec<FeatureConfigName> {
        match self {
            Task::Citations => FeatureConfigName::CITATIONS_TASK.to_vec(),
            Task::CiteScore => FeatureConfigName::CITESCORE_TASK.to_vec(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Citations => "citations",
            Task::CiteScore => "citescore",
        }
    }
}

/// The hyperparameter grid for one family.
pub fn model_grid(family: ModelFamily) -> Vec<ModelConfig> {
    match family {
        ModelFamily::LinearRegression => vec![ModelConfig::LinearRegression],
        ModelFamily::DecisionTree => {
            let mut grid = Vec::new();
            for max_depth in [3, 6, 9, 12, 15] {
                for min_samples_split in [2, 5, 10] {
                    grid.push(ModelConfig::DecisionTree {
                        max_depth,
                        min_samples_split,
                    });
                }
            }
            grid
        }
        ModelFamily::RandomForest => {
            let mut grid = Vec::new();
            for max_depth in [3, 6, 9, 12, 15] {
                for min_samples_split in [2, 5, 10] {
                    for n_trees in [20, 50, 100] {
                        grid.push(ModelConfig::RandomForest {
                            max_depth,
                            min_samples_split,
                            n_trees,
                            bootstrap: true,
                        });
                    }
                }
            }
            grid
        }
        ModelFamily::KNearestNeighbors => [10, 20, 50, 100]
            .into_iter()
            .map(|k| ModelConfig::KNearestNeighbors { k })
            .collect(),
        ModelFamily::Mlp => {
            let mut grid = Vec::new();
            for n_layers in [1, 2, 4] {
                for layer_size in [50, 100, 200] {
                    grid.push(ModelConfig::Mlp {
                        n_layers,
                        layer_size,
                    });
                }
            }
            grid
        }
        ModelFamily::Rnn => {
            let mut grid = Vec::new();
            for n_layers in [1, 2] {
                for layer_size in [25, 50, 100] {
                    grid.push(ModelConfig::Rnn {
                        n_layers,
                        layer_size,
                    });
                }
            }
            grid
        }
        ModelFamily::Lstm => {
            let mut grid = Vec::new();
            for n_layers in [1, 2] {
                for layer_size in [25, 50, 100] {
                    grid.push(ModelConfig::Lstm {
                        n_layers,
                        layer_size,
                    });
                }
            }
            grid
        }
    }
}

/// Full tuple count for a family on a task: feature configs x windows x
/// hyperparameter grid.
pub fn grid_size(task: Task, family: ModelFamily) -> usize {
    task.feature_configs().len() * WINDOW_LENGTHS.len() * model_grid(family).len()
}

/// Specification of one grid search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub feature_configs: Vec<FeatureConfigName>,
    pub window_lens: Vec<usize>,
    pub models: Vec<ModelConfig>,
    /// Number of cross-validation folds.
    pub k: usize,
    pub seed: u64,
    /// Fold assignment at the journal level instead of the sample level.
    #[serde(default)]
    pub journal_level_folds: bool,
    /// Epoch cap applied to the iterative families during CV.
    #[serde(default)]
    pub max_epochs: Option<usize>,
}

/// One evaluated tuple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    pub index: usize,
    pub feature_config: FeatureConfigName,
    pub window_len: usize,
    pub model: ModelConfig,
    /// Mean MAPE across folds (macro average); `None` when the tuple failed.
    pub cv_mean_mape: Option<f64>,
    pub fold_mapes: Vec<f64>,
    /// Mean epochs-to-best across folds for the iterative families.
    pub mean_epochs: Option<f64>,
    pub failure: Option<String>,
}

impl GridEntry {
    /// Deterministic tuple label: feature config, window, model.
    pub fn label(&self) -> String {
        format!(
            "{}/w{}/{}",
            self.feature_config.slug(),
            self.window_len,
            self.model.label()
        )
    }
}

/// All evaluated tuples in enumeration order plus the ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub entries: Vec<GridEntry>,
    /// Indices into `entries`, ascending by CV MAPE; failed tuples excluded.
    pub ranking: Vec<usize>,
}

impl GridSearchOutcome {
    pub fn best(&self) -> Option<&GridEntry> {
        self.ranking.first().map(|&i| &self.entries[i])
    }

    /// Best-ranked entry among the given feature configurations.
    pub fn best_for_configs(&self, configs: &[FeatureConfigName]) -> Option<&GridEntry> {
        self.ranking
            .iter()
            .map(|&i| &self.entries[i])
            .find(|e| configs.contains(&e.feature_config))
    }
}

struct PairData {
    feature_config: FeatureConfigName,
    window_len: usize,
    transformed: Vec<Sample>,
    raw_targets: Vec<f64>,
    preprocessor: Option<Preprocessor>,
    folds: Vec<Vec<usize>>,
    failure: Option<String>,
}

fn build_pair(
    train_data: &Dataset,
    name: FeatureConfigName,
    window_len: usize,
    k: usize,
    seed: u64,
    journal_level: bool,
) -> PairData {
    let mut pair = PairData {
        feature_config: name,
        window_len,
        transformed: Vec::new(),
        raw_targets: Vec::new(),
        preprocessor: None,
        folds: Vec::new(),
        failure: None,
    };
    let config = name.config();
    let samples = match enumerate_samples(train_data, &config, window_len) {
        Ok(s) => s,
        Err(e) => {
            pair.failure = Some(e.to_string());
            return pair;
        }
    };
    if samples.len() < k {
        pair.failure = Some(format!(
            "only {} samples for {k}-fold cross-validation",
            samples.len()
        ));
        return pair;
    }
    let preprocessor = match Preprocessor::fit(&samples, &config) {
        Ok(p) => p,
        Err(e) => {
            pair.failure = Some(e.to_string());
            return pair;
        }
    };
    let folds = if journal_level {
        journal_folds(&samples, k, seed)
    } else {
        kfold_split(samples.len(), k, seed)
    };
    let folds = match folds {
        Ok(f) => f,
        Err(e) => {
            pair.failure = Some(e.to_string());
            return pair;
        }
    };
    pair.raw_targets = samples.iter().map(|s| s.target).collect();
    pair.transformed = preprocessor.apply(&samples);
    pair.preprocessor = Some(preprocessor);
    pair.folds = folds;
    pair
}

/// Sample folds induced by a k-fold split over the distinct journal ids.
fn journal_folds(samples: &[Sample], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut ids: Vec<&str> = samples.iter().map(|s| s.journal_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let id_folds = kfold_split(ids.len(), k, seed)?;
    let mut fold_of_id = std::collections::BTreeMap::new();
    for (fold_idx, fold) in id_folds.iter().enumerate() {
        for &i in fold {
            fold_of_id.insert(ids[i], fold_idx);
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (sample_idx, sample) in samples.iter().enumerate() {
        folds[fold_of_id[sample.journal_id.as_str()]].push(sample_idx);
    }
    if folds.iter().any(Vec::is_empty) {
        return Err(Error::InvalidConfig(
            "journal-level folding produced an empty fold".into(),
        ));
    }
    Ok(folds)
}

/// Runs k-fold cross-validation for every tuple of the grid. Tuples are
/// independent work items; results are gathered in enumeration order so the
/// ranking is reproducible regardless of scheduling.
pub fn grid_search(train_data: &Dataset, spec: &GridSearchSpec) -> Result<GridSearchOutcome> {
    if spec.feature_configs.is_empty() || spec.window_lens.is_empty() || spec.models.is_empty() {
        return Err(Error::InvalidConfig("grid dimensions must be nonempty".into()));
    }
    if train_data.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let pairs: Vec<PairData> = spec
        .feature_configs
        .iter()
        .flat_map(|&fc| spec.window_lens.iter().map(move |&w| (fc, w)))
        .collect::<Vec<_>>()
        .par_iter()
        .enumerate()
        .map(|(pair_idx, &(fc, w))| {
            build_pair(
                train_data,
                fc,
                w,
                spec.k,
                derive_seed(spec.seed, pair_idx as u64),
                spec.journal_level_folds,
            )
        })
        .collect();

    let n_windows = spec.window_lens.len();
    let n_models = spec.models.len();
    let tuple_count = pairs.len() * n_models;

    let entries: Vec<GridEntry> = (0..tuple_count)
        .into_par_iter()
        .map(|tuple_idx| {
            let pair = &pairs[tuple_idx / n_models];
            let model = &spec.models[tuple_idx % n_models];
            evaluate_tuple(tuple_idx, pair, model, spec)
        })
        .collect();

    debug_assert_eq!(
        entries.len(),
        spec.feature_configs.len() * n_windows * n_models
    );

    let mut ranking: Vec<usize> = entries
        .iter()
        .filter(|e| e.cv_mean_mape.is_some())
        .map(|e| e.index)
        .collect();
    ranking.sort_by(|&a, &b| {
        let ea = &entries[a];
        let eb = &entries[b];
        let score = ea
            .cv_mean_mape
            .partial_cmp(&eb.cv_mean_mape)
            .unwrap_or(std::cmp::Ordering::Equal);
        score
            .then_with(|| {
                let ca = ea
                    .model
                    .complexity(ea.window_len, ea.feature_config.config().n_features());
                let cb = eb
                    .model
                    .complexity(eb.window_len, eb.feature_config.config().n_features());
                ca.cmp(&cb)
            })
            .then_with(|| ea.label().cmp(&eb.label()))
    });

    Ok(GridSearchOutcome { entries, ranking })
}

fn evaluate_tuple(
    tuple_idx: usize,
    pair: &PairData,
    model: &ModelConfig,
    spec: &GridSearchSpec,
) -> GridEntry {
    let mut entry = GridEntry {
        index: tuple_idx,
        feature_config: pair.feature_config,
        window_len: pair.window_len,
        model: model.clone(),
        cv_mean_mape: None,
        fold_mapes: Vec::new(),
        mean_epochs: None,
        failure: pair.failure.clone(),
    };
    if entry.failure.is_some() {
        return entry;
    }
    let preprocessor = pair.preprocessor.as_ref().expect("pair built");

    let mut fold_mapes = Vec::with_capacity(spec.k);
    let mut epoch_counts = Vec::new();
    for (fold_idx, holdout) in pair.folds.iter().enumerate() {
        let holdout_set: std::collections::BTreeSet<usize> = holdout.iter().copied().collect();
        let train_samples: Vec<Sample> = pair
            .transformed
            .iter()
            .enumerate()
            .filter(|(i, _)| !holdout_set.contains(i))
            .map(|(_, s)| s.clone())
            .collect();

        let mut opts = TrainOptions::selection(
            model.family(),
            derive_seed(spec.seed, (tuple_idx as u64) << 8 | fold_idx as u64),
        );
        opts.max_epochs = spec.max_epochs;

        let fitted = match train(model, &train_samples, &opts) {
            Ok(m) => m,
            Err(e) => {
                entry.failure = Some(format!("fold {fold_idx}: {e}"));
                return entry;
            }
        };
        if fitted.family().is_iterative() {
            epoch_counts.push(fitted.meta.epochs_used as f64);
        }

        let mut preds = Vec::with_capacity(holdout.len());
        let mut truths = Vec::with_capacity(holdout.len());
        for &i in holdout {
            match fitted.predict_sample(&pair.transformed[i]) {
                Ok(p) => {
                    preds.push(preprocessor.invert_target(p));
                    truths.push(pair.raw_targets[i]);
                }
                Err(e) => {
                    entry.failure = Some(format!("fold {fold_idx}: {e}"));
                    return entry;
                }
            }
        }
        match compute_metrics(&preds, &truths) {
            Ok(metrics) => match metrics.mape {
                Some(mape) => fold_mapes.push(mape),
                None => {
                    entry.failure = Some(format!("fold {fold_idx}: MAPE undefined"));
                    return entry;
                }
            },
            Err(e) => {
                entry.failure = Some(format!("fold {fold_idx}: {e}"));
                return entry;
            }
        }
    }

    entry.cv_mean_mape = Some(fold_mapes.iter().sum::<f64>() / fold_mapes.len() as f64);
    entry.fold_mapes = fold_mapes;
    if !epoch_counts.is_empty() {
        entry.mean_epochs = Some(epoch_counts.iter().sum::<f64>() / epoch_counts.len() as f64);
    }
    entry
}
