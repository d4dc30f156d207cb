//! The seven regression families behind one train/predict contract.
//!
//! Flat families (linear regression, decision tree, random forest, k-NN,
//! MLP) consume the window as a single chronological concatenation; the
//! recurrent families (RNN, LSTM) consume it one year at a time. All
//! iterative families train with Adam on an MSE objective and stop either on
//! validation patience or after a fixed number of epochs. Training is
//! deterministic for a fixed seed.

mod adam;
mod knn;
mod linear;
mod mlp;
mod recurrent;
mod tree;
mod trainer;

pub use adam::{adam_step, mse_loss, AdamHyperParams, AdamState};
pub use knn::KnnModel;
pub use linear::LinearModel;
pub use mlp::MlpModel;
pub use recurrent::{lstm_cell_step, LstmCellView, LstmModel, RnnModel};
pub use trainer::{GradientNet, StoppingRule, TrainOptions, TrainingMeta};
pub use tree::{ForestModel, TreeModel, TreeNode};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Sample;
use crate::util::derive_seed;

fn default_bootstrap() -> bool {
    true
}

/// Hyperparameter choice for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    LinearRegression,
    DecisionTree {
        max_depth: usize,
        min_samples_split: usize,
    },
    RandomForest {
        max_depth: usize,
        min_samples_split: usize,
        n_trees: usize,
        #[serde(default = "default_bootstrap")]
        bootstrap: bool,
    },
    KNearestNeighbors {
        k: usize,
    },
    Mlp {
        n_layers: usize,
        layer_size: usize,
    },
    Rnn {
        n_layers: usize,
        layer_size: usize,
    },
    Lstm {
        n_layers: usize,
        layer_size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    LinearRegression,
    DecisionTree,
    RandomForest,
    KNearestNeighbors,
    Mlp,
    Rnn,
    Lstm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 7] = [
        ModelFamily::LinearRegression,
        ModelFamily::DecisionTree,
        ModelFamily::RandomForest,
        ModelFamily::KNearestNeighbors,
        ModelFamily::Mlp,
        ModelFamily::Rnn,
        ModelFamily::Lstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::LinearRegression => "linear_regression",
            ModelFamily::DecisionTree => "decision_tree",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::KNearestNeighbors => "k_nearest_neighbors",
            ModelFamily::Mlp => "mlp",
            ModelFamily::Rnn => "rnn",
            ModelFamily::Lstm => "lstm",
        }
    }

    /// Whether the family trains iteratively with Adam.
    pub fn is_iterative(self) -> bool {
        matches!(self, ModelFamily::Mlp | ModelFamily::Rnn | ModelFamily::Lstm)
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl ModelConfig {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelConfig::LinearRegression => ModelFamily::LinearRegression,
            ModelConfig::DecisionTree { .. } => ModelFamily::DecisionTree,
            ModelConfig::RandomForest { .. } => ModelFamily::RandomForest,
            ModelConfig::KNearestNeighbors { .. } => ModelFamily::KNearestNeighbors,
            ModelConfig::Mlp { .. } => ModelFamily::Mlp,
            ModelConfig::Rnn { .. } => ModelFamily::Rnn,
            ModelConfig::Lstm { .. } => ModelFamily::Lstm,
        }
    }

    /// Short deterministic label used in grid rankings and report names.
    pub fn label(&self) -> String {
        match self {
            ModelConfig::LinearRegression => "linear_regression".into(),
            ModelConfig::DecisionTree {
                max_depth,
                min_samples_split,
            } => format!("decision_tree(depth={max_depth},min_split={min_samples_split})"),
            ModelConfig::RandomForest {
                max_depth,
                min_samples_split,
                n_trees,
                ..
            } => format!(
                "random_forest(depth={max_depth},min_split={min_samples_split},trees={n_trees})"
            ),
            ModelConfig::KNearestNeighbors { k } => format!("k_nearest_neighbors(k={k})"),
            ModelConfig::Mlp {
                n_layers,
                layer_size,
            } => format!("mlp(layers={n_layers},size={layer_size})"),
            ModelConfig::Rnn {
                n_layers,
                layer_size,
            } => format!("rnn(layers={n_layers},size={layer_size})"),
            ModelConfig::Lstm {
                n_layers,
                layer_size,
            } => format!("lstm(layers={n_layers},size={layer_size})"),
        }
    }

    /// Deterministic model-complexity estimate used only for tie-breaking in
    /// grid rankings: trainable parameter counts for the parametric families,
    /// capacity proxies for the trees and k for k-NN.
    pub fn complexity(&self, window_len: usize, n_features: usize) -> u64 {
        let flat = (window_len * n_features) as u64;
        match *self {
            ModelConfig::LinearRegression => flat + 1,
            ModelConfig::DecisionTree { max_depth, .. } => (1u64 << (max_depth as u64 + 1)) - 1,
            ModelConfig::RandomForest {
                max_depth, n_trees, ..
            } => n_trees as u64 * ((1u64 << (max_depth as u64 + 1)) - 1),
            ModelConfig::KNearestNeighbors { k } => k as u64,
            ModelConfig::Mlp {
                n_layers,
                layer_size,
            } => {
                let s = layer_size as u64;
                let mut total = flat * s + s;
                for _ in 1..n_layers {
                    total += s * s + s;
                }
                total + s + 1
            }
            ModelConfig::Rnn {
                n_layers,
                layer_size,
            } => {
                let s = layer_size as u64;
                let f = n_features as u64;
                let mut total = s * f + s * s + s;
                for _ in 1..n_layers {
                    total += s * s + s * s + s;
                }
                total + s + 1
            }
            ModelConfig::Lstm {
                n_layers,
                layer_size,
            } => {
                let s = layer_size as u64;
                let f = n_features as u64;
                let mut total = 4 * (s * f + s * s + s);
                for _ in 1..n_layers {
                    total += 4 * (s * s + s * s + s);
                }
                total + s + 1
            }
        }
    }
}

/// Fitted state of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Linear(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Knn(KnnModel),
    Mlp(MlpModel),
    Rnn(RnnModel),
    Lstm(LstmModel),
}

/// A fitted predictor with its originating configuration and input layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub window_len: usize,
    pub n_features: usize,
    pub meta: TrainingMeta,
    pub params: FittedParams,
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.config.family()
    }

    /// Predicts the (transformed-space) target for one window matrix.
    pub fn predict(&self, window: &[Vec<f64>]) -> Result<f64> {
        if window.len() != self.window_len
            || window.iter().any(|row| row.len() != self.n_features)
        {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", self.window_len, self.n_features),
                actual: format!(
                    "{} x {}",
                    window.len(),
                    window.first().map(Vec::len).unwrap_or(0)
                ),
            });
        }
        let flat = || -> Vec<f64> { window.iter().flatten().copied().collect() };
        Ok(match &self.params {
            FittedParams::Linear(m) => m.predict(&flat()),
            FittedParams::Tree(m) => m.predict(&flat()),
            FittedParams::Forest(m) => m.predict(&flat()),
            FittedParams::Knn(m) => m.predict(&flat()),
            FittedParams::Mlp(m) => m.predict_window(window),
            FittedParams::Rnn(m) => m.predict_window(window),
            FittedParams::Lstm(m) => m.predict_window(window),
        })
    }

    pub fn predict_sample(&self, sample: &Sample) -> Result<f64> {
        self.predict(&sample.inputs)
    }
}

/// Trains a model of the configured family on preprocessed samples.
pub fn train(config: &ModelConfig, samples: &[Sample], opts: &TrainOptions) -> Result<TrainedModel> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidConfig("no training samples".into()))?;
    let window_len = first.window_len();
    let n_features = first.n_features();
    if samples
        .iter()
        .any(|s| s.window_len() != window_len || s.n_features() != n_features)
    {
        return Err(Error::ShapeMismatch {
            expected: format!("{window_len} x {n_features}"),
            actual: "mixed sample layouts".into(),
        });
    }

    let flat_rows = || -> Vec<Vec<f64>> { samples.iter().map(Sample::flattened).collect() };
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();

    let (params, meta) = match *config {
        ModelConfig::LinearRegression => (
            FittedParams::Linear(linear::fit(&flat_rows(), &targets)?),
            TrainingMeta::default(),
        ),
        ModelConfig::DecisionTree {
            max_depth,
            min_samples_split,
        } => (
            FittedParams::Tree(tree::fit(
                &flat_rows(),
                &targets,
                max_depth,
                min_samples_split,
            )?),
            TrainingMeta::default(),
        ),
        ModelConfig::RandomForest {
            max_depth,
            min_samples_split,
            n_trees,
            bootstrap,
        } => (
            FittedParams::Forest(tree::fit_forest(
                &flat_rows(),
                &targets,
                max_depth,
                min_samples_split,
                n_trees,
                bootstrap,
                opts.seed,
            )?),
            TrainingMeta::default(),
        ),
        ModelConfig::KNearestNeighbors { k } => (
            FittedParams::Knn(knn::fit(&flat_rows(), &targets, k)?),
            TrainingMeta::default(),
        ),
        ModelConfig::Mlp {
            n_layers,
            layer_size,
        } => {
            let mut net = MlpModel::new(window_len * n_features, n_layers, layer_size);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x696e_6974));
            net.init_weights(&mut rng);
            let meta = trainer::train_gradient_net(&mut net, samples, opts)?;
            (FittedParams::Mlp(net), meta)
        }
        ModelConfig::Rnn {
            n_layers,
            layer_size,
        } => {
            let mut net = RnnModel::new(n_features, n_layers, layer_size);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x696e_6974));
            net.init_weights(&mut rng);
            let meta = trainer::train_gradient_net(&mut net, samples, opts)?;
            (FittedParams::Rnn(net), meta)
        }
        ModelConfig::Lstm {
            n_layers,
            layer_size,
        } => {
            let mut net = LstmModel::new(n_features, n_layers, layer_size);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 0x696e_6974));
            net.init_weights(&mut rng);
            let meta = trainer::train_gradient_net(&mut net, samples, opts)?;
            (FittedParams::Lstm(net), meta)
        }
    };

    Ok(TrainedModel {
        config: config.clone(),
        window_len,
        n_features,
        meta,
        params,
    })
}

/// On-disk model format: versioned JSON with the flattened parameters and a
/// hash of the preprocessor the model was trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub preprocessor_sha256: String,
    pub model: TrainedModel,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl ModelFile {
    pub fn new(model: TrainedModel, preprocessor_sha256: String) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            preprocessor_sha256,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(file.format_version));
        }
        Ok(file)
    }
}
