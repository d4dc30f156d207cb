//! Composition of trained models into next-year CiteScore predictions.
//!
//! When predicting the score for year x = last known year + 1, every term of
//! the four-year formula is already observed except the citations received
//! during x itself (to publications of x-3..x) and the year-x publication
//! count. The missing citations come from a trained model, either as one sum
//! or as four per-year values; the publication count uses persistence.
//! Negative model outputs are clamped to zero before the formula is
//! assembled, and predicted citation values enter the ratio unrounded.

use serde::{Deserialize, Serialize};

use crate::data::JournalHistory;
use crate::error::{Error, Result};
use crate::features::{input_window, FeatureConfig, FeatureConfigName, FeatureId, Preprocessor};
use crate::models::TrainedModel;

/// A trained model bundled with everything needed to drive it from a raw
/// history: its feature configuration, window length and fitted preprocessor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyModel {
    pub feature_config: FeatureConfigName,
    pub window_len: usize,
    pub model: TrainedModel,
    pub preprocessor: Preprocessor,
}

impl StrategyModel {
    pub fn new(
        feature_config: FeatureConfigName,
        window_len: usize,
        model: TrainedModel,
        preprocessor: Preprocessor,
    ) -> Result<Self> {
        let config = feature_config.config();
        if model.n_features != config.n_features() || model.window_len != window_len {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", window_len, config.n_features()),
                actual: format!("{} x {}", model.window_len, model.n_features),
            });
        }
        if preprocessor.config_name != feature_config || preprocessor.window_len != window_len {
            return Err(Error::InvalidConfig(
                "preprocessor was fitted for a different feature config or window".into(),
            ));
        }
        Ok(Self {
            feature_config,
            window_len,
            model,
            preprocessor,
        })
    }

    fn target(&self) -> FeatureId {
        self.feature_config.config().target
    }

    /// Raw-scale prediction of this model's target for the year after the
    /// final observed year.
    pub fn predict_next(&self, history: &JournalHistory) -> Result<f64> {
        let config: FeatureConfig = self.feature_config.config();
        let window = input_window(history, &config, self.window_len)?;
        let transformed = self.preprocessor.apply_inputs(&window);
        let out = self.model.predict(&transformed)?;
        Ok(self.preprocessor.invert_target(out))
    }
}

/// How the unknown year-x citation values are predicted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum CiteScoreStrategy {
    /// The model output is taken as the CiteScore itself. Kept as a
    /// comparison arm; it ignores the known portion of the formula.
    Direct { model: Box<StrategyModel> },
    /// One model predicts the sum of the four unknown citation values.
    SumWindow { model: Box<StrategyModel> },
    /// Four models, one per window year: citations to publications of
    /// x, x-1, x-2 and x-3 respectively.
    PerYear { models: Box<[StrategyModel; 4]> },
}

impl CiteScoreStrategy {
    pub fn direct(model: StrategyModel) -> Self {
        CiteScoreStrategy::Direct {
            model: Box::new(model),
        }
    }

    pub fn sum_window(model: StrategyModel) -> Result<Self> {
        if model.target() != FeatureId::TargetCitationsWindow4 {
            return Err(Error::InvalidConfig(format!(
                "sum-window strategy needs a window-sum target, got {}",
                model.target()
            )));
        }
        Ok(CiteScoreStrategy::SumWindow {
            model: Box::new(model),
        })
    }

    /// `models[k]` must predict citations to publications of year x - k.
    pub fn per_year(models: [StrategyModel; 4]) -> Result<Self> {
        let expected = [
            FeatureId::TargetCitationsLag0,
            FeatureId::TargetCitationsLag1,
            FeatureId::TargetCitationsLag2,
            FeatureId::TargetCitationsLag3,
        ];
        for (model, want) in models.iter().zip(expected) {
            if model.target() != want {
                return Err(Error::InvalidConfig(format!(
                    "per-year strategy slot expects target {want}, got {}",
                    model.target()
                )));
            }
        }
        Ok(CiteScoreStrategy::PerYear {
            models: Box::new(models),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CiteScoreStrategy::Direct { .. } => "direct",
            CiteScoreStrategy::SumWindow { .. } => "sum_window",
            CiteScoreStrategy::PerYear { .. } => "per_year",
        }
    }
}

/// Persistence prediction of the next year's publication count: the final
/// observed year's value.
pub fn predict_publications(history: &JournalHistory) -> Result<i64> {
    history
        .records
        .last()
        .map(|r| r.publications)
        .ok_or(Error::InsufficientHistory {
            needed: 1,
            actual: 0,
        })
}

/// Citations already observed toward the year-x window: publications of
/// years x-3..x-1 cited during years up to x-1.
pub fn known_window_citations(history: &JournalHistory, target_year: i32) -> Result<i64> {
    let mut total = 0i64;
    for pub_year in (target_year - 3)..target_year {
        // Require the publication year to be observed.
        let _ = history
            .record(pub_year)
            .ok_or_else(|| Error::MissingYear {
                journal_id: history.journal_id.clone(),
                year: pub_year,
            })?;
        for recv_year in pub_year..target_year {
            let record = history
                .record(recv_year)
                .ok_or_else(|| Error::MissingYear {
                    journal_id: history.journal_id.clone(),
                    year: recv_year,
                })?;
            total += record
                .citations_by_pub_year
                .get(&pub_year)
                .copied()
                .unwrap_or(0);
        }
    }
    Ok(total)
}

/// Assembles the four-year formula for `target_year` from the known history
/// plus predicted year-x values. The result is clamped at zero.
pub fn assemble_citescore(
    history: &JournalHistory,
    target_year: i32,
    predicted_window_citations: f64,
    predicted_publications: f64,
) -> Result<f64> {
    let known = known_window_citations(history, target_year)? as f64;
    let mut denominator = predicted_publications;
    for pub_year in (target_year - 3)..target_year {
        denominator += history
            .record(pub_year)
            .ok_or_else(|| Error::MissingYear {
                journal_id: history.journal_id.clone(),
                year: pub_year,
            })?
            .publications as f64;
    }
    if denominator <= 0.0 {
        return Err(Error::UndefinedCiteScore {
            journal_id: history.journal_id.clone(),
            year: target_year,
        });
    }
    Ok(((known + predicted_window_citations) / denominator).max(0.0))
}

/// A next-year CiteScore prediction with its components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CiteScorePrediction {
    pub journal_id: String,
    pub target_year: i32,
    pub score: f64,
    pub strategy: String,
    /// Predicted citations received during the target year for window
    /// publications (absent for the direct strategy).
    pub predicted_window_citations: Option<f64>,
    /// Per-lag components when the per-year strategy is used.
    pub per_year_citations: Option<[f64; 4]>,
    pub predicted_publications: i64,
}

/// Predicts the CiteScore for the year after the final observed year.
pub fn predict_citescore(
    history: &JournalHistory,
    strategy: &CiteScoreStrategy,
) -> Result<CiteScorePrediction> {
    let last = history.last_year().ok_or(Error::InsufficientHistory {
        needed: 4,
        actual: 0,
    })?;
    let target_year = last + 1;
    let publications = predict_publications(history)?;

    let (score, window_citations, per_year) = match strategy {
        CiteScoreStrategy::Direct { model } => {
            let raw = model.predict_next(history)?;
            (raw.max(0.0), None, None)
        }
        CiteScoreStrategy::SumWindow { model } => {
            let predicted = model.predict_next(history)?.max(0.0);
            let score =
                assemble_citescore(history, target_year, predicted, publications as f64)?;
            (score, Some(predicted), None)
        }
        CiteScoreStrategy::PerYear { models } => {
            let mut components = [0.0; 4];
            for (slot, model) in models.iter().enumerate() {
                components[slot] = model.predict_next(history)?.max(0.0);
            }
            let sum: f64 = components.iter().sum();
            let score = assemble_citescore(history, target_year, sum, publications as f64)?;
            (score, Some(sum), Some(components))
        }
    };

    Ok(CiteScorePrediction {
        journal_id: history.journal_id.clone(),
        target_year,
        score,
        strategy: strategy.kind().to_string(),
        predicted_window_citations: window_citations,
        per_year_citations: per_year,
        predicted_publications: publications,
    })
}
