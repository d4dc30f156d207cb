//! Feature construction: the fixed feature-selection matrix, sliding-window
//! sample enumeration, and journal-level train/test splitting.
//!
//! Every feature configuration pairs a named set of per-year input features
//! with one scalar target for the following year. A sample is produced for
//! each window position where all inputs over the window and the target are
//! computable; lagged features extend the data requirement backwards, and
//! windows touching a missing SNIP/SJR value are dropped rather than imputed.

mod preprocess;

pub use preprocess::{FittedTransform, Preprocessor};

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, JournalHistory};
use crate::error::{Error, Result};

/// Window lengths considered for model inputs, in years.
pub const WINDOW_LENGTHS: [usize; 6] = [3, 4, 5, 6, 8, 10];

/// One row of the feature-selection matrix.
///
/// Input features are evaluated at each window year `t`; target features are
/// evaluated at the prediction year (the year after the window).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    /// The prediction year, repeated at every timestep.
    Year,
    /// Percentage of year-t publications never cited.
    PctNotCited,
    /// Total citations received during year t.
    TotalCitations,
    /// Publications during year t.
    Publications,
    Snip,
    Sjr,
    /// Citations received in t for publications of t - lag.
    CitationsLag0,
    CitationsLag1,
    CitationsLag2,
    CitationsLag3,
    /// Citations received in t-1 for publications of t-1.
    PrevCitationsLag0,
    /// Citations received in t-1 for publications of t-2.
    PrevCitationsLag1,
    /// Citations received in t-2 for publications of t-2.
    Prev2CitationsLag0,
    /// Citations received in t for publications of the last 4 years.
    CitationsWindow4,
    CitationsWindow3,
    /// Citations received in t-1 for publications of the 2 years ending t-1.
    PrevCitationsWindow2,
    PublicationsPrev1,
    PublicationsPrev2,
    PublicationsPrev3,
    /// Publications over the 3 years ending with t.
    PublicationsWindow3,
    PublicationsWindow4,
    /// Target: total citations received during the prediction year.
    TargetCitations,
    /// Target: prediction-year citations to publications of its 4-year window.
    TargetCitationsWindow4,
    /// Target: prediction-year citations to publications of year y - lag.
    TargetCitationsLag0,
    TargetCitationsLag1,
    TargetCitationsLag2,
    TargetCitationsLag3,
}

impl FeatureId {
    /// How many years before the evaluation year the feature reaches back.
    pub fn lag(self) -> usize {
        use FeatureId::*;
        match self {
            Year | PctNotCited | TotalCitations | Publications | Snip | Sjr | CitationsLag0
            | TargetCitations | TargetCitationsLag0 => 0,
            CitationsLag1 | PrevCitationsLag0 | PublicationsPrev1 | TargetCitationsLag1 => 1,
            CitationsLag2 | PrevCitationsLag1 | Prev2CitationsLag0 | CitationsWindow3
            | PrevCitationsWindow2 | PublicationsPrev2 | PublicationsWindow3
            | TargetCitationsLag2 => 2,
            CitationsLag3 | CitationsWindow4 | PublicationsPrev3 | PublicationsWindow4
            | TargetCitationsWindow4 | TargetCitationsLag3 => 3,
        }
    }

    pub fn is_target(self) -> bool {
        use FeatureId::*;
        matches!(
            self,
            TargetCitations
                | TargetCitationsWindow4
                | TargetCitationsLag0
                | TargetCitationsLag1
                | TargetCitationsLag2
                | TargetCitationsLag3
        )
    }

    /// Whether the preprocessor should min-max scale this feature instead of
    /// power-transforming it.
    pub fn uses_min_max(self) -> bool {
        matches!(self, FeatureId::Year | FeatureId::PctNotCited)
    }

    /// Evaluates the feature for `history` at `year`. `prediction_year` is
    /// the year the sample predicts (used by [`FeatureId::Year`]). Returns
    /// `None` when a required record, indicator value, or lagged year is not
    /// observed.
    pub fn value(self, history: &JournalHistory, year: i32, prediction_year: i32) -> Option<f64> {
        use FeatureId::*;

        let first = history.first_year()?;
        let cit = |recv: i32, pub_year: i32| -> Option<f64> {
            if pub_year < first {
                return None;
            }
            let record = history.record(recv)?;
            Some(
                record
                    .citations_by_pub_year
                    .get(&pub_year)
                    .copied()
                    .unwrap_or(0) as f64,
            )
        };
        let cit_window = |recv: i32, window: i32| -> Option<f64> {
            let start = recv - (window - 1);
            if start < first {
                return None;
            }
            let record = history.record(recv)?;
            Some(
                record
                    .citations_by_pub_year
                    .range(start..=recv)
                    .map(|(_, c)| *c as f64)
                    .sum(),
            )
        };
        let pubs = |y: i32| -> Option<f64> { Some(history.record(y)?.publications as f64) };
        let pubs_window = |end: i32, window: i32| -> Option<f64> {
            let mut total = 0.0;
            for y in (end - (window - 1))..=end {
                total += pubs(y)?;
            }
            Some(total)
        };

        match self {
            Year => Some(prediction_year as f64),
            PctNotCited => Some(history.record(year)?.pct_not_cited),
            TotalCitations | TargetCitations => {
                Some(history.record(year)?.total_citations() as f64)
            }
            Publications => pubs(year),
            Snip => history.record(year)?.snip,
            Sjr => history.record(year)?.sjr,
            CitationsLag0 | TargetCitationsLag0 => cit(year, year),
            CitationsLag1 | TargetCitationsLag1 => cit(year, year - 1),
            CitationsLag2 | TargetCitationsLag2 => cit(year, year - 2),
            CitationsLag3 | TargetCitationsLag3 => cit(year, year - 3),
            PrevCitationsLag0 => cit(year - 1, year - 1),
            PrevCitationsLag1 => cit(year - 1, year - 2),
            Prev2CitationsLag0 => cit(year - 2, year - 2),
            CitationsWindow4 | TargetCitationsWindow4 => cit_window(year, 4),
            CitationsWindow3 => cit_window(year, 3),
            PrevCitationsWindow2 => cit_window(year - 1, 2),
            PublicationsPrev1 => pubs(year - 1),
            PublicationsPrev2 => pubs(year - 2),
            PublicationsPrev3 => pubs(year - 3),
            PublicationsWindow3 => pubs_window(year, 3),
            PublicationsWindow4 => pubs_window(year, 4),
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("feature name");
        write!(f, "{}", name.as_str().unwrap_or("unknown"))
    }
}

/// The named feature configurations, one per column of the selection matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureConfigName {
    #[serde(rename = "citations_basic")]
    CitationsBasic,
    #[serde(rename = "citations_full")]
    CitationsFull,
    #[serde(rename = "citescore_sum_basic")]
    CiteScoreSumBasic,
    #[serde(rename = "citescore_sum_detailed")]
    CiteScoreSumDetailed,
    #[serde(rename = "citescore_sum_full")]
    CiteScoreSumFull,
    #[serde(rename = "citescore_year4")]
    CiteScoreYear4,
    #[serde(rename = "citescore_year3")]
    CiteScoreYear3,
    #[serde(rename = "citescore_year2_basic")]
    CiteScoreYear2Basic,
    #[serde(rename = "citescore_year2_full")]
    CiteScoreYear2Full,
    #[serde(rename = "citescore_year1_basic")]
    CiteScoreYear1Basic,
    #[serde(rename = "citescore_year1_full")]
    CiteScoreYear1Full,
}

impl FeatureConfigName {
    pub const ALL: [FeatureConfigName; 11] = [
        FeatureConfigName::CitationsBasic,
        FeatureConfigName::CitationsFull,
        FeatureConfigName::CiteScoreSumBasic,
        FeatureConfigName::CiteScoreSumDetailed,
        FeatureConfigName::CiteScoreSumFull,
        FeatureConfigName::CiteScoreYear4,
        FeatureConfigName::CiteScoreYear3,
        FeatureConfigName::CiteScoreYear2Basic,
        FeatureConfigName::CiteScoreYear2Full,
        FeatureConfigName::CiteScoreYear1Basic,
        FeatureConfigName::CiteScoreYear1Full,
    ];

    /// Columns entering the citations prediction task.
    pub const CITATIONS_TASK: [FeatureConfigName; 2] = [
        FeatureConfigName::CitationsBasic,
        FeatureConfigName::CitationsFull,
    ];

    /// Columns entering the CiteScore prediction task.
    pub const CITESCORE_TASK: [FeatureConfigName; 9] = [
        FeatureConfigName::CiteScoreSumBasic,
        FeatureConfigName::CiteScoreSumDetailed,
        FeatureConfigName::CiteScoreSumFull,
        FeatureConfigName::CiteScoreYear4,
        FeatureConfigName::CiteScoreYear3,
        FeatureConfigName::CiteScoreYear2Basic,
        FeatureConfigName::CiteScoreYear2Full,
        FeatureConfigName::CiteScoreYear1Basic,
        FeatureConfigName::CiteScoreYear1Full,
    ];

    pub fn config(self) -> FeatureConfig {
        FeatureConfig::for_name(self)
    }

    /// The machine name used in config files and report paths.
    pub fn slug(self) -> &'static str {
        match self {
            FeatureConfigName::CitationsBasic => "citations_basic",
            FeatureConfigName::CitationsFull => "citations_full",
            FeatureConfigName::CiteScoreSumBasic => "citescore_sum_basic",
            FeatureConfigName::CiteScoreSumDetailed => "citescore_sum_detailed",
            FeatureConfigName::CiteScoreSumFull => "citescore_sum_full",
            FeatureConfigName::CiteScoreYear4 => "citescore_year4",
            FeatureConfigName::CiteScoreYear3 => "citescore_year3",
            FeatureConfigName::CiteScoreYear2Basic => "citescore_year2_basic",
            FeatureConfigName::CiteScoreYear2Full => "citescore_year2_full",
            FeatureConfigName::CiteScoreYear1Basic => "citescore_year1_basic",
            FeatureConfigName::CiteScoreYear1Full => "citescore_year1_full",
        }
    }
}

impl fmt::Display for FeatureConfigName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl std::str::FromStr for FeatureConfigName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureConfigName::ALL
            .into_iter()
            .find(|n| n.slug() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown feature config '{s}'")))
    }
}

/// A named input-feature set plus its prediction target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub name: FeatureConfigName,
    pub inputs: Vec<FeatureId>,
    pub target: FeatureId,
}

impl FeatureConfig {
    /// The column of the feature-selection matrix for `name`.
    pub fn for_name(name: FeatureConfigName) -> FeatureConfig {
        use FeatureConfigName as N;
        use FeatureId::*;
        let (inputs, target): (Vec<FeatureId>, FeatureId) = match name {
            N::CitationsBasic => (
                vec![Year, PctNotCited, TotalCitations, Publications],
                TargetCitations,
            ),
            N::CitationsFull => (
                vec![Year, PctNotCited, TotalCitations, Publications, Snip, Sjr],
                TargetCitations,
            ),
            N::CiteScoreSumBasic => (
                vec![
                    Year,
                    PctNotCited,
                    Snip,
                    Sjr,
                    CitationsWindow4,
                    CitationsWindow3,
                    PublicationsWindow3,
                    PublicationsWindow4,
                ],
                TargetCitationsWindow4,
            ),
            N::CiteScoreSumDetailed => (
                vec![
                    Year,
                    PctNotCited,
                    Publications,
                    Snip,
                    Sjr,
                    Prev2CitationsLag0,
                    CitationsWindow4,
                    CitationsWindow3,
                    PrevCitationsWindow2,
                    PublicationsPrev1,
                    PublicationsPrev2,
                    PublicationsWindow4,
                ],
                TargetCitationsWindow4,
            ),
            N::CiteScoreSumFull => (
                vec![
                    Year,
                    PctNotCited,
                    Publications,
                    Snip,
                    Sjr,
                    CitationsLag0,
                    CitationsLag1,
                    CitationsLag2,
                    PrevCitationsLag0,
                    PrevCitationsLag1,
                    Prev2CitationsLag0,
                    CitationsWindow4,
                    PublicationsPrev1,
                    PublicationsPrev2,
                    PublicationsWindow4,
                ],
                TargetCitationsWindow4,
            ),
            N::CiteScoreYear4 => (
                vec![Year, PctNotCited, Publications, Snip, Sjr, CitationsLag0],
                TargetCitationsLag0,
            ),
            N::CiteScoreYear3 => (
                vec![
                    Year,
                    PctNotCited,
                    Publications,
                    Snip,
                    Sjr,
                    CitationsLag0,
                    CitationsLag1,
                    PublicationsPrev1,
                ],
                TargetCitationsLag1,
            ),
            N::CiteScoreYear2Basic => (
                vec![
                    Year,
                    PctNotCited,
                    Snip,
                    Sjr,
                    CitationsLag1,
                    CitationsLag2,
                    PublicationsPrev1,
                    PublicationsPrev2,
                ],
                TargetCitationsLag2,
            ),
            N::CiteScoreYear2Full => (
                vec![
                    Year,
                    PctNotCited,
                    Snip,
                    Sjr,
                    CitationsLag1,
                    CitationsLag2,
                    PrevCitationsLag0,
                    PublicationsPrev1,
                    PublicationsPrev2,
                ],
                TargetCitationsLag2,
            ),
            N::CiteScoreYear1Basic => (
                vec![
                    Year,
                    PctNotCited,
                    Snip,
                    Sjr,
                    CitationsLag2,
                    CitationsLag3,
                    PublicationsPrev2,
                    PublicationsPrev3,
                ],
                TargetCitationsLag3,
            ),
            N::CiteScoreYear1Full => (
                vec![
                    Year,
                    PctNotCited,
                    Snip,
                    Sjr,
                    CitationsLag2,
                    CitationsLag3,
                    PrevCitationsLag1,
                    Prev2CitationsLag0,
                    PublicationsPrev2,
                    PublicationsPrev3,
                ],
                TargetCitationsLag3,
            ),
        };
        FeatureConfig {
            name,
            inputs,
            target,
        }
    }

    /// Number of input features per window year.
    pub fn n_features(&self) -> usize {
        self.inputs.len()
    }

    /// Furthest backward reach of any input feature, in years before the
    /// window start.
    pub fn max_input_lag(&self) -> usize {
        self.inputs.iter().map(|f| f.lag()).max().unwrap_or(0)
    }

    /// Years of consecutive data required to produce one sample with a
    /// window of `window_len` years: the window, the target year, and the
    /// lagged years reaching back before the window.
    pub fn required_span(&self, window_len: usize) -> usize {
        window_len + 1 + self.max_input_lag()
    }
}

/// One training/evaluation sample: a window of per-year feature vectors and
/// the following year's target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub journal_id: String,
    /// Calendar years covered by the window, chronological.
    pub window_years: Vec<i32>,
    /// `window_len x n_features` matrix of feature values, one row per year.
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
    /// The predicted year: always the year after the window.
    pub target_year: i32,
}

impl Sample {
    pub fn window_len(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_features(&self) -> usize {
        self.inputs.first().map(Vec::len).unwrap_or(0)
    }

    /// Chronological concatenation of the per-year vectors, oldest first,
    /// as consumed by the flat (non-sequence) model families.
    pub fn flattened(&self) -> Vec<f64> {
        self.inputs.iter().flatten().copied().collect()
    }
}

fn validate_window_len(window_len: usize) -> Result<()> {
    if !WINDOW_LENGTHS.contains(&window_len) {
        return Err(Error::InvalidConfig(format!(
            "window length {window_len} not in {WINDOW_LENGTHS:?}"
        )));
    }
    Ok(())
}

/// Builds the input matrix for the window of `window_len` years ending at the
/// final observed year, predicting the following year. Used at inference
/// time, where no target exists yet.
pub fn input_window(
    history: &JournalHistory,
    config: &FeatureConfig,
    window_len: usize,
) -> Result<Vec<Vec<f64>>> {
    validate_window_len(window_len)?;
    let last = history.last_year().ok_or(Error::InsufficientHistory {
        needed: config.required_span(window_len) - 1,
        actual: 0,
    })?;
    let prediction_year = last + 1;
    let start = last - (window_len as i32 - 1);
    let mut rows = Vec::with_capacity(window_len);
    for year in start..=last {
        let mut row = Vec::with_capacity(config.inputs.len());
        for feature in &config.inputs {
            match feature.value(history, year, prediction_year) {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::MissingFeature {
                        journal_id: history.journal_id.clone(),
                        feature: feature.to_string(),
                        year,
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Slides a stride-1 window over every journal and emits a sample for each
/// position where all inputs and the following year's target are computable.
pub fn enumerate_samples(
    dataset: &Dataset,
    config: &FeatureConfig,
    window_len: usize,
) -> Result<Vec<Sample>> {
    validate_window_len(window_len)?;
    let mut samples = Vec::new();
    for journal in dataset.journals() {
        enumerate_journal(journal, config, window_len, &mut samples);
    }
    Ok(samples)
}

fn enumerate_journal(
    journal: &JournalHistory,
    config: &FeatureConfig,
    window_len: usize,
    out: &mut Vec<Sample>,
) {
    let (Some(first), Some(last)) = (journal.first_year(), journal.last_year()) else {
        return;
    };
    let w = window_len as i32;
    // Window [start, start + w - 1], target year start + w.
    'position: for start in first..=(last - w) {
        let target_year = start + w;
        let Some(target) = config.target.value(journal, target_year, target_year) else {
            continue;
        };
        let mut inputs = Vec::with_capacity(window_len);
        let mut window_years = Vec::with_capacity(window_len);
        for year in start..start + w {
            let mut row = Vec::with_capacity(config.inputs.len());
            for feature in &config.inputs {
                match feature.value(journal, year, target_year) {
                    Some(v) => row.push(v),
                    None => continue 'position,
                }
            }
            inputs.push(row);
            window_years.push(year);
        }
        out.push(Sample {
            journal_id: journal.journal_id.clone(),
            window_years,
            inputs,
            target,
            target_year,
        });
    }
}

/// Partitions a dataset at the journal level. `train_fraction` of journals
/// (rounded) go to the training partition; no journal appears in both.
pub fn split_dataset(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train_n = ((train_fraction * n as f64).round() as usize).min(n);
    let mut train_idx: Vec<usize> = indices[..train_n].to_vec();
    let mut test_idx: Vec<usize> = indices[train_n..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| -> Vec<JournalHistory> {
        idx.iter().map(|&i| dataset.journals()[i].clone()).collect()
    };
    Ok((Dataset::new(pick(&train_idx))?, Dataset::new(pick(&test_idx))?))
}

/// Writes samples as CSV, one row per sample with the window flattened, for
/// debugging and external inspection.
pub fn export_samples_csv(
    samples: &[Sample],
    config: &FeatureConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let window_len = samples.first().map(Sample::window_len).unwrap_or(0);
    let mut header = vec!["journal_id".to_string(), "target_year".to_string()];
    for offset in 0..window_len {
        for feature in &config.inputs {
            header.push(format!("y{offset}_{feature}"));
        }
    }
    header.push("target".to_string());
    writer.write_record(&header)?;
    for sample in samples {
        let mut row = vec![sample.journal_id.clone(), sample.target_year.to_string()];
        for v in sample.flattened() {
            row.push(v.to_string());
        }
        row.push(sample.target.to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
