//! End-to-end experiment driver: data loading, selection, final training
//! runs, evaluation and report emission.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use citecast_core::baselines::BaselineKind;
use citecast_core::citescore::{predict_citescore, CiteScoreStrategy, StrategyModel};
use citecast_core::data::{generate_synthetic, read_ndjson_path, Dataset, JournalHistory};
use citecast_core::error::{Error, Result};
use citecast_core::eval::{
    bucketize_errors, compute_metrics, error_reduction, grid_search, GridSearchOutcome,
    GridSearchSpec, MetricSet, Task,
};
use citecast_core::features::{
    enumerate_samples, input_window, split_dataset, FeatureConfigName, FeatureId, Preprocessor,
    WINDOW_LENGTHS,
};
use citecast_core::models::{train, ModelFile, TrainOptions, TrainedModel};
use citecast_core::util::sha256_hex;

use crate::config::{
    DataSource, ExperimentConfig, GridSelection, ModelChoice, PinnedModel, Selection,
    StrategyKind,
};
use crate::output::{
    mean_metrics, write_bucket_csv, write_json, write_manifest, ArtifactLog, ErrorReductionReport,
    Manifest, ManifestSeeds, MetricsReport,
};

pub const STRATEGY_FORMAT_VERSION: u32 = 1;

/// Self-contained bundle of trained components, loadable by `predict` and
/// `evaluate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyFile {
    pub format_version: u32,
    pub task: Task,
    /// `citations`, `sum_window` or `per_year`.
    pub strategy: String,
    pub components: Vec<StrategyModel>,
}

impl StrategyFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: StrategyFile = serde_json::from_str(&text)?;
        if file.format_version != STRATEGY_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(file.format_version));
        }
        Ok(file)
    }

    pub fn to_citescore_strategy(&self) -> Result<CiteScoreStrategy> {
        match self.strategy.as_str() {
            "sum_window" => CiteScoreStrategy::sum_window(self.components[0].clone()),
            "per_year" => {
                let components: [StrategyModel; 4] =
                    self.components.clone().try_into().map_err(|_| {
                        Error::InvalidConfig("per-year strategy needs four components".into())
                    })?;
                CiteScoreStrategy::per_year(components)
            }
            other => Err(Error::InvalidConfig(format!(
                "strategy file kind '{other}' is not a citescore strategy"
            ))),
        }
    }
}

/// Loads and strictly validates the configured data source.
pub fn load_dataset(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Synth(config) => generate_synthetic(config),
        DataSource::Ingest { path } => {
            let dataset = read_ndjson_path(path)?;
            let mut violations = 0usize;
            for journal in dataset.journals() {
                violations += journal.validate().len();
            }
            if violations > 0 {
                return Err(Error::InvalidConfig(format!(
                    "dataset has {violations} invariant violations; clean it with `citecast ingest --allow-drop`"
                )));
            }
            Ok(dataset)
        }
    }
}

/// A component after selection: what to train for the final runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedComponent {
    pub feature_config: FeatureConfigName,
    pub window_len: usize,
    pub model: ModelChoice,
    pub epochs: Option<usize>,
}

impl From<&PinnedModel> for ResolvedComponent {
    fn from(p: &PinnedModel) -> Self {
        Self {
            feature_config: p.feature_config,
            window_len: p.window_len,
            model: p.model.clone(),
            epochs: p.epochs,
        }
    }
}

/// Target feature each per-year strategy slot predicts, in slot order.
const PER_YEAR_TARGETS: [FeatureId; 4] = [
    FeatureId::TargetCitationsLag0,
    FeatureId::TargetCitationsLag1,
    FeatureId::TargetCitationsLag2,
    FeatureId::TargetCitationsLag3,
];

/// Runs the grid stage (when configured) and picks the component(s) that the
/// final runs will train.
pub fn resolve_components(
    config: &ExperimentConfig,
    train_data: &Dataset,
) -> Result<(Vec<ResolvedComponent>, Option<GridSearchOutcome>)> {
    match &config.selection {
        Selection::Pinned(pinned) => Ok((pinned.iter().map(Into::into).collect(), None)),
        Selection::Grid(grid) => {
            let outcome = run_grid(config, grid, train_data)?;
            let components = components_from_grid(config, &outcome)?;
            Ok((components, Some(outcome)))
        }
    }
}

pub fn run_grid(
    config: &ExperimentConfig,
    grid: &GridSelection,
    train_data: &Dataset,
) -> Result<GridSearchOutcome> {
    let feature_configs = grid
        .feature_configs
        .clone()
        .unwrap_or_else(|| config.task.feature_configs());
    let window_lens = grid
        .window_lens
        .clone()
        .unwrap_or_else(|| WINDOW_LENGTHS.to_vec());
    let mut models = Vec::new();
    for family in &grid.families {
        models.extend(citecast_core::eval::model_grid(*family));
    }
    let spec = GridSearchSpec {
        feature_configs,
        window_lens,
        models,
        k: grid.k,
        seed: config.evaluation.base_seed,
        journal_level_folds: grid.journal_level_folds,
        max_epochs: grid.max_epochs,
    };
    grid_search(train_data, &spec)
}

fn entry_to_component(entry: &citecast_core::eval::GridEntry) -> ResolvedComponent {
    ResolvedComponent {
        feature_config: entry.feature_config,
        window_len: entry.window_len,
        model: ModelChoice::Learned(entry.model.clone()),
        epochs: entry.mean_epochs.map(|e| (e.round() as usize).max(1)),
    }
}

fn components_from_grid(
    config: &ExperimentConfig,
    outcome: &GridSearchOutcome,
) -> Result<Vec<ResolvedComponent>> {
    let missing = || Error::InvalidConfig("grid search produced no usable tuples".into());
    match (config.task, config.strategy_kind()) {
        (Task::Citations, _) => {
            let best = outcome.best().ok_or_else(missing)?;
            Ok(vec![entry_to_component(best)])
        }
        (Task::CiteScore, StrategyKind::SumWindow) => {
            let sum_configs: Vec<FeatureConfigName> = FeatureConfigName::CITESCORE_TASK
                .into_iter()
                .filter(|c| c.config().target == FeatureId::TargetCitationsWindow4)
                .collect();
            let best = outcome.best_for_configs(&sum_configs).ok_or_else(missing)?;
            Ok(vec![entry_to_component(best)])
        }
        (Task::CiteScore, StrategyKind::PerYear) => {
            let mut components = Vec::with_capacity(4);
            for target in PER_YEAR_TARGETS {
                let configs: Vec<FeatureConfigName> = FeatureConfigName::CITESCORE_TASK
                    .into_iter()
                    .filter(|c| c.config().target == target)
                    .collect();
                let best = outcome.best_for_configs(&configs).ok_or_else(missing)?;
                components.push(entry_to_component(best));
            }
            Ok(components)
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation context
// ---------------------------------------------------------------------------

/// One test-set prediction target with the series baselines read.
struct EvalPoint {
    truth: f64,
    /// Chronological values of the target quantity up to the year before
    /// the prediction; baselines extrapolate from this.
    series: Vec<f64>,
}

struct EvalContext {
    points: Vec<EvalPoint>,
}

/// Predictions of one predictor over (a subset of) the evaluation points.
struct PredictorResult {
    name: String,
    subset: Vec<usize>,
    runs: Vec<Vec<f64>>,
}

impl PredictorResult {
    fn per_run_metrics(&self, ctx: &EvalContext) -> Result<Vec<MetricSet>> {
        let truths: Vec<f64> = self.subset.iter().map(|&i| ctx.points[i].truth).collect();
        self.runs
            .iter()
            .map(|preds| compute_metrics(preds, &truths))
            .collect()
    }

    /// Bucket report over all runs pooled; membership is fixed by ground
    /// truth, so pooled MAE/MAPE equal the across-run means.
    fn bucket_report(
        &self,
        ctx: &EvalContext,
        edges: &[f64],
    ) -> Result<citecast_core::eval::BucketReport> {
        let truths: Vec<f64> = self.subset.iter().map(|&i| ctx.points[i].truth).collect();
        let mut pooled_preds = Vec::with_capacity(self.runs.len() * truths.len());
        let mut pooled_truths = Vec::with_capacity(self.runs.len() * truths.len());
        for run in &self.runs {
            pooled_preds.extend_from_slice(run);
            pooled_truths.extend_from_slice(&truths);
        }
        bucketize_errors(&pooled_preds, &pooled_truths, edges)
    }
}

fn evaluate_series_baseline(ctx: &EvalContext, kind: BaselineKind) -> PredictorResult {
    let mut subset = Vec::new();
    let mut preds = Vec::new();
    for (idx, point) in ctx.points.iter().enumerate() {
        if point.series.len() >= kind.min_history() {
            subset.push(idx);
            preds.push(kind.predict(&point.series).expect("length checked"));
        }
    }
    PredictorResult {
        name: kind.name().to_string(),
        subset,
        runs: vec![preds],
    }
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

pub struct RunSummary {
    /// Overall (across-run mean) metrics per predictor name.
    pub overall: BTreeMap<String, MetricSet>,
    pub n_points: usize,
}

pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut log = ArtifactLog::new(out_dir);
    let mut timings: BTreeMap<String, u128> = BTreeMap::new();

    let t0 = Instant::now();
    let dataset = load_dataset(&config.data)?;
    let (train_data, test_data) =
        split_dataset(&dataset, config.split.train_fraction, config.split.seed)?;
    timings.insert("data_ms".into(), t0.elapsed().as_millis());

    let t1 = Instant::now();
    let (components, grid_outcome) = resolve_components(config, &train_data)?;
    if let Some(outcome) = &grid_outcome {
        write_json(&mut log, &out_dir.join("grid_manifest.json"), outcome)?;
    }
    timings.insert("selection_ms".into(), t1.elapsed().as_millis());

    let t2 = Instant::now();
    let runs = config.evaluation.runs;
    let (ctx, model_result, strategy_file) = match config.task {
        Task::Citations => run_citations_task(config, &components, &train_data, &test_data, runs)?,
        Task::CiteScore => run_citescore_task(config, &components, &train_data, &test_data, runs)?,
    };
    timings.insert("runs_ms".into(), t2.elapsed().as_millis());

    let t3 = Instant::now();
    let mut predictors = vec![model_result];
    for kind in BaselineKind::ALL {
        if predictors.iter().any(|p| p.name == kind.name()) {
            continue;
        }
        predictors.push(evaluate_series_baseline(&ctx, kind));
    }

    let mut summary = RunSummary {
        overall: BTreeMap::new(),
        n_points: ctx.points.len(),
    };
    let primary_edges = config.primary_edges();
    let secondary_edges = config.secondary_edges();
    for predictor in &predictors {
        if predictor.subset.is_empty() {
            continue;
        }
        let per_run = predictor.per_run_metrics(&ctx)?;
        let overall = mean_metrics(&per_run);
        summary
            .overall
            .insert(predictor.name.clone(), overall.clone());
        let report = MetricsReport {
            name: predictor.name.clone(),
            task: config.task.name().to_string(),
            runs: predictor.runs.len(),
            overall,
            per_run,
        };
        write_json(
            &mut log,
            &out_dir.join(format!("metrics_{}.json", predictor.name)),
            &report,
        )?;
        for (label, edges) in [("primary", &primary_edges), ("secondary", &secondary_edges)] {
            let buckets = predictor.bucket_report(&ctx, edges)?;
            write_json(
                &mut log,
                &out_dir.join(format!("buckets_{}_{label}.json", predictor.name)),
                &buckets,
            )?;
            write_bucket_csv(
                &mut log,
                &out_dir.join(format!("buckets_{}_{label}.csv", predictor.name)),
                &buckets,
            )?;
        }
    }

    // Error reduction of the selected model against every baseline.
    let model_name = predictors[0].name.clone();
    let mut vs_baseline = BTreeMap::new();
    if let Some(model_overall) = summary.overall.get(&model_name) {
        for kind in BaselineKind::ALL {
            let reduction = summary
                .overall
                .get(kind.name())
                .and_then(|b| error_reduction(model_overall, b).ok());
            vs_baseline.insert(kind.name().to_string(), reduction);
        }
    }
    write_json(
        &mut log,
        &out_dir.join("error_reduction.json"),
        &ErrorReductionReport {
            model: model_name,
            vs_baseline,
        },
    )?;

    if let Some(strategy) = &strategy_file {
        strategy.save(&out_dir.join("strategy.json"))?;
        log.record(&out_dir.join("strategy.json"))?;
        for (idx, component) in strategy.components.iter().enumerate() {
            let preproc_path = out_dir.join(format!("preprocessor_{idx}.json"));
            write_json(&mut log, &preproc_path, &component.preprocessor)?;
            let preproc_hash = sha256_hex(&std::fs::read(&preproc_path)?);
            let model_file = ModelFile::new(component.model.clone(), preproc_hash);
            let model_path = out_dir.join(format!(
                "model_{idx}_{}.json",
                component.model.family().name()
            ));
            model_file.save(&model_path)?;
            log.record(&model_path)?;
        }
    }
    timings.insert("evaluation_ms".into(), t3.elapsed().as_millis());

    let manifest = Manifest {
        tool: "citecast".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task: config.task.name().into(),
        config: serde_json::to_value(config)?,
        seeds: ManifestSeeds {
            split: config.split.seed,
            evaluation_base: config.evaluation.base_seed,
            synth: match &config.data {
                DataSource::Synth(s) => Some(s.seed),
                DataSource::Ingest { .. } => None,
            },
        },
        fixed_epochs: components.iter().map(|c| c.epochs).collect(),
        grid_tuples: grid_outcome.as_ref().map(|g| g.entries.len()),
        timings_ms: timings,
        artifacts: log.entries().to_vec(),
    };
    write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    Ok(summary)
}

fn train_options_for(component: &ResolvedComponent, seed: u64) -> TrainOptions {
    match component.epochs {
        Some(epochs) => TrainOptions::fixed(epochs, seed),
        None => TrainOptions::with_seed(seed),
    }
}

// ---------------------------------------------------------------------------
// Citations task
// ---------------------------------------------------------------------------

fn run_citations_task(
    config: &ExperimentConfig,
    components: &[ResolvedComponent],
    train_data: &Dataset,
    test_data: &Dataset,
    runs: usize,
) -> Result<(EvalContext, PredictorResult, Option<StrategyFile>)> {
    let component = &components[0];
    let feature_config = component.feature_config.config();
    let test_samples = enumerate_samples(test_data, &feature_config, component.window_len)?;
    if test_samples.is_empty() {
        return Err(Error::InvalidConfig(
            "test partition yields no samples for the configured window".into(),
        ));
    }

    let by_id: BTreeMap<&str, &JournalHistory> = test_data
        .journals()
        .iter()
        .map(|j| (j.journal_id.as_str(), j))
        .collect();
    let mut points = Vec::with_capacity(test_samples.len());
    for sample in &test_samples {
        let journal = by_id[sample.journal_id.as_str()];
        let first = journal.first_year().expect("nonempty history");
        let series: Vec<f64> = (first..sample.target_year)
            .map(|year| journal.total_citations(year).map(|c| c as f64))
            .collect::<Result<_>>()?;
        points.push(EvalPoint {
            truth: sample.target,
            series,
        });
    }
    let ctx = EvalContext { points };

    match &component.model {
        ModelChoice::Baseline { baseline } => {
            let result = evaluate_series_baseline(&ctx, *baseline);
            Ok((ctx, result, None))
        }
        ModelChoice::Learned(model_config) => {
            let train_samples =
                enumerate_samples(train_data, &feature_config, component.window_len)?;
            let preprocessor = Preprocessor::fit(&train_samples, &feature_config)?;
            let train_t = preprocessor.apply(&train_samples);
            let test_t = preprocessor.apply(&test_samples);

            let mut run_preds = Vec::with_capacity(runs);
            let mut first_model: Option<TrainedModel> = None;
            for run in 0..runs {
                let seed = config.evaluation.base_seed + run as u64;
                let fitted = train(model_config, &train_t, &train_options_for(component, seed))?;
                let preds: Vec<f64> = test_t
                    .iter()
                    .map(|s| {
                        fitted
                            .predict_sample(s)
                            .map(|p| preprocessor.invert_target(p))
                    })
                    .collect::<Result<_>>()?;
                run_preds.push(preds);
                if first_model.is_none() {
                    first_model = Some(fitted);
                }
            }
            let result = PredictorResult {
                name: model_config.family().name().to_string(),
                subset: (0..ctx.points.len()).collect(),
                runs: run_preds,
            };
            let strategy = StrategyFile {
                format_version: STRATEGY_FORMAT_VERSION,
                task: Task::Citations,
                strategy: "citations".into(),
                components: vec![StrategyModel::new(
                    component.feature_config,
                    component.window_len,
                    first_model.expect("at least one run"),
                    preprocessor,
                )?],
            };
            Ok((ctx, result, Some(strategy)))
        }
    }
}

// ---------------------------------------------------------------------------
// CiteScore task
// ---------------------------------------------------------------------------

struct CiteScorePoint {
    journal_idx: usize,
    target_year: i32,
}

/// Evaluation points: every (journal, year) on the test partition where the
/// ground-truth score is computable and, for learned strategies, every
/// component can assemble its input window from the preceding years.
fn citescore_points(
    test_data: &Dataset,
    components: &[ResolvedComponent],
    learned: bool,
) -> Result<(Vec<CiteScorePoint>, EvalContext)> {
    let mut points = Vec::new();
    let mut ctx_points = Vec::new();
    for (journal_idx, journal) in test_data.journals().iter().enumerate() {
        let (Some(first), Some(last)) = (journal.first_year(), journal.last_year()) else {
            continue;
        };
        // Score series for the baselines, indexed by year.
        let mut score_by_year: BTreeMap<i32, f64> = BTreeMap::new();
        for year in (first + 3)..=last {
            if let Ok(score) = journal.citescore(year) {
                score_by_year.insert(year, score);
            }
        }
        for year in (first + 4)..=last {
            let Some(&truth) = score_by_year.get(&year) else {
                continue;
            };
            let truncated = journal.truncated(year - 1);
            if learned {
                let feasible = components.iter().all(|c| {
                    input_window(&truncated, &c.feature_config.config(), c.window_len).is_ok()
                });
                if !feasible {
                    continue;
                }
            }
            let series: Vec<f64> = score_by_year
                .range((first + 3)..year)
                .map(|(_, &s)| s)
                .collect();
            if series.is_empty() {
                continue;
            }
            points.push(CiteScorePoint {
                journal_idx,
                target_year: year,
            });
            ctx_points.push(EvalPoint { truth, series });
        }
    }
    Ok((points, EvalContext { points: ctx_points }))
}

fn run_citescore_task(
    config: &ExperimentConfig,
    components: &[ResolvedComponent],
    train_data: &Dataset,
    test_data: &Dataset,
    runs: usize,
) -> Result<(EvalContext, PredictorResult, Option<StrategyFile>)> {
    let learned = components
        .iter()
        .all(|c| matches!(c.model, ModelChoice::Learned(_)));
    let (points, ctx) = citescore_points(test_data, components, learned)?;
    if ctx.points.is_empty() {
        return Err(Error::InvalidConfig(
            "test partition yields no CiteScore evaluation points".into(),
        ));
    }

    if !learned {
        let ModelChoice::Baseline { baseline } = &components[0].model else {
            return Err(Error::InvalidConfig(
                "citescore components must be all learned or one baseline".into(),
            ));
        };
        let result = evaluate_series_baseline(&ctx, *baseline);
        return Ok((ctx, result, None));
    }

    // Fit one preprocessor per component on the training partition.
    let mut prepared = Vec::with_capacity(components.len());
    for component in components {
        let feature_config = component.feature_config.config();
        let train_samples = enumerate_samples(train_data, &feature_config, component.window_len)?;
        let preprocessor = Preprocessor::fit(&train_samples, &feature_config)?;
        let train_t = preprocessor.apply(&train_samples);
        prepared.push((component, preprocessor, train_t));
    }

    let strategy_kind = config.strategy_kind();
    let mut run_preds: Vec<Vec<f64>> = Vec::with_capacity(runs);
    let mut first_strategy: Option<Vec<StrategyModel>> = None;
    for run in 0..runs {
        let seed = config.evaluation.base_seed + run as u64;
        let mut strategy_models = Vec::with_capacity(prepared.len());
        for (component, preprocessor, train_t) in &prepared {
            let ModelChoice::Learned(model_config) = &component.model else {
                unreachable!("checked above");
            };
            let fitted = train(model_config, train_t, &train_options_for(component, seed))?;
            strategy_models.push(StrategyModel::new(
                component.feature_config,
                component.window_len,
                fitted,
                preprocessor.clone(),
            )?);
        }
        if first_strategy.is_none() {
            first_strategy = Some(strategy_models.clone());
        }
        let strategy = build_strategy(strategy_kind, strategy_models)?;

        let mut preds = Vec::with_capacity(points.len());
        for point in &points {
            let journal = &test_data.journals()[point.journal_idx];
            let truncated = journal.truncated(point.target_year - 1);
            preds.push(predict_citescore(&truncated, &strategy)?.score);
        }
        run_preds.push(preds);
    }

    let name = match strategy_kind {
        StrategyKind::SumWindow => "sum_window".to_string(),
        StrategyKind::PerYear => "per_year".to_string(),
    };
    let result = PredictorResult {
        name: format!(
            "{}_{}",
            components[0].model.slug(),
            name
        ),
        subset: (0..ctx.points.len()).collect(),
        runs: run_preds,
    };
    let strategy_file = StrategyFile {
        format_version: STRATEGY_FORMAT_VERSION,
        task: Task::CiteScore,
        strategy: name,
        components: first_strategy.expect("at least one run"),
    };
    Ok((ctx, result, Some(strategy_file)))
}

pub fn build_strategy(
    kind: StrategyKind,
    mut models: Vec<StrategyModel>,
) -> Result<CiteScoreStrategy> {
    match kind {
        StrategyKind::SumWindow => {
            if models.len() != 1 {
                return Err(Error::InvalidConfig(
                    "sum-window strategy takes exactly one model".into(),
                ));
            }
            CiteScoreStrategy::sum_window(models.remove(0))
        }
        StrategyKind::PerYear => {
            let components: [StrategyModel; 4] = models.try_into().map_err(|_| {
                Error::InvalidConfig("per-year strategy takes exactly four models".into())
            })?;
            CiteScoreStrategy::per_year(components)
        }
    }
}
