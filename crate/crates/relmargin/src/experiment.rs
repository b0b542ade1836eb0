//! Declarative experiment runner.
//!
//! A TOML-expressible [`ExperimentConfig`] names a data source, an optional
//! affine preprocessing chain, a classifier, an evaluation protocol, and an
//! optional hyperparameter search. [`run_experiment`] validates the whole
//! config up front (reporting every problem at once), then evaluates each
//! parameter cell by cross-validation or holdout and emits one result row
//! per (parameters, run, fold). Fold jobs run on a worker pool; results are
//! merged in enumeration order, so the output is identical for any worker
//! count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::AffineNode;
use crate::error::{Error, Result};
use crate::io::csvio::{load_csv, CsvSchema};
use crate::io::generators::{gen_drift, gen_gaussian_pair, DriftGenConfig, GaussPairConfig};
use crate::io::results::ResultTable;
use crate::kernel::KernelSpec;
use crate::metrics::{confusion, kfold_split, optimize_threshold, Metric, ScoredSet};
use crate::search::{grid_search, pattern_search, ParamSpace, PatternSearchConfig};
use crate::solver::fit_brmm;
use crate::types::{Dataset, HyperParams, Sample};

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// A labelled CSV file; `test_path` enables holdout evaluation.
    Csv {
        path: String,
        #[serde(default)]
        test_path: Option<String>,
        #[serde(default)]
        schema: CsvSchema,
    },
    /// Synthetic drift data; provides train and test phases.
    Drift(DriftGenConfig),
    /// Two synthetic Gaussian classes; single dataset.
    GaussianPair(GaussPairConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierVariant {
    /// Bounded score band `[1, r]`.
    Brmm,
    /// Plain soft-margin machine; the upper bound is disabled.
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub variant: ClassifierVariant,
    #[serde(default)]
    pub hyperparams: HyperParams,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalScheme {
    /// Per run `r`, split the pool into folds with seed `r`; each fold is
    /// the evaluation set once.
    #[default]
    Kfold,
    /// Fit on the pool, evaluate on the dedicated test set.
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSpec {
    pub metric: Metric,
    #[serde(default)]
    pub scheme: EvalScheme,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub stratified: bool,
    /// Tune the decision threshold on training scores before evaluating.
    #[serde(default)]
    pub optimize_threshold: bool,
}

fn default_folds() -> usize {
    5
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchSpec {
    #[default]
    None,
    /// Exhaustive evaluation of a named parameter grid.
    Grid { space: ParamSpace },
    /// Pattern search over the named parameters, starting from the
    /// classifier's configured values.
    Pattern {
        parameters: Vec<String>,
        config: PatternSearchConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub chain: Vec<AffineNode>,
    pub classifier: ClassifierSpec,
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub search: SearchSpec,
    /// When set, the result table is also written here.
    #[serde(default)]
    pub output: Option<String>,
    /// Worker threads for fold jobs; 0 picks the machine default.
    #[serde(default = "default_runs")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("experiment config: {e}")))
    }

    /// Exhaustive structural validation; collects every problem found.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        self.validate_data(&mut problems);
        self.validate_classifier(&mut problems);
        self.validate_evaluation(&mut problems);
        self.validate_search(&mut problems);
        self.validate_chain(&mut problems);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    fn validate_data(&self, problems: &mut Vec<String>) {
        match &self.data {
            DataSource::Csv { path, .. } => {
                if path.is_empty() {
                    problems.push("data: csv path is empty".into());
                }
            }
            DataSource::Drift(cfg) => {
                if cfg.n_per_class == 0 {
                    problems.push("data: drift generator needs n_per_class >= 1".into());
                }
                if !(cfg.var_x > 0.0 && cfg.var_y > 0.0) {
                    problems.push("data: drift generator variances must be positive".into());
                }
            }
            DataSource::GaussianPair(cfg) => {
                if cfg.n_per_class == 0 {
                    problems.push("data: gaussian pair needs n_per_class >= 1".into());
                }
                let m = &cfg.covariance;
                if m[0][1] != m[1][0] {
                    problems.push("data: covariance must be symmetric".into());
                } else if !(m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0) {
                    problems.push("data: covariance must be positive definite".into());
                }
            }
        }
    }

    fn validate_classifier(&self, problems: &mut Vec<String>) {
        if let Err(e) = self.classifier.hyperparams.validate() {
            problems.push(format!("classifier: {e}"));
        }
        if let Err(e) = self.classifier.kernel.validate() {
            problems.push(format!("classifier: {e}"));
        }
        if self.classifier.variant == ClassifierVariant::Svm
            && self.classifier.hyperparams.r.is_finite()
        {
            problems.push(
                "classifier: the svm variant has no range parameter; use brmm for finite r"
                    .into(),
            );
        }
    }

    fn validate_evaluation(&self, problems: &mut Vec<String>) {
        let eval = &self.evaluation;
        if eval.runs == 0 {
            problems.push("evaluation: runs must be at least 1".into());
        }
        match eval.scheme {
            EvalScheme::Kfold => {
                if eval.folds < 2 {
                    problems.push("evaluation: k-fold needs folds >= 2".into());
                }
            }
            EvalScheme::Holdout => {
                let has_test = matches!(
                    &self.data,
                    DataSource::Drift(_) | DataSource::Csv { test_path: Some(_), .. }
                );
                if !has_test {
                    problems.push(
                        "evaluation: holdout needs a data source with a test set \
                         (drift generator or csv with test_path)"
                            .into(),
                    );
                }
            }
        }
        if let Metric::Wa { weight } = eval.metric {
            if !(0.0..=1.0).contains(&weight) {
                problems.push(format!(
                    "evaluation: weighted-accuracy weight must lie in [0, 1], got {weight}"
                ));
            }
        }
    }

    fn tunable_names(&self) -> Vec<&'static str> {
        let mut names = vec!["c"];
        if self.classifier.variant == ClassifierVariant::Brmm {
            names.push("r");
        }
        match self.classifier.kernel {
            KernelSpec::Rbf { .. } | KernelSpec::Laplacian { .. } => names.push("sigma"),
            KernelSpec::Polynomial { .. } | KernelSpec::Sigmoid { .. } => names.push("gamma"),
            KernelSpec::Linear => {}
        }
        names
    }

    fn validate_search(&self, problems: &mut Vec<String>) {
        let tunable = self.tunable_names();
        match &self.search {
            SearchSpec::None => {}
            SearchSpec::Grid { space } => {
                for axis in space.axes() {
                    if !tunable.contains(&axis.name.as_str()) {
                        problems.push(format!(
                            "search: axis '{}' is not tunable on this classifier \
                             (available: {})",
                            axis.name,
                            tunable.join(", ")
                        ));
                        continue;
                    }
                    for value in &axis.values {
                        match value.as_real() {
                            None => {
                                problems.push(format!(
                                    "search: axis '{}' needs numeric values",
                                    axis.name
                                ));
                                break;
                            }
                            Some(v) => {
                                if let Some(msg) = bad_param_value(&axis.name, v) {
                                    problems.push(format!("search: axis '{}': {msg}", axis.name));
                                    break;
                                }
                            }
                        }
                    }
                }
            }
            SearchSpec::Pattern { parameters, config } => {
                if parameters.is_empty() {
                    problems.push("search: pattern search needs at least one parameter".into());
                }
                for (i, p) in parameters.iter().enumerate() {
                    if !tunable.contains(&p.as_str()) {
                        problems.push(format!(
                            "search: parameter '{p}' is not tunable on this classifier \
                             (available: {})",
                            tunable.join(", ")
                        ));
                    }
                    if parameters[..i].contains(p) {
                        problems.push(format!("search: parameter '{p}' listed twice"));
                    }
                    if p == "r" && !self.classifier.hyperparams.r.is_finite() {
                        problems.push(
                            "search: pattern search over r needs a finite starting r".into(),
                        );
                    }
                }
                if !(config.step_tolerance > 0.0 && config.initial_step > config.step_tolerance)
                {
                    problems.push(
                        "search: need initial step > step tolerance > 0".into(),
                    );
                }
                if !(config.contraction > 0.0 && config.contraction < 1.0) {
                    problems.push("search: contraction must lie in (0, 1)".into());
                }
                if !config.log_scale.is_empty() && config.log_scale.len() != parameters.len() {
                    problems.push(format!(
                        "search: log_scale lists {} flags for {} parameters",
                        config.log_scale.len(),
                        parameters.len()
                    ));
                }
            }
        }
    }

    fn validate_chain(&self, problems: &mut Vec<String>) {
        for (i, node) in self.chain.iter().enumerate() {
            if let Err(e) = node.validate() {
                problems.push(format!("chain node {i}: {e}"));
            }
        }
        for (i, pair) in self.chain.windows(2).enumerate() {
            if pair[1].a.cols() != pair[0].a.rows() {
                problems.push(format!(
                    "chain node {} expects input dim {}, but node {i} outputs {}",
                    i + 1,
                    pair[1].a.cols(),
                    pair[0].a.rows()
                ));
            }
        }
    }
}

/// Range checks for named tunable parameters; returns a problem message.
fn bad_param_value(name: &str, v: f64) -> Option<String> {
    match name {
        "c" => (!(v > 0.0)).then(|| format!("c must be positive, got {v}")),
        "r" => (!(v >= 1.0)).then(|| format!("r must be at least 1, got {v}")),
        "sigma" => (!(v > 0.0 && v.is_finite()))
            .then(|| format!("sigma must be positive and finite, got {v}")),
        "gamma" => (!v.is_finite()).then(|| format!("gamma must be finite, got {v}")),
        _ => None,
    }
}

/// Applies named parameter overrides to a hyperparameter/kernel pair.
fn apply_overrides(
    base_hp: &HyperParams,
    base_kernel: &KernelSpec,
    names: &[String],
    values: &[f64],
) -> (HyperParams, KernelSpec) {
    let mut hp = base_hp.clone();
    let mut kernel = *base_kernel;
    for (name, &value) in names.iter().zip(values) {
        match name.as_str() {
            "c" => hp.c = value,
            "r" => hp.r = value,
            "sigma" => match &mut kernel {
                KernelSpec::Rbf { sigma } | KernelSpec::Laplacian { sigma } => *sigma = value,
                _ => unreachable!("validated: sigma requires an rbf/laplacian kernel"),
            },
            "gamma" => match &mut kernel {
                KernelSpec::Polynomial { gamma, .. } | KernelSpec::Sigmoid { gamma, .. } => {
                    *gamma = value
                }
                _ => unreachable!("validated: gamma requires a polynomial/sigmoid kernel"),
            },
            other => unreachable!("validated tunable name: {other}"),
        }
    }
    (hp, kernel)
}

fn apply_chain(nodes: &[AffineNode], data: &Dataset) -> Result<Dataset> {
    if nodes.is_empty() {
        return Ok(data.clone());
    }
    let mut samples = Vec::with_capacity(data.len());
    for s in data.iter() {
        let mut v = s.features.clone();
        for node in nodes {
            v = node.apply(&v)?;
        }
        samples.push(Sample::new(v, s.label));
    }
    Dataset::new(samples)
}

/// One fit-and-evaluate unit: fit on `train`, score `test`.
struct FoldJob {
    run: usize,
    fold: usize,
    train: Dataset,
    test: Dataset,
}

fn run_job(job: &FoldJob, hp: &HyperParams, kernel: KernelSpec, eval: &EvaluationSpec) -> Result<f64> {
    let model = fit_brmm(&job.train, hp, kernel)?;
    let theta = if eval.optimize_threshold {
        let train_scores: Vec<(f64, i32)> = job
            .train
            .iter()
            .map(|s| Ok((model.decision_score(&s.features)?, s.label)))
            .collect::<Result<_>>()?;
        optimize_threshold(&ScoredSet::new(train_scores)?, eval.metric)?.0
    } else {
        0.0
    };
    let labels: Vec<i32> = job.test.iter().map(|s| s.label).collect();
    let predictions: Vec<i32> = job
        .test
        .iter()
        .map(|s| {
            model
                .decision_score(&s.features)
                .map(|score| if score > theta { 1 } else { -1 })
        })
        .collect::<Result<_>>()?;
    confusion(&labels, &predictions)?.metric(eval.metric)
}

fn build_jobs(
    pool: &Dataset,
    holdout: Option<&Dataset>,
    eval: &EvaluationSpec,
) -> Result<Vec<FoldJob>> {
    let mut jobs = Vec::new();
    for run in 0..eval.runs {
        match eval.scheme {
            EvalScheme::Holdout => {
                let test = holdout.expect("validated: holdout has a test set");
                jobs.push(FoldJob { run, fold: 0, train: pool.clone(), test: test.clone() });
            }
            EvalScheme::Kfold => {
                let labels: Vec<i32> = pool.iter().map(|s| s.label).collect();
                let folds = kfold_split(
                    pool.len(),
                    eval.folds,
                    run as u64,
                    eval.stratified,
                    Some(&labels),
                )?;
                for (fold, test_indices) in folds.iter().enumerate() {
                    let (test, train) = pool.split_by_indices(test_indices);
                    jobs.push(FoldJob {
                        run,
                        fold,
                        train: Dataset::new(train)?,
                        test: Dataset::new(test)?,
                    });
                }
            }
        }
    }
    Ok(jobs)
}

fn metric_label(metric: Metric) -> &'static str {
    match metric {
        Metric::Tpr => "tpr",
        Metric::Tnr => "tnr",
        Metric::Acc => "acc",
        Metric::Ba => "ba",
        Metric::Wa { .. } => "wa",
        Metric::GMean => "g_mean",
        Metric::FMeasure => "f_measure",
        Metric::Mcc => "mcc",
    }
}

/// Runs the configured experiment and returns (and optionally writes) the
/// result table: one row per (parameter cell, run, fold), prefixed with the
/// resolved config as `#` comments.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;

    let (pool_raw, holdout_raw) = match &cfg.data {
        DataSource::Csv { path, test_path, schema } => {
            let train = load_csv(path, schema)?;
            let test = test_path.as_ref().map(|p| load_csv(p, schema)).transpose()?;
            (train, test)
        }
        DataSource::Drift(gen) => {
            let (train, test) = gen_drift(gen)?;
            (train, Some(test))
        }
        DataSource::GaussianPair(gen) => (gen_gaussian_pair(gen)?, None),
    };
    let pool = apply_chain(&cfg.chain, &pool_raw)?;
    let holdout = holdout_raw.as_ref().map(|d| apply_chain(&cfg.chain, d)).transpose()?;

    let thread_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;

    let label = metric_label(cfg.evaluation.metric);
    let param_names: Vec<String> = match &cfg.search {
        SearchSpec::None => Vec::new(),
        SearchSpec::Grid { space } => {
            space.axes().iter().map(|a| a.name.clone()).collect()
        }
        SearchSpec::Pattern { parameters, .. } => parameters.clone(),
    };
    let mut columns = param_names.clone();
    columns.extend(["run".to_string(), "fold".to_string(), label.to_string()]);
    let mut table = ResultTable::new(columns);
    // The worker count changes scheduling and the output path only says
    // where the table lands; neither affects any computed value. Dropping
    // both from the echo keeps the bytes identical across worker counts
    // and destinations.
    for line in toml::to_string(cfg)
        .map_err(|e| Error::Parse(format!("echo config: {e}")))?
        .lines()
        .filter(|l| !l.starts_with("workers = ") && !l.starts_with("output = "))
    {
        table.push_comment(line);
    }

    // Evaluates one parameter cell: fits every (run, fold) job on the worker
    // pool, appends the rows, and returns the mean metric value.
    let jobs = build_jobs(&pool, holdout.as_ref(), &cfg.evaluation)?;
    let eval_cell = |values: &[f64],
                         rows: &mut Vec<Vec<String>>|
     -> Result<f64> {
        let (hp, kernel) =
            apply_overrides(&cfg.classifier.hyperparams, &cfg.classifier.kernel, &param_names, values);
        let outcomes: Vec<Result<f64>> = thread_pool.install(|| {
            jobs.par_iter()
                .map(|job| run_job(job, &hp, kernel, &cfg.evaluation))
                .collect()
        });
        let mut sum = 0.0;
        for (job, outcome) in jobs.iter().zip(outcomes) {
            let value = outcome?;
            let mut row: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
            row.extend([job.run.to_string(), job.fold.to_string(), format!("{value}")]);
            rows.push(row);
            sum += value;
        }
        Ok(sum / jobs.len() as f64)
    };

    let mut best_note = Vec::new();
    let mut rows = Vec::new();
    match &cfg.search {
        SearchSpec::None => {
            let mean = eval_cell(&[], &mut rows)?;
            best_note.push(format!("mean_{label} = {mean}"));
        }
        SearchSpec::Grid { space } => {
            // Cells run in enumeration order; failed cells contribute no
            // rows and are excluded from the optimum.
            let outcome = grid_search(space, |params| {
                let values: Vec<f64> =
                    params.iter().map(|p| p.as_real().expect("validated numeric axis")).collect();
                eval_cell(&values, &mut rows).map(|mean| -mean)
            })?;
            for (name, value) in param_names.iter().zip(&outcome.best_params) {
                best_note.push(format!("best_{name} = {value}"));
            }
            best_note.push(format!("best_mean_{label} = {}", -outcome.best_value));
        }
        SearchSpec::Pattern { config, .. } => {
            let start: Vec<f64> = param_names
                .iter()
                .map(|name| match name.as_str() {
                    "c" => cfg.classifier.hyperparams.c,
                    "r" => cfg.classifier.hyperparams.r,
                    "sigma" => match cfg.classifier.kernel {
                        KernelSpec::Rbf { sigma } | KernelSpec::Laplacian { sigma } => sigma,
                        _ => unreachable!("validated"),
                    },
                    "gamma" => match cfg.classifier.kernel {
                        KernelSpec::Polynomial { gamma, .. } | KernelSpec::Sigmoid { gamma, .. } => {
                            gamma
                        }
                        _ => unreachable!("validated"),
                    },
                    other => unreachable!("validated tunable name: {other}"),
                })
                .collect();
            let outcome = pattern_search(
                config,
                |values| eval_cell(values, &mut rows).map(|mean| -mean),
                &start,
            )?;
            for (name, value) in param_names.iter().zip(&outcome.best) {
                best_note.push(format!("best_{name} = {value}"));
            }
            best_note.push(format!("best_mean_{label} = {}", -outcome.best_value));
            best_note.push(format!("search_stop = {:?}", outcome.stopped));
        }
    }
    for note in best_note {
        table.push_comment(note);
    }
    for row in rows {
        table.push_row(row)?;
    }

    if let Some(path) = &cfg.output {
        table.write(path)?;
    }
    Ok(table)
}
