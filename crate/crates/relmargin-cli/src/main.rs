//! Command line front end: dataset generation, fitting, scoring, weight
//! backtransformation, sensor ranking, and declarative experiment runs.
//!
//! Every subcommand is a thin binding over a library operation. On failure
//! the process exits nonzero after printing a single `error: ...` line to
//! stderr.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use relmargin::chain::{
    backtransform_affine_analytic, sensor_ranking, ChainNode, Matrix, ProcessingChain,
};
use relmargin::experiment::{
    run_experiment, ClassifierSpec, ClassifierVariant, DataSource, ExperimentConfig, SearchSpec,
};
use relmargin::io::csvio::{load_csv, CsvSchema};
use relmargin::io::generators::{gen_drift, gen_gaussian_pair, DriftGenConfig};
use relmargin::io::model_file::{load_chain, load_model, save_model};
use relmargin::io::results::ResultTable;
use relmargin::io::write_csv;
use relmargin::solver::fit_brmm;
use relmargin::{Error, Result};

#[derive(Parser)]
#[command(name = "relmargin", version, about = "Margin machines with bounded score bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a declarative experiment and write its result table.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the worker count from the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the generator seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output path; without one the table prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset as CSV.
    Gen {
        /// One of: drift, drift-full, gaussian-pair.
        #[arg(long)]
        preset: Option<String>,
        /// TOML data-source description (kind = "drift" | "gaussian_pair").
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; drift sources append `_train.csv` / `_test.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a classifier on a CSV dataset and save the model.
    Fit {
        /// TOML file with a [classifier] section (and optional [schema]).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a CSV dataset with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the input-space weights of a stored affine chain.
    Backtransform {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank sensors of a chain whose input is (times x sensors).
    RankSensors {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        times: usize,
        #[arg(long)]
        sensors: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment whose search section must be a grid.
    Gridsearch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment whose search section must be a pattern search.
    Patternsearch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {}", e.to_string().replace('\n', "; "));
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, workers, seed, out } => {
            run_with(&config, workers, seed, out, None)
        }
        Command::Gridsearch { config, workers, seed, out } => {
            run_with(&config, workers, seed, out, Some("grid"))
        }
        Command::Patternsearch { config, workers, seed, out } => {
            run_with(&config, workers, seed, out, Some("pattern"))
        }
        Command::Gen { preset, config, seed, out } => gen(preset, config, seed, &out),
        Command::Fit { config, data, out } => fit(&config, &data, &out),
        Command::Predict { model, data, out } => predict(&model, &data, &out),
        Command::Backtransform { chain, out } => backtransform(&chain, &out),
        Command::RankSensors { chain, times, sensors, out } => {
            rank_sensors(&chain, times, sensors, &out)
        }
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{what} {}: {e}", path.display())))
}

fn override_seed(data: &mut DataSource, seed: u64) {
    match data {
        DataSource::Drift(g) => g.seed = seed,
        DataSource::GaussianPair(g) => g.seed = seed,
        DataSource::Csv { .. } => {}
    }
}

fn run_with(
    config: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    required_search: Option<&str>,
) -> Result<()> {
    let mut cfg: ExperimentConfig = read_toml(config, "experiment config")?;
    match (required_search, &cfg.search) {
        (Some("grid"), SearchSpec::Grid { .. })
        | (Some("pattern"), SearchSpec::Pattern { .. })
        | (None, _) => {}
        (Some(kind), _) => {
            return Err(Error::InvalidParam(format!(
                "this subcommand needs a search section of kind \"{kind}\" in {}",
                config.display()
            )));
        }
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(s) = seed {
        override_seed(&mut cfg.data, s);
    }
    if let Some(path) = out {
        cfg.output = Some(path.display().to_string());
    }
    let table = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => println!("wrote {path}"),
        None => print!("{}", table.to_csv_string()?),
    }
    Ok(())
}

fn gen(
    preset: Option<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let mut source = match (preset, config) {
        (_, Some(path)) => read_toml::<DataSource>(&path, "generator config")?,
        (Some(name), None) => match name.as_str() {
            "drift" => DataSource::Drift(DriftGenConfig::default()),
            "drift-full" => DataSource::Drift(DriftGenConfig {
                noise_features: 50,
                cauchy_noise: true,
                ..Default::default()
            }),
            "gaussian-pair" | "gaussian_pair" => {
                DataSource::GaussianPair(Default::default())
            }
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown preset '{other}' (available: drift, drift-full, gaussian-pair)"
                )))
            }
        },
        (None, None) => {
            return Err(Error::InvalidParam(
                "gen needs either --preset or --config".into(),
            ))
        }
    };
    if let Some(s) = seed {
        override_seed(&mut source, s);
    }
    let schema = CsvSchema::default();
    match source {
        DataSource::Drift(g) => {
            let (train, test) = gen_drift(&g)?;
            let train_path = suffixed(out, "_train.csv");
            let test_path = suffixed(out, "_test.csv");
            write_csv(&train, &train_path, &schema)?;
            write_csv(&test, &test_path, &schema)?;
            println!("wrote {}", train_path.display());
            println!("wrote {}", test_path.display());
        }
        DataSource::GaussianPair(g) => {
            let data = gen_gaussian_pair(&g)?;
            write_csv(&data, out, &schema)?;
            println!("wrote {}", out.display());
        }
        DataSource::Csv { .. } => {
            return Err(Error::InvalidParam(
                "gen needs a generator source, not a csv path".into(),
            ))
        }
    }
    Ok(())
}

/// Appends to the file stem: `data` + `_train.csv` -> `data_train.csv`.
fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    base.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Deserialize)]
struct FitConfig {
    classifier: ClassifierSpec,
    #[serde(default)]
    schema: CsvSchema,
}

fn fit(config: &Path, data: &Path, out: &Path) -> Result<()> {
    let cfg: FitConfig = read_toml(config, "fit config")?;
    cfg.classifier.hyperparams.validate()?;
    cfg.classifier.kernel.validate()?;
    if cfg.classifier.variant == ClassifierVariant::Svm
        && cfg.classifier.hyperparams.r.is_finite()
    {
        return Err(Error::InvalidParam(
            "the svm variant has no range parameter; use brmm for finite r".into(),
        ));
    }
    let dataset = load_csv(data, &cfg.schema)?;
    let model = fit_brmm(&dataset, &cfg.classifier.hyperparams, cfg.classifier.kernel)?;
    save_model(&model, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn predict(model_path: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let dataset = load_csv(data, &CsvSchema::default())?;
    let mut table =
        ResultTable::new(vec!["label".into(), "score".into(), "decision".into()]);
    table.push_comment(format!("model = {}", model_path.display()));
    for sample in dataset.iter() {
        let score = model.decision_score(&sample.features)?;
        let decision = if score > 0.0 { 1 } else { -1 };
        table.push_row(vec![
            sample.label.to_string(),
            format!("{score}"),
            decision.to_string(),
        ])?;
    }
    table.write(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn load_processing_chain(path: &Path) -> Result<ProcessingChain> {
    let nodes = load_chain(path)?;
    ProcessingChain::new(nodes.into_iter().map(ChainNode::Affine).collect())
}

fn backtransform(chain_path: &Path, out: &Path) -> Result<()> {
    let chain = load_processing_chain(chain_path)?;
    let result = backtransform_affine_analytic(&chain)?;
    let mut table =
        ResultTable::new(vec!["stage".into(), "component".into(), "weight".into()]);
    table.push_comment(format!("chain = {}", chain_path.display()));
    if let Some(offset) = result.offset {
        table.push_comment(format!("offset = {offset}"));
    }
    let stages = result
        .stage_weights
        .unwrap_or_else(|| vec![result.weights.clone()]);
    for (stage, weights) in stages.iter().enumerate() {
        for (component, weight) in weights.iter().enumerate() {
            table.push_row(vec![
                stage.to_string(),
                component.to_string(),
                format!("{weight}"),
            ])?;
        }
    }
    table.write(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn rank_sensors(chain_path: &Path, times: usize, sensors: usize, out: &Path) -> Result<()> {
    let chain = load_processing_chain(chain_path)?;
    let result = backtransform_affine_analytic(&chain)?;
    let weights = Matrix::new(times, sensors, result.weights)?;
    let ranking = sensor_ranking(&weights);
    let mut table = ResultTable::new(vec!["rank".into(), "sensor".into(), "score".into()]);
    table.push_comment(format!("chain = {}", chain_path.display()));
    table.push_comment("ascending: rank 0 carries the least accumulated weight");
    for (rank, entry) in ranking.iter().enumerate() {
        table.push_row(vec![
            rank.to_string(),
            entry.sensor.to_string(),
            format!("{}", entry.score),
        ])?;
    }
    table.write(out)?;
    println!("wrote {}", out.display());
    Ok(())
}
