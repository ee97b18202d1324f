//! Subcommands. Each returns a JSON summary for stdout and writes its files at the end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fairbayes::data::Dataset;
use fairbayes::fairness::FairnessSpec;
use fairbayes::groups::GroupMode;
use fairbayes::measures::{empirical_independent_reports, empirical_report, empirical_risk};
use fairbayes::oracle::run_property_suite;
use fairbayes::pipeline::{
    evaluate, select_lambda, Frontier, FrontierPoint, Method, Pipeline, PipelineConfig, Splits,
};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{RunArgs, RunConfig};
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest, Schema, Table};
use crate::record::ModelRecord;

#[derive(Debug, Parser)]
#[command(name = "fairbayes", version, about = "Bayes-optimal fair classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fairness report of given predictions.
    Audit(AuditArgs),
    /// Fair cost-sensitive training with multiplier selection on the tune split.
    Fit(RunArgs),
    /// Plug-in post-processing with multiplier selection on the tune split.
    Postprocess(RunArgs),
    /// Accuracy and fairness over the multiplier grid.
    Frontier(RunArgs),
    /// Seeded randomized checks of the exact identities.
    OracleCheck(OracleArgs),
    /// Acceptance probabilities and decisions of a saved model.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// CSV holding the prediction column, row-aligned with the dataset;
    /// without it the column is read from the dataset itself.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Column of acceptance probabilities in [0, 1].
    #[arg(long, default_value = "prediction")]
    pub prediction_column: String,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to `oracle.json` here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// A `model.json` written by fit or postprocess.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Predictions CSV; defaults to `predictions.csv` next to the model.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Seed of the draws that turn acceptance probabilities into decisions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Summary for stdout, plus an error to report after it is printed.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Value,
    pub failure: Option<CliError>,
}

impl From<Value> for Outcome {
    fn from(summary: Value) -> Self {
        Self { summary, failure: None }
    }
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Audit(a) => audit(&a).map(Outcome::from),
        Command::Fit(a) => train(&a, Method::Inprocess),
        Command::Postprocess(a) => train(&a, Method::Postprocess),
        Command::Frontier(a) => frontier(&a).map(Outcome::from),
        Command::OracleCheck(a) => oracle_check(&a),
        Command::Predict(a) => predict(&a).map(Outcome::from),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {}", path.display(), e)))
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    write_text(path, &serde_json::to_string_pretty(value).expect("JSON value serializes"))
}

fn fairness_json(predictions: &[f64], dataset: &Dataset, spec: &FairnessSpec) -> CliResult<Value> {
    Ok(match spec.mode {
        GroupMode::Intersectional => json!(empirical_report(predictions, dataset, spec)?),
        GroupMode::Independent => json!(empirical_independent_reports(predictions, dataset, spec)?),
    })
}

fn audit(args: &AuditArgs) -> CliResult<Value> {
    let config = args.run.resolve()?;
    let spec = config.fairness_spec()?;
    let excluded = if args.predictions.is_none() {
        vec![args.prediction_column.clone()]
    } else {
        Vec::new()
    };
    let (_, dataset) = ingest(&config, &excluded)?;
    let predictions = match &args.predictions {
        Some(path) => Table::read(path)?.probabilities(&args.prediction_column)?,
        None => Table::read(config.dataset_path()?)?.probabilities(&args.prediction_column)?,
    };
    if predictions.len() != dataset.len() {
        return Err(CliError::Data(format!(
            "{} predictions for {} dataset rows",
            predictions.len(),
            dataset.len()
        )));
    }
    let c = config.pipeline_config()?.c;
    let (cs_risk, accuracy) = empirical_risk(&predictions, &dataset, c)?;
    let summary = json!({
        "command": "audit",
        "rows": dataset.len(),
        "groups": dataset.num_groups(),
        "accuracy": accuracy,
        "cs_risk": cs_risk,
        "fairness": fairness_json(&predictions, &dataset, &spec)?,
    });
    let dir = config.prepare_output_dir()?;
    write_json(&dir.join("audit.json"), &summary)?;
    Ok(summary)
}

struct Prepared {
    config: RunConfig,
    pipeline_config: PipelineConfig,
    schema: Schema,
    splits: Splits,
    pipeline: Pipeline,
    dir: PathBuf,
}

fn prepare(args: &RunArgs) -> CliResult<Prepared> {
    let config = args.resolve()?;
    let pipeline_config = config.pipeline_config()?;
    let dir = config.prepare_output_dir()?;
    let (schema, dataset) = ingest(&config, &[])?;
    info!("{} rows, {} features, {} groups", dataset.len(), dataset.dim(), dataset.num_groups());
    let splits = Splits::new(&dataset, &pipeline_config)?;
    let pipeline = Pipeline::fit(&splits.train, &pipeline_config)?;
    for w in pipeline.warnings() {
        warn!("{}", w);
    }
    Ok(Prepared {
        config,
        pipeline_config,
        schema,
        splits,
        pipeline,
        dir,
    })
}

/// `lambda_1..lambda_D, accuracy, cs_risk, fairness_value, split`, shortest round-trip floats.
pub fn frontier_csv(frontier: &Frontier) -> String {
    let dims = frontier.points.first().map_or(0, |p| p.lambda.len());
    let mut header: Vec<String> = (1..=dims).map(|d| format!("lambda_{}", d)).collect();
    header.extend(["accuracy", "cs_risk", "fairness_value", "split"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for p in &frontier.points {
        let mut fields: Vec<String> = p.lambda.iter().map(|v| format!("{}", v)).collect();
        fields.extend([p.accuracy, p.cs_risk, p.fairness_value].map(|v| format!("{}", v)));
        fields.push(p.split.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn write_frontier(dir: &Path, frontier: &Frontier) -> CliResult<()> {
    write_text(&dir.join("frontier.csv"), &frontier_csv(frontier))?;
    write_json(&dir.join("frontier.json"), &json!(frontier))
}

fn frontier(args: &RunArgs) -> CliResult<Value> {
    let p = prepare(args)?;
    let frontier = p.pipeline.frontier(&p.splits, p.config.method)?;
    write_frontier(&p.dir, &frontier)?;
    let spec = &p.pipeline_config.fairness;
    let selected = match select_lambda(&frontier, spec.delta, spec.measure) {
        Ok(point) => json!(point),
        Err(e) => json!({ "infeasible": e.to_string() }),
    };
    Ok(json!({
        "command": "frontier",
        "method": frontier.method,
        "points": frontier.points.len(),
        "selected": selected,
        "output_dir": p.dir,
    }))
}

fn test_metrics(predictions: &[f64], p: &Prepared) -> CliResult<Value> {
    let c = &p.pipeline_config;
    let e = evaluate(predictions, &p.splits.test, &c.fairness, c.c)?;
    Ok(json!({
        "accuracy": e.accuracy,
        "cs_risk": e.cs_risk,
        "fairness_value": e.fairness_value,
        "satisfied": c.fairness.satisfied_by(e.fairness_value),
        "report": fairness_json(predictions, &p.splits.test, &c.fairness)?,
    }))
}

fn train(args: &RunArgs, method: Method) -> CliResult<Outcome> {
    let p = prepare(args)?;
    let dims = p.pipeline.tables().dims();
    let (lambda, tune_point): (Vec<f64>, Option<FrontierPoint>) = match &p.config.lambda {
        Some(l) => {
            let lambda = if l.len() == 1 { vec![l[0]; dims] } else { l.clone() };
            if lambda.len() != dims {
                return Err(CliError::Config(format!(
                    "{} multipliers given, the constraints need {}",
                    lambda.len(),
                    dims
                )));
            }
            (lambda, None)
        }
        None => {
            let frontier = p.pipeline.frontier(&p.splits, method)?;
            write_frontier(&p.dir, &frontier)?;
            let spec = &p.pipeline_config.fairness;
            let point = select_lambda(&frontier, spec.delta, spec.measure)?;
            (point.lambda.clone(), Some(point))
        }
    };
    let classifier = p.pipeline.classifier(&p.splits.train, method, &lambda)?;
    let selected = test_metrics(&classifier.predict(&p.splits.test)?, &p)?;
    let baseline = p.pipeline.classifier(&p.splits.train, Method::Postprocess, &vec![0.0; dims])?;
    let unconstrained = test_metrics(&baseline.predict(&p.splits.test)?, &p)?;
    let metrics = json!({
        "command": method.to_string(),
        "method": method,
        "lambda": lambda,
        "tune": tune_point,
        "test": selected,
        "unconstrained_test": unconstrained,
        "rows": { "train": p.splits.train.len(), "tune": p.splits.tune.len(), "test": p.splits.test.len() },
        "warnings": p.pipeline.warnings(),
    });
    let record = ModelRecord::new(
        p.schema.clone(),
        p.pipeline_config.fairness,
        p.pipeline_config.c,
        p.pipeline_config.seed,
        classifier,
    );
    record.save(&p.dir.join("model.json"))?;
    write_json(&p.dir.join("metrics.json"), &metrics)?;
    if metrics["test"]["satisfied"] == false {
        warn!("selected classifier misses the tolerance on the test split");
    }
    Ok(metrics.into())
}

fn oracle_check(args: &OracleArgs) -> CliResult<Outcome> {
    if args.instances == 0 {
        return Err(CliError::Config("--instances must be positive".into()));
    }
    let report = run_property_suite(args.instances, args.seed)?;
    let summary = json!(report);
    if let Some(dir) = &args.output_dir {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("output directory {} is not writable: {}", dir.display(), e)))?;
        write_json(&dir.join("oracle.json"), &summary)?;
    }
    let failure = (!report.passed).then(|| {
        let failed: Vec<&str> = report
            .properties
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.name.as_str())
            .collect();
        CliError::OracleFailed(format!("failed properties: {}", failed.join(", ")))
    });
    Ok(Outcome { summary, failure })
}

fn predict(args: &PredictArgs) -> CliResult<Value> {
    let record = ModelRecord::load(&args.model)?;
    let table = Table::read(&args.dataset)?;
    let (samples, labelled) = record.schema.encode(&table)?;
    if samples.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", table.source)));
    }
    let dataset = Dataset::new(record.schema.sensitive_spec()?, samples).map_err(|e| CliError::Data(e.to_string()))?;
    if dataset.dim() != record.classifier.dim() {
        return Err(CliError::Data(format!(
            "dataset encodes {} features, the model expects {}",
            dataset.dim(),
            record.classifier.dim()
        )));
    }
    let probabilities = record.classifier.predict(&dataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let decisions: Vec<u8> = probabilities.iter().map(|&p| (rng.random::<f64>() < p) as u8).collect();
    let mut csv = String::from("row,group,accept_probability,prediction\n");
    for (i, ((p, d), g)) in probabilities.iter().zip(&decisions).zip(dataset.groups()).enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", i, g + 1, p, d));
    }
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.model.with_file_name("predictions.csv"));
    write_text(&output, &csv)?;
    let mut summary = json!({
        "command": "predict",
        "rows": dataset.len(),
        "positive_rate": decisions.iter().map(|&d| d as f64).sum::<f64>() / decisions.len() as f64,
        "output": output,
    });
    if labelled {
        let e = evaluate(&probabilities, &dataset, &record.fairness, record.c)?;
        summary["evaluation"] = json!(e);
        summary["satisfied"] = json!(record.fairness.satisfied_by(e.fairness_value));
    }
    Ok(summary)
}
