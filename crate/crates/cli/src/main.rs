use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lnn_core::data::{load_csv, normalize_with, split, synthesize_records, write_csv, Provenance};
use lnn_core::metrics::evaluate;
use lnn_core::report::{export_dot, export_json, load_model_json};
use lnn_core::rules::{bind_params, builtin_model, parse_rule};
use lnn_core::training::train;
use lnn_core::{Dataset, EvalReport, InitStrategy, LnnError, RuleSpec, TrainConfig, TrainedModel};
use log::{info, warn};
use serde_json::json;

mod manifest;

use manifest::RunManifest;

const MODEL_FILE: &str = "model.json";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Parser)]
#[command(
    name = "lnn",
    version,
    about = "Train, evaluate and explain logical neural network rule models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a rule model on a Pima-format CSV and write model.json + manifest.json.
    Train(TrainArgs),
    /// Evaluate a trained model on the held-out split recorded in its manifest.
    Eval(EvalArgs),
    /// Write the model's parameter report (JSON) and diagram (DOT).
    Explain(ExplainArgs),
    /// Write a synthetic Pima-format CSV labelled by a rule.
    Synth(SynthArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RuleArgs {
    /// Built-in model name or rule expression, e.g. "gluc & bmi".
    #[arg(long)]
    rule: Option<String>,
    /// File holding a rule expression.
    #[arg(long)]
    rule_file: Option<PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    /// Seed for the split, initialization and synthesis.
    #[arg(long, env = "LNN_SEED")]
    seed: Option<u64>,
    /// Crispness level alpha in [0.5, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Threshold-predicate sigmoid slope.
    #[arg(long)]
    slope: Option<f64>,
    /// Initialization: paper-neutral, randomized (follows --seed) or randomized:<seed>.
    #[arg(long)]
    init: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    rule: RuleArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Decision threshold on the output probability.
    #[arg(long)]
    threshold: Option<f64>,
    /// Replace recorded zeros in glucose, blood pressure, skin, insulin and BMI by the training median.
    #[arg(long)]
    impute_median: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Path to model.json; its directory must hold the training manifest.
    #[arg(long)]
    model: PathBuf,
    /// Override the data path recorded in the manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Override the model's decision threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory (defaults to the model's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output directory (defaults to the model's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    rule: RuleArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Number of records.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Probability of flipping each label, in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let started = Instant::now();
    let (name, result) = match cli.command {
        Command::Train(a) => ("train", cmd_train(&a)),
        Command::Eval(a) => ("eval", cmd_eval(&a)),
        Command::Explain(a) => ("explain", cmd_explain(&a)),
        Command::Synth(a) => ("synth", cmd_synth(&a)),
    };
    match result {
        Ok(()) => {
            info!("{name} finished in {:.3}s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 usage or input problem, 3 undefined metric, 4 model or manifest
/// serialization, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<LnnError>() {
            return match e {
                LnnError::UndefinedMetric(_) => 3,
                LnnError::Schema(_) | LnnError::Json(_) => 4,
                LnnError::UnknownModel { .. }
                | LnnError::Parse { .. }
                | LnnError::Config(_)
                | LnnError::Ingest { .. }
                | LnnError::Io(_) => 2,
                LnnError::TruthRange(_) | LnnError::Structure(_) | LnnError::Infeasible { .. } => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

/// A built-in name, else a rule expression. Bare words that are neither get
/// the unknown-model error so the message lists the built-ins.
fn resolve_rule(args: &RuleArgs) -> Result<(String, RuleSpec)> {
    let source = match (&args.rule, &args.rule_file) {
        (Some(r), _) => r.clone(),
        (None, Some(path)) => fs::read_to_string(path)
            .map_err(LnnError::from)
            .with_context(|| format!("reading rule file {}", path.display()))?,
        (None, None) => unreachable!("clap requires one of --rule / --rule-file"),
    };
    let text = source.trim();
    let spec = match builtin_model(text) {
        Ok(spec) => spec,
        Err(unknown) => match parse_rule(text) {
            Ok(spec) => spec,
            Err(parse) => {
                let bare = text
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                return Err(if bare { unknown } else { parse }.into());
            }
        },
    };
    Ok((text.to_owned(), spec))
}

fn train_config(
    p: &ParamArgs,
    epochs: Option<usize>,
    lr: Option<f64>,
    threshold: Option<f64>,
) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let seed = p.seed.unwrap_or(d.seed);
    let mut cfg = TrainConfig {
        learning_rate: lr.unwrap_or(d.learning_rate),
        epochs: epochs.unwrap_or(d.epochs),
        alpha: p.alpha.unwrap_or(d.alpha),
        slope: p.slope.unwrap_or(d.slope),
        decision_threshold: threshold.unwrap_or(d.decision_threshold),
        ..d
    }
    .with_seed(seed);
    if let Some(init) = &p.init {
        cfg.init = match init.as_str() {
            "randomized" => InitStrategy::Randomized { seed },
            other => other.parse()?,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(LnnError::from)
        .with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(LnnError::from)
        .with_context(|| format!("writing {}", path.display()))
}

fn print_metrics(label: &str, r: &EvalReport) {
    println!(
        "{label}: n={} accuracy={:.4} precision={:.4} recall={:.4} f1={:.4} auc={:.4}",
        r.n, r.accuracy, r.precision, r.recall, r.f1, r.auc
    );
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let (source, spec) = resolve_rule(&a.rule)?;
    let cfg = train_config(&a.params, a.epochs, a.lr, a.threshold)?;
    let records = load_csv(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let (train_recs, test_recs) = split(&records, a.test_fraction, cfg.seed)?;
    let (train_ds, _, stats) = normalize_with(&train_recs, &test_recs, a.impute_median)?;
    for w in &stats.warnings {
        warn!("{w}");
    }
    if cfg.epochs == 0 {
        warn!("epochs = 0: the model keeps its initial parameters");
    }
    info!(
        "training '{spec}' on {} records ({} positive)",
        train_ds.len(),
        train_ds.positives()
    );
    let model = train(&spec, &train_ds, &cfg)?;

    match model.final_loss() {
        Some(loss) => println!("final loss: {loss:.6}"),
        None => println!("final loss: n/a (no epochs run)"),
    }
    match evaluate(&model, &train_ds, cfg.decision_threshold) {
        Ok(r) => print_metrics("train", &r),
        Err(LnnError::UndefinedMetric(m)) => warn!("train metrics undefined: {m}"),
        Err(e) => return Err(e.into()),
    }

    create_dir(&a.out)?;
    let model_path = a.out.join(MODEL_FILE);
    write_text(&model_path, &export_json(&model, None)?)?;

    let config = json!({
        "rule_source": source,
        "rule": spec.to_string(),
        "train": cfg,
        "test_fraction": a.test_fraction,
        "impute_median": a.impute_median,
    });
    let mut m = RunManifest::new("train", config, cfg.seed);
    m.input("data", &a.data);
    if let Some(f) = &a.rule.rule_file {
        m.input("rule_file", f);
    }
    m.output("model", &model_path)
        .count("records", records.len())
        .count("train_records", train_recs.len())
        .count("test_records", test_recs.len())
        .count("train_positives", train_ds.positives())
        .count("epochs", model.history.len())
        .count("parameters", model.expression.param_count());
    let manifest_path = a.out.join(MANIFEST_FILE);
    m.output("manifest", &manifest_path);
    m.write(&manifest_path)?;
    println!("wrote {}", model_path.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<(TrainedModel, Option<EvalReport>)> {
    let text = fs::read_to_string(path)
        .map_err(LnnError::from)
        .with_context(|| format!("reading model {}", path.display()))?;
    let loaded = load_model_json(&text).with_context(|| format!("loading model {}", path.display()))?;
    Ok(loaded)
}

fn model_dir(model: &Path) -> PathBuf {
    match model.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Rebuilds the held-out partition from the data path, seed and fraction in
/// the training manifest, and checks that its training half reproduces the
/// model's normalization statistics.
fn reconstruct_test_split(model: &TrainedModel, manifest: &RunManifest, data: &Path) -> Result<Dataset> {
    let fraction = manifest
        .config
        .get("test_fraction")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| LnnError::Schema("manifest lacks config.test_fraction".into()))?;
    let impute = manifest
        .config
        .get("impute_median")
        .and_then(serde_json::Value::as_bool)
        .unwrap_or(false);
    let records = load_csv(data).with_context(|| format!("loading {}", data.display()))?;
    let (train_recs, test_recs) = split(&records, fraction, manifest.seed)?;
    let refit = lnn_core::NormalizationStats::fit(&train_recs, impute)?;
    if refit != model.stats {
        return Err(LnnError::Config(format!(
            "{} with seed {} and test fraction {fraction} does not reproduce the model's training split",
            data.display(),
            manifest.seed
        ))
        .into());
    }
    Ok(Dataset::from_records(&test_recs, &model.stats, Provenance::Test))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (model, _) = load_model(&a.model)?;
    let dir = model_dir(&a.model);
    let train_manifest = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    if train_manifest.command != "train" {
        return Err(LnnError::Schema(format!(
            "{} was written by '{}', expected a training manifest",
            dir.join(MANIFEST_FILE).display(),
            train_manifest.command
        ))
        .into());
    }
    let data = match &a.data {
        Some(d) => d.clone(),
        None => train_manifest
            .input_path("data")
            .ok_or_else(|| LnnError::Schema("manifest lacks inputs.data".into()))?,
    };
    let test = reconstruct_test_split(&model, &train_manifest, &data)?;
    let threshold = a.threshold.unwrap_or(model.config.decision_threshold);
    let report = evaluate(&model, &test, threshold)?;
    print_metrics("test", &report);

    let out = a.out.clone().unwrap_or(dir);
    create_dir(&out)?;
    let report_path = out.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).map_err(LnnError::from)?;
    text.push('\n');
    write_text(&report_path, &text)?;

    let mut m = RunManifest::new("eval", json!({ "threshold": threshold }), train_manifest.seed);
    m.input("model", &a.model)
        .input("data", &data)
        .output("report", &report_path)
        .count("test_records", test.len())
        .count("test_positives", test.positives());
    let manifest_path = out.join("eval-manifest.json");
    m.output("manifest", &manifest_path);
    m.write(&manifest_path)?;
    println!("wrote {}", report_path.display());
    Ok(())
}

fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let (model, evaluation) = load_model(&a.model)?;
    let out = a.out.clone().unwrap_or_else(|| model_dir(&a.model));
    create_dir(&out)?;
    let json_path = out.join("explain.json");
    let dot_path = out.join("model.dot");
    write_text(&json_path, &export_json(&model, evaluation.as_ref())?)?;
    write_text(&dot_path, &export_dot(&model))?;

    let mut m = RunManifest::new(
        "explain",
        json!({ "rule": model.rule.to_string() }),
        model.config.seed,
    );
    m.input("model", &a.model)
        .output("json", &json_path)
        .output("dot", &dot_path)
        .count("nodes", model.expression.node_count())
        .count("parameters", model.expression.param_count());
    let manifest_path = out.join("explain-manifest.json");
    m.output("manifest", &manifest_path);
    m.write(&manifest_path)?;
    println!("wrote {} and {}", json_path.display(), dot_path.display());
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let (source, spec) = resolve_rule(&a.rule)?;
    let cfg = train_config(&a.params, None, None, None)?;
    let truth = bind_params(&spec, cfg.init, cfg.crispness()?, cfg.slope)?;
    let records = synthesize_records(a.n, cfg.seed, &truth, a.noise)?;
    create_dir(&a.out)?;
    let csv_path = a.out.join("synthetic.csv");
    let mut buf = Vec::new();
    write_csv(&mut buf, &records)?;
    fs::write(&csv_path, buf)
        .map_err(LnnError::from)
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let positives = records.iter().filter(|r| r.outcome == 1).count();
    if positives == 0 || positives == records.len() {
        warn!(
            "synthetic labels are single-class ({positives} of {} positive)",
            records.len()
        );
    }
    let config = json!({
        "rule_source": source,
        "rule": spec.to_string(),
        "n": a.n,
        "noise": a.noise,
        "alpha": cfg.alpha,
        "slope": cfg.slope,
        "init": cfg.init,
        "parameters": truth.param_values(),
    });
    let mut m = RunManifest::new("synth", config, cfg.seed);
    if let Some(f) = &a.rule.rule_file {
        m.input("rule_file", f);
    }
    m.output("data", &csv_path)
        .count("records", records.len())
        .count("positives", positives);
    let manifest_path = a.out.join("synth-manifest.json");
    m.output("manifest", &manifest_path);
    m.write(&manifest_path)?;
    println!(
        "wrote {} ({positives} of {} positive)",
        csv_path.display(),
        records.len()
    );
    Ok(())
}
