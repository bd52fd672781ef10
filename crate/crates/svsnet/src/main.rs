use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use svsnet::checkpoint::Checkpoint;
use svsnet::config::RunConfig;
use svsnet::evaluate::{evaluate, format_report, EvalFilter};
use svsnet::manifest::{parse_manifest, read_predictions, write_jsonl};
use svsnet::predict::{predict_records, Fusion, PredictOptions};
use svsnet::synth::gen_pair_dataset;
use svsnet::train::{run_training, Embeddings};
use svsnet_core::attention::AttentionMode;
use svsnet_core::data::Split;
use svsnet_core::encoder::FrontendKind;
use svsnet_core::head::OutputKind;
use svsnet_core::metrics::Level;
use svsnet_core::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "svsnet", version, about = "Speaker voice similarity assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pair dataset (WAVs, manifest, embeddings).
    Synth(SynthArgs),
    /// Train a model and write the best checkpoint plus a JSON-lines log.
    Train(TrainArgs),
    /// Score the pairs of a manifest with a checkpoint.
    Predict(PredictArgs),
    /// Compare predictions with manifest ratings.
    Evaluate(EvaluateArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 600)]
    pairs: usize,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(2..))]
    speakers: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    min_duration: f64,
    #[arg(long, default_value_t = 2.0)]
    max_duration: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Regression,
    Classification,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrontendArg {
    Sinc,
    Spectrogram,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttentionArg {
    Co,
    Single,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    val_manifest: Option<PathBuf>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    frontend: Option<FrontendArg>,
    #[arg(long, value_enum)]
    attention: Option<AttentionArg>,
    /// Embedding width for feature fusion.
    #[arg(long)]
    fusion_dim: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Only pairs of this split.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long, value_enum, default_value_t = Fusion::None)]
    fusion: Fusion,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Network share of the fused score.
    #[arg(long, default_value_t = svsnet_core::head::DEFAULT_FUSION_WEIGHT)]
    fusion_weight: f64,
    /// Classification models: report the probability-weighted score instead of the label.
    #[arg(long)]
    expected_score: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Utterance,
    System,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = LevelArg::Utterance)]
    level: LevelArg,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Comma-separated system ids to keep.
    #[arg(long, value_delimiter = ',')]
    systems: Option<Vec<String>>,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        pairs: args.pairs,
        speakers: args.speakers as usize,
        seed: args.seed,
        min_duration: args.min_duration,
        max_duration: args.max_duration,
    };
    let manifest = gen_pair_dataset(&cfg, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let mut run = match (&args.config, &args.manifest) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(m)) => RunConfig::new(m.clone()),
        (None, None) => anyhow::bail!("either --config or --manifest is required"),
    };
    if let Some(m) = args.manifest {
        run.train_manifest = m;
    }
    if let Some(v) = args.val_manifest {
        run.val_manifest = Some(v);
    }
    if let Some(d) = args.checkpoint_dir {
        run.checkpoint_dir = d;
    }
    if let Some(e) = args.embeddings {
        run.embeddings = Some(e);
    }
    let t = &mut run.train;
    if let Some(m) = args.mode {
        t.model.output = match m {
            Mode::Regression => OutputKind::Regression,
            Mode::Classification => OutputKind::Classification,
        };
    }
    if let Some(f) = args.frontend {
        t.model.encoder.frontend = match f {
            FrontendArg::Sinc => FrontendKind::Sinc,
            FrontendArg::Spectrogram => FrontendKind::Spectrogram,
        };
    }
    if let Some(a) = args.attention {
        t.model.attention = match a {
            AttentionArg::Co => AttentionMode::CoAttention,
            AttentionArg::Single => AttentionMode::SingleSided,
        };
    }
    if let Some(d) = args.fusion_dim {
        t.model.fusion_dim = d;
    }
    if let Some(lr) = args.learning_rate {
        t.learning_rate = lr;
    }
    if let Some(e) = args.epochs {
        t.epochs = e;
    }
    if let Some(s) = args.max_steps {
        t.max_steps = Some(s);
    }
    if let Some(s) = args.seed {
        t.seed = s;
    }
    let outcome = run_training(&run)?;
    println!("checkpoint: {}", outcome.checkpoint.display());
    println!("log: {}", outcome.log.display());
    println!("steps: {} (best at {})", outcome.steps, outcome.best_step);
    if let Some(v) = outcome.best_validation {
        println!("validation: {}", serde_json::to_string(&v)?);
    }
    Ok(())
}

fn predict(args: PredictArgs) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let mut records = parse_manifest(&args.manifest)?;
    if let Some(s) = args.split {
        let s = Split::from(s);
        records.retain(|r| r.split == s);
    }
    let embeddings = match (&args.embeddings, args.fusion) {
        (_, Fusion::None) => None,
        (Some(path), Fusion::Feature) => Some(Embeddings::load(path, checkpoint.config.model.fusion_dim)?),
        (Some(path), Fusion::Score) => {
            let map = svsnet::manifest::read_embeddings(path)?;
            let dim = map.values().next().map_or(0, Vec::len);
            Some(Embeddings::load(path, dim)?)
        }
        (None, _) => anyhow::bail!("--fusion {:?} requires --embeddings", args.fusion),
    };
    let opts = PredictOptions { fusion: args.fusion, fusion_weight: args.fusion_weight, expected_score: args.expected_score };
    let preds = predict_records(&checkpoint, &records, &args.manifest, embeddings.as_ref(), opts)?;
    write_jsonl(&args.out, &preds)?;
    println!("{} predictions written to {}", preds.len(), args.out.display());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> anyhow::Result<()> {
    let preds = read_predictions(&args.predictions)?;
    let records = parse_manifest(&args.manifest)?;
    let level = match args.level {
        LevelArg::Utterance => Level::Utterance,
        LevelArg::System => Level::System,
    };
    let filter = EvalFilter { split: args.split.map(Split::from), systems: args.systems };
    let report = evaluate(&preds, &records, level, &filter)?;
    print!("{}", format_report(&report));
    let path = args.report.unwrap_or_else(|| args.predictions.with_extension("report.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("report: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
