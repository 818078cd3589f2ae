use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vocadyn::formats::{read_bytes, read_checkpoint, write_checkpoint, write_json};
use vocadyn::manifest;
use vocadyn::musicxml::{parse_musicxml_with, ParseOptions};
use vocadyn::pipeline::{
    export_dataset, label_config, load_labeled, run_stage_all, AlignSource, LabelConfig, ManifestStore, Stage,
    StageOptions, Workspace, DATA_ROOT_ENV, LABEL_CONFIGS,
};
use vocadyn::server;
use vocadyn_core::align::AlignConfig;
use vocadyn_core::eval::{build_report, duration_statistics, RunConfig};
use vocadyn_core::model::{class_frequency_weights, init_model, predict, train, ModelConfig, TrainConfig, TrainItem};
use vocadyn_core::score::{corpus_marking_statistics, propagate, score_passes_filter, ScoreDocument};

/// Curate singing-voice dynamics datasets and train frame-wise dynamics models.
///
/// Vocal stems are an input: separate them beforehand with any source
/// separation tool and point `stem_path` in the manifest at the result.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Root that relative manifest paths and artifacts resolve against
    /// (default: the manifest's directory).
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    data_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a MusicXML score and print it as JSON with propagated note dynamics.
    Parse {
        score: PathBuf,
        #[arg(long)]
        vocal_part: Option<String>,
    },
    /// Print the scores that pass the corpus filter (voice plus two-hand piano, more than three markings).
    Filter {
        #[arg(required = true)]
        scores: Vec<PathBuf>,
    },
    /// Compute log-Mel and Bark loudness features from the vocal stems.
    Features(StageArgs),
    /// Align scores to recordings and score the alignment against f0.
    Align(StageArgs),
    /// Write frame labels at every training resolution for accepted records.
    Label(StageArgs),
    /// Train a model on labeled records.
    Train(TrainArgs),
    /// Evaluate checkpoints and print the accuracy table.
    Eval(EvalArgs),
    /// Marking counts over scores and labeled durations over the manifest.
    Stats {
        #[arg(long)]
        manifest: Option<PathBuf>,
        scores: Vec<PathBuf>,
    },
    /// Copy labeled features and labels into a dataset directory with a summary.
    Export {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Human review service.
    Review {
        #[command(subcommand)]
        command: ReviewCommand,
    },
}

#[derive(Subcommand)]
enum ReviewCommand {
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        manifest: PathBuf,
        /// Built review UI to serve at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Mix,
    Stem,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Restrict to these records (repeatable). Default: every eligible record.
    #[arg(long = "id")]
    ids: Vec<String>,
    /// Recording used for chroma alignment.
    #[arg(long, value_enum, default_value = "mix")]
    align_source: SourceArg,
    #[arg(long, default_value_t = AlignConfig::default().grid_seconds)]
    grid: f64,
    /// Optional alignment band in grid frames.
    #[arg(long)]
    band: Option<usize>,
    /// SPL in dB of a full-scale sine.
    #[arg(long, default_value_t = StageOptions::default().calibration_db_spl_fs)]
    calibration_db: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Resolution tag, e.g. bark_16ms.
    #[arg(long, value_parser = parse_config)]
    config: LabelConfig,
    #[arg(long = "id")]
    ids: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines epoch log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = ModelConfig::default().sequence_length)]
    sequence_length: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight classes by inverse frequency.
    #[arg(long)]
    balance: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `CHECKPOINT:TAG`, repeatable; one table row per distinct configuration.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    #[arg(long = "id")]
    ids: Vec<String>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_config(tag: &str) -> Result<LabelConfig, String> {
    label_config(tag).ok_or_else(|| {
        let known: Vec<&str> = LABEL_CONFIGS.iter().map(|c| c.tag).collect();
        format!("unknown configuration {tag:?}; expected one of {}", known.join(", "))
    })
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let root = cli.data_root;
    let ws = |manifest: &Path| Workspace::new(manifest, root.clone());
    match cli.command {
        Command::Parse { score, vocal_part } => {
            let doc = parse_musicxml_with(&read_bytes(&score)?, &ParseOptions { vocal_part })?;
            let labels = propagate(&doc)?;
            let out = serde_json::json!({
                "score": doc,
                "note_dynamics": labels.labels,
                "unlabeled_notes": labels.unlabeled,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Filter { scores } => {
            for path in scores {
                match load_score(&path) {
                    Ok(doc) if score_passes_filter(&doc) => println!("{}", path.display()),
                    Ok(_) => {}
                    Err(e) => eprintln!("skipping {}: {e:#}", path.display()),
                }
            }
        }
        Command::Features(args) => stage(&ws(&args.manifest), Stage::Features, &args)?,
        Command::Align(args) => stage(&ws(&args.manifest), Stage::Align, &args)?,
        Command::Label(args) => stage(&ws(&args.manifest), Stage::Label, &args)?,
        Command::Train(args) => run_train(&ws(&args.manifest), &args)?,
        Command::Eval(args) => run_eval(&ws(&args.manifest), &args)?,
        Command::Stats { manifest, scores } => {
            let docs = scores.iter().map(|p| load_score(p)).collect::<anyhow::Result<Vec<_>>>()?;
            let mut out = serde_json::Map::new();
            out.insert("markings".into(), serde_json::to_value(corpus_marking_statistics(&docs))?);
            if let Some(manifest) = manifest {
                let ws = ws(&manifest);
                let records = manifest::load(&manifest)?;
                let mut durations = BTreeMap::new();
                for config in &LABEL_CONFIGS {
                    let files: Vec<_> = match load_labeled(&ws, &records, config, &[]) {
                        Ok(items) => items.into_iter().map(|i| i.labels).collect(),
                        Err(vocadyn::Error::NothingLabeled) => Vec::new(),
                        Err(e) => return Err(e.into()),
                    };
                    durations.insert(config.tag, duration_statistics(&files));
                }
                let mut status = BTreeMap::new();
                for r in &records {
                    *status.entry(r.status.as_str()).or_insert(0usize) += 1;
                }
                out.insert("status".into(), serde_json::to_value(status)?);
                out.insert("labeled_seconds".into(), serde_json::to_value(durations)?);
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Export { manifest, out } => {
            let records = manifest::load(&manifest)?;
            let summary = export_dataset(&ws(&manifest), &records, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Review { command: ReviewCommand::Serve { bind, manifest, static_dir } } => {
            let store = Arc::new(ManifestStore::open(&manifest)?);
            let app = server::router(store, ws(&manifest), static_dir);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
                eprintln!("serving review on http://{}", listener.local_addr()?);
                server::serve(listener, app).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn load_score(path: &Path) -> anyhow::Result<ScoreDocument> {
    let doc = parse_musicxml_with(&read_bytes(path)?, &ParseOptions::default())?;
    Ok(doc)
}

fn stage(ws: &Workspace, stage: Stage, args: &StageArgs) -> anyhow::Result<()> {
    let opts = StageOptions {
        align_source: match args.align_source {
            SourceArg::Mix => AlignSource::Mix,
            SourceArg::Stem => AlignSource::Stem,
        },
        align: AlignConfig { grid_seconds: args.grid, band: args.band },
        calibration_db_spl_fs: args.calibration_db,
    };
    let mut records = manifest::load(&ws.manifest_path)?;
    let report = run_stage_all(ws, &mut records, stage, &opts, &args.ids);
    manifest::save(&ws.manifest_path, &records)?;
    let mut failed = 0;
    for (id, result) in &report {
        match result {
            Ok(status) => println!("{id}: {status}"),
            Err(e) => {
                failed += 1;
                eprintln!("{id}: {} failed: {e}", stage.name());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} record(s) failed", report.len());
    }
    Ok(())
}

fn run_train(ws: &Workspace, args: &TrainArgs) -> anyhow::Result<()> {
    let records = manifest::load(&ws.manifest_path)?;
    let items = load_labeled(ws, &records, &args.config, &args.ids)?;
    let model_config = ModelConfig {
        input_bins: items[0].features.cols,
        sequence_length: args.sequence_length,
        seed: args.seed,
        ..ModelConfig::default()
    };
    let train_items: Vec<TrainItem> =
        items.iter().map(|i| TrainItem { features: &i.features, labels: &i.labels }).collect();
    let class_weights = args.balance.then(|| class_frequency_weights(&train_items));
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        class_weights,
        ..TrainConfig::default()
    };
    let mut log = args.log.as_ref().map(|p| std::fs::File::create(p).map(std::io::BufWriter::new)).transpose()?;
    let mut log_error = None;
    let output = train(init_model::<f32>(&model_config)?, &train_items, &config, |epoch| {
        eprintln!("epoch {:>4}  loss {:.5}  accuracy {:.4}", epoch.epoch, epoch.loss, epoch.masked_accuracy);
        if let Some(w) = log.as_mut() {
            let line = serde_json::to_string(epoch).expect("epoch log serializes");
            if let Err(e) = writeln!(w, "{line}") {
                log_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = log_error {
        return Err(e).context("writing training log");
    }
    if let Some(mut w) = log {
        w.flush()?;
    }
    write_checkpoint(&args.out, &output.params)?;
    Ok(())
}

fn run_eval(ws: &Workspace, args: &EvalArgs) -> anyhow::Result<()> {
    let records = manifest::load(&ws.manifest_path)?;
    let mut runs = Vec::new();
    for spec in &args.runs {
        let (checkpoint, tag) = spec.rsplit_once(':').with_context(|| format!("expected CHECKPOINT:TAG, got {spec:?}"))?;
        let config = parse_config(tag).map_err(anyhow::Error::msg)?;
        let params = read_checkpoint(Path::new(checkpoint))?;
        let run = RunConfig {
            feature: config.kind,
            sequence_length: params.config.sequence_length,
            hop_seconds: config.hop_seconds,
        };
        for item in load_labeled(ws, &records, &config, &args.ids)? {
            runs.push((predict(&params, &item.features)?, item.labels, run));
        }
    }
    let table = build_report(&runs)?;
    print!("{}", table.render_text());
    if let Some(path) = &args.json {
        write_json(path, &table)?;
    }
    Ok(())
}
