use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use scenerag::answer::{Answerer, ExternalAnswerer, ExternalConfig, TemplateAnswerer};
use scenerag::embedding::HashEmbedderConfig;
use scenerag::eval::{compare_models, evaluate, k_sweep};
use scenerag::knowledge_db::{KnowledgeDatabase, SharedDatabase, Snapshot, DEFAULT_K};
use scenerag::qa_corpus::{
    build_training_samples, generate_questions, read_jsonl, write_jsonl, CorpusConfig,
    QuestionRecord, SampleConfig,
};
use scenerag::scene::{generate_synthetic_scene, save_scene, vocab, Quaternion, UserPose};
use scenerag::service::{serve, Client, LatencyReport, LatencySample, QueryRequest, DEFAULT_BIND};
use scenerag::two_tower::{
    load_model, save_model, train, TrainConfig, TrainingSample, TwoTowerModel, DEFAULT_HIDDEN,
    DEFAULT_OUTPUT,
};

#[derive(Parser)]
#[command(
    name = "scenerag",
    version,
    about = "Retrieval-augmented question answering over 3D scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Entries retrieved per question.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Model checkpoint; commands that need a model fall back to an untrained one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Scene file, optionally carrying a `user_pose` block.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Vocab {
    Office,
    Villa,
    Restaurant,
    Grocery,
    Viking,
}

impl Vocab {
    fn words(self) -> &'static [&'static str] {
        match self {
            Vocab::Office => vocab::OFFICE,
            Vocab::Villa => vocab::VILLA,
            Vocab::Restaurant => vocab::RESTAURANT,
            Vocab::Grocery => vocab::GROCERY,
            Vocab::Viking => vocab::VIKING,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnswererKind {
    Template,
    External,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene file.
    GenScene {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "office")]
        name: String,
        #[arg(long, value_enum, default_value = "office")]
        vocab: Vocab,
        #[arg(long, default_value_t = 18)]
        categories: usize,
        #[arg(long, default_value_t = 34)]
        instances: usize,
    },
    /// Generate templated questions with ground truths (JSON lines).
    GenCorpus {
        #[command(flatten)]
        common: Common,
        /// Keep every distinct question instead of the reference single:multi ratio.
        #[arg(long, conflicts_with_all = ["single", "multi"])]
        all: bool,
        #[arg(long, requires = "multi")]
        single: Option<usize>,
        #[arg(long, requires = "single")]
        multi: Option<usize>,
    },
    /// Label question/information pairs for training (JSON lines).
    BuildSamples {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        negatives: usize,
        #[arg(long, default_value_t = 1)]
        hard_negatives: usize,
    },
    /// Train the two-tower retriever.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        hneg_weight: Option<f64>,
        /// Learning rate 1e-5 and 6 epochs.
        #[arg(long)]
        reference_preset: bool,
        #[arg(long, default_value_t = 256)]
        dimension: usize,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = DEFAULT_OUTPUT)]
        output_dim: usize,
    },
    /// Evaluate accuracy and recall@k on a corpus.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Evaluate for k = 1..=k-max.
    SweepK {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        k_max: usize,
    },
    /// Compare a trained checkpoint with its untrained initialization.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Serve queries over newline-delimited JSON.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
        #[arg(long, value_enum, default_value = "template")]
        answerer: AnswererKind,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        llm_model: Option<String>,
        #[arg(long)]
        api_key_env: Option<String>,
    },
    /// Send questions to a running server and report latencies.
    Ask {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
        #[arg(long)]
        question: String,
        /// Player position `x,y,z`.
        #[arg(long, default_value = "0,0,0")]
        position: String,
        /// Player orientation `qx,qy,qz,qw`.
        #[arg(long, default_value = "0,0,0,1")]
        orientation: String,
        /// Send the question this many times and report mean latencies.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn need<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .with_context(|| format!("--{flag} is required"))
}

fn model_for(common: &Common) -> Result<TwoTowerModel> {
    match &common.model {
        Some(path) => Ok(load_model(path)?),
        None => Ok(TwoTowerModel::with_defaults(common.seed)),
    }
}

fn snapshot_for(common: &Common) -> Result<Snapshot> {
    Ok(Snapshot::load(need(&common.scene, "scene")?)?)
}

fn database(snapshot: &Snapshot, model: TwoTowerModel) -> Result<SharedDatabase> {
    Ok(SharedDatabase::new(KnowledgeDatabase::from_snapshot(
        snapshot,
        Arc::new(model),
    )?))
}

fn parse_floats<const N: usize>(text: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("{what} must be {N} comma-separated numbers"))?;
    parts
        .try_into()
        .map_err(|_| anyhow::anyhow!("{what} must be {N} comma-separated numbers"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenScene {
            common,
            name,
            vocab,
            categories,
            instances,
        } => {
            let scene =
                generate_synthetic_scene(&name, common.seed, categories, instances, vocab.words())?;
            match &common.out {
                Some(path) => save_scene(&scene, path)?,
                None => println!("{}", scene.to_json()?),
            }
        }
        Command::GenCorpus {
            common,
            all,
            single,
            multi,
        } => {
            let snap = snapshot_for(&common)?;
            let config = match (all, single, multi) {
                (true, _, _) => CorpusConfig::All,
                (false, Some(single), Some(multi)) => CorpusConfig::Counts { single, multi },
                _ => CorpusConfig::ReferenceRatio,
            };
            let questions =
                generate_questions(&snap.scene(), &snap.user_pose, common.seed, &config)?;
            write_lines(&questions, common.out.as_deref())?;
        }
        Command::BuildSamples {
            common,
            corpus,
            negatives,
            hard_negatives,
        } => {
            let snap = snapshot_for(&common)?;
            let questions: Vec<QuestionRecord> = read_jsonl(&corpus)?;
            let cfg = SampleConfig {
                negatives,
                hard_negatives,
            };
            let samples = build_training_samples(&questions, &snap.scene(), &cfg, common.seed)?;
            write_lines(&samples, common.out.as_deref())?;
        }
        Command::Train {
            common,
            samples,
            epochs,
            lr,
            margin,
            hneg_weight,
            reference_preset,
            dimension,
            hidden,
            output_dim,
        } => {
            let xs: Vec<TrainingSample> = read_jsonl(&samples)?;
            let mut cfg = if reference_preset {
                TrainConfig::reference_preset()
            } else {
                TrainConfig::default()
            };
            cfg.seed = common.seed;
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.learning_rate = lr.unwrap_or(cfg.learning_rate);
            cfg.margin = margin.unwrap_or(cfg.margin);
            cfg.hard_negative_weight = hneg_weight.unwrap_or(cfg.hard_negative_weight);
            let initial = match &common.model {
                Some(path) => load_model(path)?,
                None => TwoTowerModel::new(
                    HashEmbedderConfig { dimension, seed: 0 },
                    hidden,
                    output_dim,
                    common.seed,
                ),
            };
            let outcome = train(&initial, &xs, &cfg)?;
            let out = need(&common.out, "out")?;
            save_model(&outcome.model, out)?;
            println!(
                "{}",
                json!({
                    "model": out,
                    "fingerprint": outcome.model.fingerprint(),
                    "samples": xs.len(),
                    "config": cfg,
                    "initial_loss": outcome.loss_history.first(),
                    "final_loss": outcome.loss_history.last(),
                })
            );
        }
        Command::Eval { common, corpus } => {
            let snap = snapshot_for(&common)?;
            let questions: Vec<QuestionRecord> = read_jsonl(&corpus)?;
            let db = database(&snap, model_for(&common)?)?;
            let mut report = evaluate(
                &db,
                &TemplateAnswerer,
                &questions,
                common.k,
                &snap.user_pose,
            )?;
            report.seed = Some(common.seed);
            eprint!("{}", report.summary());
            emit(common.out.as_deref(), &report.to_json()?)?;
        }
        Command::SweepK {
            common,
            corpus,
            k_max,
        } => {
            let snap = snapshot_for(&common)?;
            let questions: Vec<QuestionRecord> = read_jsonl(&corpus)?;
            let db = database(&snap, model_for(&common)?)?;
            let ks: Vec<usize> = (1..=k_max).collect();
            let sweep = k_sweep(&db, &TemplateAnswerer, &questions, &ks, &snap.user_pose)?;
            eprint!("{}", sweep.summary());
            emit(
                common.out.as_deref(),
                &serde_json::to_string_pretty(&sweep)?,
            )?;
        }
        Command::Compare { common, corpus } => {
            let snap = snapshot_for(&common)?;
            let questions: Vec<QuestionRecord> = read_jsonl(&corpus)?;
            let trained = load_model(need(&common.model, "model")?)?;
            let baseline = database(&snap, trained.reinitialized())?;
            let trained = database(&snap, trained)?;
            let cmp = compare_models(
                &baseline,
                &trained,
                &TemplateAnswerer,
                &questions,
                common.k,
                &snap.user_pose,
            )?;
            eprint!("{}", cmp.summary());
            emit(common.out.as_deref(), &serde_json::to_string_pretty(&cmp)?)?;
        }
        Command::Serve {
            common,
            bind,
            answerer,
            endpoint,
            llm_model,
            api_key_env,
        } => {
            let snap = snapshot_for(&common)?;
            let db = database(&snap, model_for(&common)?)?;
            let answerer: Arc<dyn Answerer> = match answerer {
                AnswererKind::Template => Arc::new(TemplateAnswerer),
                AnswererKind::External => {
                    let defaults = ExternalConfig::default();
                    Arc::new(ExternalAnswerer::new(ExternalConfig {
                        endpoint: endpoint.unwrap_or(defaults.endpoint),
                        model: llm_model.unwrap_or(defaults.model),
                        api_key_env: api_key_env.or(defaults.api_key_env),
                        ..defaults
                    }))
                }
            };
            let server = serve(db, answerer, bind.as_str())?;
            let stop = server.stop_flag();
            ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed))?;
            eprintln!("{}", json!({"listening": server.local_addr().to_string()}));
            server.wait();
        }
        Command::Ask {
            common,
            bind,
            question,
            position,
            orientation,
            repeat,
        } => {
            if repeat == 0 {
                bail!("--repeat must be at least 1");
            }
            let q = parse_floats::<4>(&orientation, "--orientation")?;
            let pose = UserPose::new(
                parse_floats::<3>(&position, "--position")?,
                Quaternion::new(q[0], q[1], q[2], q[3]),
            );
            let mut client = Client::connect(bind.as_str(), Duration::from_secs(30))?;
            let mut samples = Vec::with_capacity(repeat);
            let mut last = None;
            for i in 0..repeat {
                let reply = client.query(&QueryRequest {
                    request_id: format!("ask-{}-{i}", common.seed),
                    question: question.clone(),
                    user_pose: pose,
                    k: Some(common.k),
                })?;
                samples.push(LatencySample::from(&reply));
                last = Some(reply.response);
            }
            let latency = LatencyReport::from_samples(samples)?;
            eprintln!("{}", latency.summary());
            let out = json!({"response": last, "latency": latency});
            emit(common.out.as_deref(), &serde_json::to_string_pretty(&out)?)?;
        }
    }
    Ok(())
}

fn write_lines<T: serde::Serialize>(items: &[T], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => Ok(write_jsonl(items, path)?),
        None => {
            for item in items {
                println!("{}", serde_json::to_string(item)?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({"error": format!("{err:#}")}));
            ExitCode::FAILURE
        }
    }
}
