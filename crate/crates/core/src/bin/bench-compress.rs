use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bench_compress::align::{AlignedEmbeddings, AlignmentNetwork};
use bench_compress::analysis::{run_association_suite, ItemFactors, StratifyOptions, SuiteOptions};
use bench_compress::coreset::{consensus_embeddings, Coreset, SelectionMethod};
use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};
use bench_compress::extrap::{build_features, EvalResult, FeatureMode};
use bench_compress::runner::{
    choose_sources, embed_stage, emit_reports, extrapolate_stage, run_experiment, select_stage, train_stage,
    ExperimentConfig, SourcePolicy, SourceSplit, CORESET_JSON, EMBEDDINGS_STEM, NETWORK_STEM, SOURCES_JSON,
    SUMMARY_JSON, TARGETS_CSV, TRAIN_REPORT_JSON,
};
use bench_compress::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Benchmark compression from model hidden states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Data directory (hidden_states.json, responses.csv, items.csv, models.csv).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output and artifact directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic world to --out.
    GenSynth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        models: Option<usize>,
    },
    /// Choose sources and train the alignment network.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sources: Option<usize>,
        #[arg(long)]
        policy: Option<SourcePolicy>,
    },
    /// Embed every item under every source with the trained network.
    Embed {
        #[command(flatten)]
        common: Common,
    },
    /// Select a coreset.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "repcore")]
        method: SelectionMethod,
        #[arg(long)]
        k: usize,
    },
    /// Estimate every target's accuracy from its coreset scores.
    Extrapolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: Option<FeatureMode>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Summarize per-target estimates into rank correlation, MAE and agreement.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Factor-association analysis of the aligned embeddings.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        components: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Repeated source/target splits over selectors and budgets.
    RunExperiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sources: Option<usize>,
        /// Comma-separated coreset sizes.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        policy: Option<SourcePolicy>,
        /// Comma-separated selectors.
        #[arg(long, value_delimiter = ',')]
        selectors: Option<Vec<SelectionMethod>>,
    },
}

fn config(common: &Common, apply: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig {
        data: common.data.clone(),
        out: Some(common.out.clone()),
        ..Default::default()
    };
    if let Some(seed) = common.seed {
        c.seed = seed;
    }
    apply(&mut c);
    match &common.config {
        Some(path) => c.overlay_file(path),
        None => Ok(c),
    }
}

fn dataset(c: &ExperimentConfig) -> Result<Dataset> {
    let dir = c.data.as_ref().ok_or_else(|| Error::InvalidArgument("--data is required".into()))?;
    Dataset::load(dir)
}

fn out_dir(c: &ExperimentConfig) -> Result<&Path> {
    let dir = c.out.as_deref().expect("--out is required by clap");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn write_json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynth { common, items, models } => {
            let mut synth = match &common.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?
                }
                None => SynthConfig::default(),
            };
            if common.config.is_none() {
                synth.num_items = items.unwrap_or(synth.num_items);
                synth.num_models = models.unwrap_or(synth.num_models);
            }
            let world = generate_synthetic(&synth, common.seed.unwrap_or(0))?;
            world.save(&common.out)?;
            println!("wrote {} models x {} items to {}", synth.num_models, synth.num_items, common.out.display());
        }
        Command::Train { common, sources, policy } => {
            let c = config(&common, |c| {
                c.num_source = sources.unwrap_or(c.num_source);
                c.source_policy = policy.unwrap_or(c.source_policy.clone());
            })?;
            let data = dataset(&c)?;
            c.validate_for(data.responses.num_models(), data.responses.num_items())?;
            let dir = out_dir(&c)?;
            let split = choose_sources(&data, &c.source_policy, c.num_source, c.seed)?;
            let (network, report) = train_stage(&data, &split, c.split, &c.train, c.seed)?;
            split.save(dir.join(SOURCES_JSON))?;
            network.save(dir, NETWORK_STEM)?;
            write_json(dir.join(TRAIN_REPORT_JSON), &report)?;
            println!(
                "trained on {} sources for {} epochs; validation AUC {:?}, test AUC {:?}",
                split.sources.len(),
                report.epochs_run,
                report.best_val_auc,
                report.test_auc
            );
        }
        Command::Embed { common } => {
            let c = config(&common, |_| {})?;
            let data = dataset(&c)?;
            let dir = out_dir(&c)?;
            let split = SourceSplit::load(dir.join(SOURCES_JSON))?;
            let network = AlignmentNetwork::load(dir.join(format!("{NETWORK_STEM}.json")))?;
            let emb = embed_stage(&data, &split, &network)?;
            emb.save(dir, EMBEDDINGS_STEM)?;
            println!("embedded {} items under {} models", emb.num_items(), emb.num_models());
        }
        Command::Select { common, method, k } => {
            let c = config(&common, |_| {})?;
            let data = dataset(&c)?;
            let dir = out_dir(&c)?;
            let split = SourceSplit::load(dir.join(SOURCES_JSON))?;
            let source_responses = data.responses.select(&split.sources)?;
            let consensus = if method == SelectionMethod::Repcore {
                Some(consensus_embeddings(&load_embeddings(dir)?))
            } else {
                None
            };
            let coreset = select_stage(&source_responses, consensus.as_ref(), method, k, c.seed, c.restarts)?;
            coreset.save(dir.join(CORESET_JSON))?;
            println!("{method} coreset: {:?}", coreset.anchors);
        }
        Command::Extrapolate { common, features, lambda } => {
            let c = config(&common, |c| {
                c.feature_mode = features.unwrap_or(c.feature_mode.clone());
                c.lambda = lambda.unwrap_or(c.lambda);
            })?;
            let data = dataset(&c)?;
            let dir = out_dir(&c)?;
            let split = SourceSplit::load(dir.join(SOURCES_JSON))?;
            let coreset = Coreset::load(dir.join(CORESET_JSON))?;
            let source_responses = data.responses.select(&split.sources)?;
            let consensus = if c.feature_mode.needs_embeddings() {
                Some(consensus_embeddings(&load_embeddings(dir)?))
            } else {
                None
            };
            let feats = build_features(&c.feature_mode, &source_responses, consensus.as_ref())?;
            let eval = extrapolate_stage(
                &data.responses,
                &split.targets,
                &feats,
                &coreset,
                c.lambda,
                c.random_extrapolates,
            )?;
            eval.save_targets(dir.join(TARGETS_CSV))?;
            println!("estimated {} targets", eval.targets.len());
        }
        Command::Evaluate { common } => {
            let dir = common.out;
            let eval = EvalResult::from_targets(EvalResult::load_targets(dir.join(TARGETS_CSV))?)?;
            eval.save_summary(dir.join(SUMMARY_JSON))?;
            println!("{}", serde_json::to_string_pretty(&eval.summary).expect("serializable"));
        }
        Command::Analyze { common, components, bins } => {
            let c = config(&common, |_| {})?;
            let data = dataset(&c)?;
            let dir = out_dir(&c)?;
            let emb = load_embeddings(dir)?;
            let factors = ItemFactors::from_responses(&data.responses, &data.items)?;
            let options = SuiteOptions {
                components,
                stratify: StratifyOptions {
                    bins,
                    ..Default::default()
                },
            };
            let report = run_association_suite(&emb, &factors, &options)?;
            let (rows, agg) = report.save(dir)?;
            println!("wrote {} and {}", rows.display(), agg.display());
        }
        Command::RunExperiment {
            common,
            sources,
            budgets,
            repeats,
            policy,
            selectors,
        } => {
            let c = config(&common, |c| {
                c.num_source = sources.unwrap_or(c.num_source);
                c.budgets = budgets.unwrap_or(c.budgets.clone());
                c.repeats = repeats.unwrap_or(c.repeats);
                c.source_policy = policy.unwrap_or(c.source_policy.clone());
                c.selectors = selectors.unwrap_or(c.selectors.clone());
            })?;
            let data = dataset(&c)?;
            let table = run_experiment(&data, &c)?;
            for p in emit_reports(&table, out_dir(&c)?)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn load_embeddings(dir: &Path) -> Result<AlignedEmbeddings> {
    AlignedEmbeddings::load(dir.join(format!("{EMBEDDINGS_STEM}.json")))
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::GenSynth { .. } => "gen-synth",
        Command::Train { .. } => "train",
        Command::Embed { .. } => "embed",
        Command::Select { .. } => "select",
        Command::Extrapolate { .. } => "extrapolate",
        Command::Evaluate { .. } => "evaluate",
        Command::Analyze { .. } => "analyze",
        Command::RunExperiment { .. } => "run-experiment",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = stage_name(&cli.command);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let e = if e.stage().is_some() { e } else { e.in_stage(stage) };
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
