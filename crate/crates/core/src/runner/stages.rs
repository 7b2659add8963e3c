use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Capability, ExperimentConfig, SourcePolicy};
use crate::align::{forward_embed, train_alignment, AlignedEmbeddings, AlignmentNetwork, TrainConfig, TrainReport};
use crate::coreset::{
    consensus_embeddings, select_anchors, select_binary_kmeans, select_random, spherical_kmeans,
    ConsensusEmbeddings, Coreset, SelectionMethod,
};
use crate::dataio::{split_items, Dataset, ResponseMatrix};
use crate::error::{Error, Result, StageExt};
use crate::extrap::{
    agreement, build_features, coreset_mean_estimate, estimate_accuracy, fit_on_coreset, EvalResult,
    FeatureMode, FeatureSpec, TargetEval,
};

pub const SOURCES_JSON: &str = "sources.json";
pub const NETWORK_STEM: &str = "network";
pub const TRAIN_REPORT_JSON: &str = "train_report.json";
pub const EMBEDDINGS_STEM: &str = "embeddings";
pub const CORESET_JSON: &str = "coreset.json";
pub const TARGETS_CSV: &str = "targets.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Source and target model names, each in pool order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSplit {
    pub seed: u64,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
}

impl SourceSplit {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serializable"))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Applies the source policy; every model not chosen becomes a target.
pub fn choose_sources(data: &Dataset, policy: &SourcePolicy, num_source: usize, seed: u64) -> Result<SourceSplit> {
    let names = data.responses.model_names();
    let m = names.len();
    let info = |name: &str| {
        data.models
            .get(name)
            .ok_or_else(|| Error::UnknownModel(format!("{name} (no metadata)")))
    };
    let draw = |pool: Vec<usize>, count: usize| -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, pool.len(), count)
            .into_iter()
            .map(|j| pool[j])
            .collect()
    };
    let need = |available: usize, what: &str| -> Result<()> {
        if num_source == 0 || num_source > available || num_source >= m {
            return Err(Error::InvalidConfig(format!(
                "{what} offers {available} models, cannot take {num_source} sources and leave a target"
            )));
        }
        Ok(())
    };
    let chosen: Vec<usize> = match policy {
        SourcePolicy::Random => {
            need(m, "the model pool")?;
            draw((0..m).collect(), num_source)
        }
        SourcePolicy::Family(family) => {
            let mut members = Vec::new();
            for (k, n) in names.iter().enumerate() {
                if info(n)?.family.as_deref() == Some(family.as_str()) {
                    members.push(k);
                }
            }
            need(members.len(), &format!("family `{family}`"))?;
            draw(members, num_source)
        }
        SourcePolicy::Capability(side) => {
            need(m, "the model pool")?;
            let mut scored = Vec::with_capacity(m);
            for (k, n) in names.iter().enumerate() {
                let s = info(n)?.overall_score.ok_or_else(|| {
                    Error::InvalidConfig(format!("model `{n}` has no overall_score"))
                })?;
                scored.push((k, s));
            }
            scored.sort_by(|a, b| match side {
                Capability::Strong => b.1.total_cmp(&a.1),
                Capability::Weak => a.1.total_cmp(&b.1),
            }
            .then_with(|| names[a.0].cmp(&names[b.0])));
            scored.into_iter().take(num_source).map(|(k, _)| k).collect()
        }
        SourcePolicy::OldestFraction(f) => {
            let count = (f * m as f64 + 1e-9).floor() as usize;
            if count == 0 || count >= m {
                return Err(Error::InvalidConfig(format!(
                    "oldest fraction {f} of {m} models leaves {count} sources"
                )));
            }
            let mut dated = Vec::with_capacity(m);
            for (k, n) in names.iter().enumerate() {
                let d = info(n)?.release_date.ok_or_else(|| {
                    Error::InvalidConfig(format!("model `{n}` has no release_date"))
                })?;
                dated.push((k, d));
            }
            dated.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| names[a.0].cmp(&names[b.0])));
            dated.into_iter().take(count).map(|(k, _)| k).collect()
        }
    };
    let mut is_source = vec![false; m];
    for k in chosen {
        is_source[k] = true;
    }
    let pick = |want: bool| -> Vec<String> {
        names
            .iter()
            .zip(&is_source)
            .filter(|(_, &s)| s == want)
            .map(|(n, _)| n.clone())
            .collect()
    };
    Ok(SourceSplit {
        seed,
        sources: pick(true),
        targets: pick(false),
    })
}

/// Alignment network trained on the sources, with its report.
pub fn train_stage(
    data: &Dataset,
    split: &SourceSplit,
    fractions: (f64, f64, f64),
    train: &TrainConfig,
    seed: u64,
) -> Result<(AlignmentNetwork, TrainReport)> {
    let store = data.store.select(&split.sources)?;
    let items = split_items(store.num_items(), fractions, seed)?;
    let config = TrainConfig {
        seed,
        ..train.clone()
    };
    train_alignment(&store, &data.responses, &items, &config)
}

pub fn embed_stage(data: &Dataset, split: &SourceSplit, network: &AlignmentNetwork) -> Result<AlignedEmbeddings> {
    if network.model_names != split.sources {
        return Err(Error::InvalidArgument(
            "network was trained on a different source set".into(),
        ));
    }
    forward_embed(network, &data.store.select(&split.sources)?)
}

pub fn select_stage(
    source_responses: &ResponseMatrix,
    consensus: Option<&ConsensusEmbeddings>,
    method: SelectionMethod,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Coreset> {
    match method {
        SelectionMethod::Repcore => {
            let emb = consensus.ok_or_else(|| {
                Error::InvalidArgument("repcore selection needs aligned embeddings".into())
            })?;
            let clustering = spherical_kmeans(emb, k, seed, restarts)?;
            select_anchors(&clustering, emb, seed)
        }
        SelectionMethod::Random => select_random(source_responses.num_items(), k, seed),
        SelectionMethod::BinaryKmeans => select_binary_kmeans(source_responses, k, seed, restarts),
    }
}

/// Per-target estimates; the random selector uses its coreset mean unless
/// `random_extrapolates` is set.
pub fn extrapolate_stage(
    responses: &ResponseMatrix,
    targets: &[String],
    features: &FeatureSpec,
    coreset: &Coreset,
    lambda: f64,
    random_extrapolates: bool,
) -> Result<EvalResult> {
    let n = responses.num_items();
    let use_ridge = coreset.method != SelectionMethod::Random || random_extrapolates;
    let mut rows = Vec::with_capacity(targets.len());
    for name in targets {
        let y = responses.row_by_name(name)?;
        let scores: Vec<u8> = coreset.anchors.iter().map(|&a| y[a]).collect();
        let truth = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        let (estimated, agree) = if use_ridge {
            let model = fit_on_coreset(features, coreset, &scores, lambda)
                .map_err(|e| e.with_context(format!("target `{name}`")))?;
            let est = estimate_accuracy(&model, features, coreset, &scores)?;
            let agree = if coreset.len() < n {
                Some(agreement(&model, features, coreset, y)?)
            } else {
                None
            };
            (est, agree)
        } else {
            (coreset_mean_estimate(&scores)?, None)
        };
        rows.push(TargetEval {
            model: name.clone(),
            estimated,
            truth,
            agreement: agree,
        });
    }
    EvalResult::from_targets(rows)
}

/// Everything shared by the cells of one repeat.
#[derive(Debug, Clone)]
pub struct RepeatState {
    pub seed: u64,
    pub split: SourceSplit,
    pub source_responses: ResponseMatrix,
    pub network: Option<(AlignmentNetwork, TrainReport)>,
    pub embeddings: Option<AlignedEmbeddings>,
    pub consensus: Option<ConsensusEmbeddings>,
    pub features: FeatureSpec,
}

/// Output of one (selector, K) cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub coreset: Coreset,
    pub eval: EvalResult,
}

fn needs_alignment(methods: &[SelectionMethod], mode: &FeatureMode) -> bool {
    methods.contains(&SelectionMethod::Repcore) || mode.needs_embeddings()
}

/// Draws sources and, when any selector or feature mode needs it, trains and embeds.
pub fn prepare_repeat(
    data: &Dataset,
    config: &ExperimentConfig,
    methods: &[SelectionMethod],
    seed: u64,
) -> Result<RepeatState> {
    let split = choose_sources(data, &config.source_policy, config.num_source, seed).stage("sources")?;
    let source_responses = data.responses.select(&split.sources).stage("sources")?;
    let (network, embeddings, consensus) = if needs_alignment(methods, &config.feature_mode) {
        let trained = train_stage(data, &split, config.split, &config.train, seed).stage("train")?;
        let emb = embed_stage(data, &split, &trained.0).stage("embed")?;
        let cons = consensus_embeddings(&emb);
        (Some(trained), Some(emb), Some(cons))
    } else {
        (None, None, None)
    };
    let features =
        build_features(&config.feature_mode, &source_responses, consensus.as_ref()).stage("features")?;
    Ok(RepeatState {
        seed,
        split,
        source_responses,
        network,
        embeddings,
        consensus,
        features,
    })
}

pub fn run_cell(
    data: &Dataset,
    state: &RepeatState,
    config: &ExperimentConfig,
    method: SelectionMethod,
    k: usize,
) -> Result<CellOutcome> {
    let coreset = select_stage(
        &state.source_responses,
        state.consensus.as_ref(),
        method,
        k,
        state.seed,
        config.restarts,
    )
    .stage("select")?;
    let eval = extrapolate_stage(
        &data.responses,
        &state.split.targets,
        &state.features,
        &coreset,
        config.lambda,
        config.random_extrapolates,
    )
    .stage("extrapolate")?;
    Ok(CellOutcome { coreset, eval })
}

/// One full pass for a single selector and budget, writing every artifact to `out`.
pub fn run_pipeline(
    data: &Dataset,
    config: &ExperimentConfig,
    method: SelectionMethod,
    k: usize,
    out: Option<&Path>,
) -> Result<(RepeatState, CellOutcome)> {
    config
        .validate_for(data.responses.num_models(), data.responses.num_items())
        .stage("config")?;
    let state = prepare_repeat(data, config, &[method], config.seed)?;
    let cell = run_cell(data, &state, config, method, k)?;
    if let Some(dir) = out {
        write_artifacts(dir, &state, &cell).stage("write")?;
    }
    Ok((state, cell))
}

pub fn write_artifacts(dir: &Path, state: &RepeatState, cell: &CellOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    state.split.save(dir.join(SOURCES_JSON))?;
    if let Some((network, report)) = &state.network {
        network.save(dir, NETWORK_STEM)?;
        let p = dir.join(TRAIN_REPORT_JSON);
        std::fs::write(&p, serde_json::to_string_pretty(report).expect("serializable"))
            .map_err(|e| Error::io(&p, e))?;
    }
    if let Some(emb) = &state.embeddings {
        emb.save(dir, EMBEDDINGS_STEM)?;
    }
    cell.coreset.save(dir.join(CORESET_JSON))?;
    cell.eval.save_targets(dir.join(TARGETS_CSV))?;
    cell.eval.save_summary(dir.join(SUMMARY_JSON))
}
