use bench_compress::align::TrainConfig;
use bench_compress::coreset::SelectionMethod;
use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};
use bench_compress::extrap::FeatureMode;
use bench_compress::runner::{
    choose_sources, load_cells, emit_reports, run_experiment, run_pipeline, ExperimentConfig, SourcePolicy,
    CELLS_CSV,
};

fn small_world(seed: u64) -> Dataset {
    let synth = SynthConfig {
        num_items: 200,
        num_models: 16,
        ..SynthConfig::default()
    };
    Dataset::from(generate_synthetic(&synth, seed).unwrap())
}

fn quick_config() -> ExperimentConfig {
    ExperimentConfig {
        num_source: 5,
        budgets: vec![10, 20],
        repeats: 2,
        train: TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn random_selector_skips_training() {
    let data = small_world(1);
    let (state, cell) = run_pipeline(&data, &quick_config(), SelectionMethod::Random, 10, None).unwrap();
    assert!(state.network.is_none());
    assert!(state.embeddings.is_none());
    assert_eq!(cell.coreset.len(), 10);
    assert!(cell.eval.targets.iter().all(|t| t.agreement.is_none()));
}

#[test]
fn repcore_pipeline_writes_artifacts() {
    let data = small_world(2);
    let dir = tempfile::tempdir().unwrap();
    let (state, cell) = run_pipeline(&data, &quick_config(), SelectionMethod::Repcore, 12, Some(dir.path())).unwrap();
    assert!(state.network.is_some());
    assert_eq!(cell.coreset.len(), 12);
    assert_eq!(cell.eval.targets.len(), 11);
    for t in &cell.eval.targets {
        assert!((0.0..=1.0).contains(&t.estimated));
        assert!(t.agreement.is_some());
    }
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for f in ["sources.json", "coreset.json", "targets.csv", "summary.json"] {
        assert!(names.iter().any(|n| n == f), "missing {f} in {names:?}");
    }
}

#[test]
fn full_budget_has_zero_error() {
    let data = small_world(3);
    let config = ExperimentConfig {
        feature_mode: FeatureMode::MeanCorrectness,
        ..quick_config()
    };
    let (_, cell) = run_pipeline(&data, &config, SelectionMethod::BinaryKmeans, 200, None).unwrap();
    assert_eq!(cell.eval.summary.mae, 0.0);
}

#[test]
fn embedding_features_run_end_to_end() {
    let data = small_world(4);
    let config = ExperimentConfig {
        feature_mode: FeatureMode::PcSubspace(vec![1, 2]),
        ..quick_config()
    };
    let (state, cell) = run_pipeline(&data, &config, SelectionMethod::Random, 15, None).unwrap();
    assert!(state.consensus.is_some());
    assert_eq!(state.features.dim(), 2);
    assert_eq!(cell.eval.targets.len(), 11);
}

#[test]
fn source_policies() {
    let data = small_world(5);
    let oldest = choose_sources(&data, &SourcePolicy::OldestFraction(0.3), 0, 0).unwrap();
    assert_eq!(oldest.sources.len(), 4);
    assert_eq!(oldest.sources.len() + oldest.targets.len(), 16);

    let strong = choose_sources(&data, &SourcePolicy::Capability(bench_compress::runner::Capability::Strong), 5, 0).unwrap();
    let score = |n: &String| data.models.get(n).unwrap().overall_score.unwrap();
    let weakest_source = strong.sources.iter().map(score).fold(f64::INFINITY, f64::min);
    let strongest_target = strong.targets.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
    assert!(weakest_source >= strongest_target);

    let fam = choose_sources(&data, &SourcePolicy::Family("fam0".into()), 2, 0).unwrap();
    assert!(fam.sources.iter().all(|n| data.models.get(n).unwrap().family.as_deref() == Some("fam0")));
    let err = choose_sources(&data, &SourcePolicy::Family("nope".into()), 2, 0).unwrap_err();
    assert!(err.to_string().contains("nope"));
}

#[test]
fn experiment_reports_roundtrip() {
    let data = small_world(6);
    let config = quick_config();
    let table = run_experiment(&data, &config).unwrap();
    assert_eq!(table.rows.len(), 3 * 2 * 2);
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&table, dir.path()).unwrap();
    let back = load_cells(dir.path().join(CELLS_CSV)).unwrap();
    assert_eq!(back.len(), table.rows.len());
    for (a, b) in back.iter().zip(&table.rows) {
        assert_eq!(a.selector, b.selector);
        assert_eq!(a.k, b.k);
        assert_eq!(a.repeat, b.repeat);
    }
}

#[test]
fn oversized_budget_fails_in_select() {
    let data = small_world(7);
    let err = run_pipeline(&data, &quick_config(), SelectionMethod::Random, 500, None).unwrap_err();
    assert_eq!(err.stage(), Some("select"));
}
