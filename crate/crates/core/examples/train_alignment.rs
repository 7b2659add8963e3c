//! Trains the alignment network on ten source models of a synthetic world and
//! reports held-out AUC and the effective rank of each model's embeddings.
//!
//! cargo run --release --example train_alignment -- [seed]

use std::time::Instant;

use bench_compress::align::{forward_embed, train_alignment, TrainConfig};
use bench_compress::analysis::pca_decompose;
use bench_compress::dataio::{generate_synthetic, split_items, SynthConfig};

fn main() -> bench_compress::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let world = generate_synthetic(&SynthConfig::default(), seed)?;
    let sources: Vec<String> = world.responses.model_names()[..10].to_vec();
    let store = world.store.select(&sources)?;
    let split = split_items(store.num_items(), (0.7, 0.1, 0.2), seed)?;

    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (network, report) = train_alignment(&store, &world.responses, &split, &config)?;
    println!(
        "trained {} epochs in {:.1?} (best epoch {})",
        report.epochs_run,
        start.elapsed(),
        report.best_epoch
    );
    println!("validation AUC {:?}, test AUC {:?}", report.best_val_auc, report.test_auc);

    let emb = forward_embed(&network, &store)?;
    for (m, name) in emb.model_names.iter().enumerate() {
        let pca = pca_decompose(emb.model(m))?;
        println!("{name}: effective rank {}", pca.effective_rank_99);
    }
    Ok(())
}
