//! Picks K anchor items with each selector and shows how the repcore anchors
//! spread over the world's task clusters.
//!
//! cargo run --release --example select_coreset -- [k]

use bench_compress::align::TrainConfig;
use bench_compress::coreset::{consensus_embeddings, SelectionMethod};
use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};
use bench_compress::runner::{choose_sources, embed_stage, select_stage, train_stage, SourcePolicy};

fn main() -> bench_compress::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let world = generate_synthetic(&SynthConfig::default(), 3)?;
    let clusters = world.truth.cluster.clone();
    let data = Dataset::from(world);

    let split = choose_sources(&data, &SourcePolicy::Random, 10, 3)?;
    let (network, _) = train_stage(&data, &split, (0.7, 0.1, 0.2), &TrainConfig::default(), 3)?;
    let consensus = consensus_embeddings(&embed_stage(&data, &split, &network)?);
    let sources = data.responses.select(&split.sources)?;

    for method in [SelectionMethod::Repcore, SelectionMethod::Random, SelectionMethod::BinaryKmeans] {
        let coreset = select_stage(&sources, Some(&consensus), method, k, 3, 10)?;
        let mut per_cluster = vec![0usize; 5];
        for &a in &coreset.anchors {
            per_cluster[clusters[a]] += 1;
        }
        println!("{:<14} anchors per cluster {per_cluster:?}", method.to_string());
    }
    Ok(())
}
