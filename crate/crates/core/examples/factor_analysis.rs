//! Tests whether the leading principal components of aligned embeddings track
//! item difficulty, discrimination, subtask and ability.
//!
//! cargo run --release --example factor_analysis -- [out_dir]

use bench_compress::align::TrainConfig;
use bench_compress::analysis::{run_association_suite, ItemFactors, SuiteOptions};
use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};
use bench_compress::runner::{choose_sources, embed_stage, train_stage, SourcePolicy};

fn main() -> bench_compress::Result<()> {
    let out = std::env::args().nth(1);
    let data = Dataset::from(generate_synthetic(&SynthConfig::default(), 2)?);
    let split = choose_sources(&data, &SourcePolicy::Random, 10, 2)?;
    let (network, _) = train_stage(&data, &split, (0.7, 0.1, 0.2), &TrainConfig::default(), 2)?;
    let emb = embed_stage(&data, &split, &network)?;

    let factors = ItemFactors::from_responses(&data.responses, &data.items)?;
    let report = run_association_suite(&emb, &factors, &SuiteOptions::default())?;
    println!("{:<4} {:<15} {:<11} {:>8} {:>8} {:>6}", "PC", "factor", "mode", "effect", "q", "n");
    for a in &report.aggregate {
        let median = |s: &Option<bench_compress::analysis::Spread>| s.as_ref().map_or(f64::NAN, |s| s.median);
        println!(
            "{:<4} {:<15} {:<11} {:>8.3} {:>8.2e} {:>6}",
            a.component,
            a.factor.to_string(),
            a.mode.to_string(),
            median(&a.effect),
            median(&a.q),
            a.snapshots
        );
    }
    if let Some(dir) = out {
        report.save(&dir)?;
        println!("wrote association tables to {dir}");
    }
    Ok(())
}
