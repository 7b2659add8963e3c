//! Repeated source/target splits on a synthetic world, comparing the three
//! selectors across budgets, then writing the report CSVs.
//!
//! cargo run --release --example run_experiment -- [sources] [repeats] [out_dir]

use std::time::Instant;

use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};
use bench_compress::runner::{emit_reports, run_experiment, ExperimentConfig};

fn main() -> bench_compress::Result<()> {
    let mut args = std::env::args().skip(1);
    let num_source: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let repeats: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = args.next();

    let data = Dataset::from(generate_synthetic(&SynthConfig::default(), 7)?);
    let config = ExperimentConfig {
        num_source,
        repeats,
        budgets: vec![10, 20, 30],
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let table = run_experiment(&data, &config)?;
    println!("{} cells in {:.1?}", table.rows.len(), start.elapsed());
    println!("{:<14} {:>3} {:>8} {:>8} {:>8}", "selector", "K", "rho", "mae", "agree");
    for a in &table.aggregates {
        println!(
            "{:<14} {:>3} {:>8.3} {:>8.4} {:>8}",
            a.selector.to_string(),
            a.k,
            a.spearman_mean.unwrap_or(f64::NAN),
            a.mae_mean,
            a.agreement_mean.map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
    if let Some(dir) = out {
        for p in emit_reports(&table, &dir)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
