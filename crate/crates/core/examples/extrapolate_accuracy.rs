//! Estimates every target model's accuracy from a small coreset and compares
//! against the truth.
//!
//! cargo run --release --example extrapolate_accuracy -- [k] [lambda]

use bench_compress::coreset::SelectionMethod;
use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};
use bench_compress::runner::{run_pipeline, ExperimentConfig};

fn main() -> bench_compress::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let lambda: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let data = Dataset::from(generate_synthetic(&SynthConfig::default(), 1)?);
    let config = ExperimentConfig {
        lambda,
        seed: 1,
        ..ExperimentConfig::default()
    };
    let (_, cell) = run_pipeline(&data, &config, SelectionMethod::Repcore, k, None)?;
    for t in cell.eval.targets.iter().take(10) {
        println!(
            "{:<10} estimated {:.3}  true {:.3}  item agreement {:.3}",
            t.model,
            t.estimated,
            t.truth,
            t.agreement.unwrap_or(f64::NAN)
        );
    }
    let s = &cell.eval.summary;
    println!(
        "{} targets: spearman {:.3}, MAE {:.4}",
        s.num_targets,
        s.spearman_rho.unwrap_or(f64::NAN),
        s.mae
    );
    Ok(())
}
