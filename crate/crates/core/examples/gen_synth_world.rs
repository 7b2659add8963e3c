//! Writes a structured synthetic world to a data directory and prints a
//! summary of its models.
//!
//! cargo run --release --example gen_synth_world -- <out_dir> [seed]

use bench_compress::dataio::{generate_synthetic, Dataset, SynthConfig};

fn main() -> bench_compress::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synth_world".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let world = generate_synthetic(&SynthConfig::default(), seed)?;
    world.save(&out)?;
    let data = Dataset::load(&out)?;
    println!(
        "{} models x {} items written to {out}",
        data.responses.num_models(),
        data.responses.num_items()
    );
    for (k, name) in data.responses.model_names().iter().enumerate().take(5) {
        let info = data.models.get(name).expect("metadata");
        println!(
            "{name}: family {}, hidden width {}, accuracy {:.3}",
            info.family.as_deref().unwrap_or("-"),
            data.store.get(name).map_or(0, |s| s.dim()),
            data.responses.accuracy(k)
        );
    }
    Ok(())
}
