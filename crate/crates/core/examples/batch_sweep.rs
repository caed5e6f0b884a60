//! Run a small strip-count sweep over the corpus and print the aggregates.

use std::path::Path;

use emistrip::{run_batch, BatchConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("emistrip-batch");
    let cfg = BatchConfig {
        input_dir: Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus"),
        output_dir: out.clone(),
        sweep: vec![1, 3, 6, 15],
        seed: 2024,
        force: true,
        ..BatchConfig::default()
    };
    let outcome = run_batch(&cfg)?;
    println!("{} images, {} outputs written to {}", outcome.images, outcome.written, out.display());
    for a in &outcome.report.aggregates {
        println!("{:>9} {:>4}  mean {:.4}  std {:.4}", a.metric, a.variant, a.mean, a.std);
    }
    for t in &outcome.report.ttests {
        if let Some(r) = &t.result {
            println!("{:>9} {}~{}  t {:+.3}  p {:.3e}", t.metric, t.a, t.b, r.t_statistic, r.p_value);
        }
    }
    Ok(())
}
