//! Whole-dataset scan and batch-size sweep of the goodness predicate under
//! a fresh layer.
//!
//! Usage: `cargo run --release --example batch_sweep -- [MNIST_DIR]`

use ff_sparsity::data::MnistSet;
use ff_sparsity::experiment::{run_batch_sweep, run_theorem1_scan, ExperimentConfig, Mode};

fn main() -> ff_sparsity::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into());
    let set = MnistSet::load_train(&dir)?;

    let scan = run_theorem1_scan(&ExperimentConfig::new(Mode::Theorem1Scan), &set)?;
    println!(
        "scan: {} images, satisfied fraction {:.6}, {} degenerate",
        scan.rows.len(),
        scan.satisfied_fraction(),
        scan.degenerate_count()
    );

    let mut config = ExperimentConfig::new(Mode::BatchSweep);
    config.batch_sizes = vec![1, 8, 32, 128, 512];
    for row in run_batch_sweep(&config, &set)? {
        println!("N = {:>4}: mean satisfied ratio {:.5} over {} batches", row.batch_size, row.mean_ratio, row.batches);
    }
    Ok(())
}
