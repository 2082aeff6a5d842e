//! A reduced forward-forward run on MNIST, printing the metrics CSV.
//!
//! Usage: `cargo run --release --example training_run -- [MNIST_DIR]`

use ff_sparsity::data::MnistSet;
use ff_sparsity::experiment::{run_ffa, write_metrics, ExperimentConfig, Mode};

fn main() -> ff_sparsity::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into());
    let set = MnistSet::load_train(&dir)?;
    let mut config = ExperimentConfig::new(Mode::TrainFfa);
    config.neurons = 200;
    config.epochs = 1;
    let run = run_ffa(&config, &set)?;
    write_metrics(std::io::stdout().lock(), &run.rows)?;
    Ok(())
}
