//! Loads the MNIST training set and shows how plain, positive and negative
//! inputs are built.
//!
//! Usage: `cargo run --example mnist_inputs -- [MNIST_DIR]`

use ff_sparsity::data::{make_batches, BatchMode, MnistSet};

fn main() -> ff_sparsity::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/mnist".into());
    let set = MnistSet::load_train(&dir)?;
    println!("{} images, class histogram {:?}", set.count(), set.class_histogram());

    for mode in [BatchMode::Plain, BatchMode::Positive, BatchMode::Negative] {
        let mut batches = make_batches(&set, 128, 0, mode)?;
        println!("{mode:?}: {} full batches per epoch", batches.batch_count());
        if let Some(first) = batches.next() {
            for s in first?.iter().take(3) {
                let norm = s.x.iter().map(|v| v * v).sum::<f64>().sqrt();
                println!(
                    "  image {:>5}  label {}  embedded {:?}  |x| = {norm:.12}",
                    s.index, s.true_label, s.embedded_label
                );
            }
        }
    }
    Ok(())
}
