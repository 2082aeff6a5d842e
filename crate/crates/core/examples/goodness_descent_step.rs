//! One goodness-descent step on a random batch, done by hand.

use ff_sparsity::model::{goodness, goodness_gradient, sgd_step, Batch, LayerState};
use ff_sparsity::numerics::{random_unit_vector, SeededRng};

fn main() -> ff_sparsity::Result<()> {
    let mut rng = SeededRng::new(3);
    let layer = LayerState::kaiming(256, 32, &mut rng)?;
    let inputs = (0..16).map(|_| random_unit_vector(32, &mut rng)).collect();
    let batch = Batch::new(&layer, inputs)?;
    let grad = goodness_gradient(&batch);
    println!("goodness before: {:.6}", goodness(&batch, 0.0));
    println!("gradient max |entry|: {:.6}", grad.max_abs());

    for eta in [1e-3, 1e-2, 1e-1] {
        let next = sgd_step(&layer, &grad, eta)?;
        let after = Batch::new(&next, batch.inputs().to_vec())?;
        println!("eta {eta:<6}: goodness after {:.6}", goodness(&after, 0.0));
    }
    Ok(())
}
