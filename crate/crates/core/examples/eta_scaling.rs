//! How the first-order norm predictions degrade as the step grows.

use ff_sparsity::model::{Batch, LayerState};
use ff_sparsity::numerics::{random_unit_vector, SeededRng};
use ff_sparsity::oracle::eta_scaling_residual;

fn main() -> ff_sparsity::Result<()> {
    let mut rng = SeededRng::new(8);
    let layer = LayerState::kaiming(64, 16, &mut rng)?;
    let inputs = (0..8).map(|_| random_unit_vector(16, &mut rng)).collect();
    let batch = Batch::new(&layer, inputs)?;
    let etas: Vec<f64> = (0..8).map(|k| 0.05 / f64::powi(2.0, k)).collect();

    println!("{:>10} {:>12} {:>12} {:>8} {:>6}", "eta", "dl2 resid", "dl1 rel", "shrink", "flips");
    let res = eta_scaling_residual(&layer, &batch, 0, &etas)?;
    for (k, r) in res.iter().enumerate() {
        let shrink = res
            .get(k + 1)
            .map(|next| format!("{:.3}", r.dl2_residual / next.dl2_residual))
            .unwrap_or_default();
        println!(
            "{:>10.3e} {:>12.3e} {:>12.3e} {:>8} {:>6}",
            r.eta, r.dl2_residual, r.dl1_relative_residual, shrink, r.sign_flips
        );
    }
    Ok(())
}
