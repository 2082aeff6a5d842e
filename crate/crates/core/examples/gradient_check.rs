//! Analytic gradients against central finite differences.

use ff_sparsity::model::{ffa_gradient, goodness_gradient, Batch, LayerState};
use ff_sparsity::numerics::{random_unit_vector, SeededRng};
use ff_sparsity::oracle::{finite_diff_gradient, Loss};

fn main() -> ff_sparsity::Result<()> {
    let mut rng = SeededRng::new(5);
    let layer = LayerState::kaiming(8, 6, &mut rng)?;
    let pos: Vec<Vec<f64>> = (0..4).map(|_| random_unit_vector(6, &mut rng)).collect();
    let neg: Vec<Vec<f64>> = (0..4).map(|_| random_unit_vector(6, &mut rng)).collect();
    let pb = Batch::new(&layer, pos.clone())?;
    let nb = Batch::new(&layer, neg.clone())?;

    let cases = [
        ("goodness", goodness_gradient(&pb), Loss::Goodness(&pos)),
        ("ffa", ffa_gradient(&pb, &nb)?, Loss::Ffa { pos: &pos, neg: &neg }),
    ];
    for (name, analytic, loss) in cases {
        let fd = finite_diff_gradient(&layer, loss, 1e-6)?;
        let mut worst = 0.0f64;
        for p in 0..layer.n() {
            for q in 0..layer.m() {
                if fd.is_excluded(p, q) {
                    continue;
                }
                let (a, b) = (analytic.get(p, q), fd.grad.get(p, q));
                if a != b {
                    worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
                }
            }
        }
        println!("{name:>8}: max relative error {worst:.3e}, {} weights excluded", fd.excluded_count());
    }
    Ok(())
}
