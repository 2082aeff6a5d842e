//! Per-sample sparsity predicates for goodness descent and the
//! forward-forward loss, with the first-order norm changes they rest on.

use ff_sparsity::model::{Batch, LayerState};
use ff_sparsity::numerics::{random_unit_vector, SeededRng};
use ff_sparsity::theory::{predicted_deltas_ffa, predicted_deltas_t1, theorem1_all, theorem2_check, Target};

fn main() -> ff_sparsity::Result<()> {
    let mut rng = SeededRng::new(11);
    let layer = LayerState::kaiming(512, 64, &mut rng)?;
    let mut draw = |count: usize| (0..count).map(|_| random_unit_vector(64, &mut rng)).collect::<Vec<_>>();
    let pos = Batch::new(&layer, draw(8))?;
    let neg = Batch::new(&layer, draw(8))?;

    println!("goodness descent");
    for (i, r) in theorem1_all(&pos)?.iter().enumerate() {
        let d = predicted_deltas_t1(i, &pos, 1e-3)?;
        println!(
            "  sample {i}: l1/l2 {:.4}  bound {:.4}  sparser {}  dl1 {:+.3e}  dl2 {:+.3e}",
            r.lhs, r.rhs, r.satisfied, d.dl1, d.dl2
        );
    }

    println!("forward-forward");
    for i in 0..3 {
        for target in [Target::positive(i), Target::negative(i)] {
            let r = theorem2_check(target, &pos, &neg)?;
            let d = predicted_deltas_ffa(target, &pos, &neg, 1e-3)?;
            println!(
                "  {:?} {i}: margin {:+.4e}  sparser {}  dl1 {:+.3e}",
                target.polarity, r.margin, r.satisfied, d.dl1
            );
        }
    }
    Ok(())
}
