//! Applies a real step and compares the measured sparsity direction with
//! the predicate evaluated before the step.

use ff_sparsity::model::{Batch, LayerState};
use ff_sparsity::numerics::{random_unit_vector, SeededRng};
use ff_sparsity::oracle::{actual_update_outcome, tally_agreement, Update};
use ff_sparsity::theory::theorem1_all;

fn main() -> ff_sparsity::Result<()> {
    let mut rng = SeededRng::new(21);
    let layer = LayerState::kaiming(1024, 64, &mut rng)?;
    let inputs = (0..32).map(|_| random_unit_vector(64, &mut rng)).collect();
    let batch = Batch::new(&layer, inputs)?;
    let reports = theorem1_all(&batch)?;

    for eta in [1e-6, 1e-3, 1e-1] {
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), eta)?;
        let agreement = tally_agreement(&reports, &out.records, 1e-4);
        println!(
            "eta {eta:<6}: agreement {}/{}  sign flips {}/{}",
            agreement.agreed, agreement.compared, out.sign_audit.flips, out.sign_audit.total
        );
    }

    let out = actual_update_outcome(&layer, Update::Goodness(&batch), 1e-3)?;
    for r in out.records.iter().take(4) {
        println!(
            "sample {}: S {:.6} -> {:.6} ({:+.3e}) sparser {}",
            r.sample_index, r.s_before, r.s_after, r.sparsity_change, r.actually_sparser
        );
    }
    Ok(())
}
