//! Brute-force checks for the analytic side: apply a real update and
//! re-measure, differentiate the loss numerically, and audit pre-activation
//! signs across an update.
//!
//! Nothing here calls into the first-order predictors except
//! [`eta_scaling_residual`], whose whole job is to compare against them.

use crate::error::{Error, Result};
use crate::model::{
    ffa_gradient, goodness, goodness_gradient, unchecked_step, Activation, Batch, LayerState,
};
use crate::numerics::Matrix;
use crate::theory::{hoyer_sparsity, predicted_deltas_t1, TheoremReport};

/// Relative size below which a measured sparsity change is treated as a
/// rounding-level tie rather than a direction.
pub const TIE_REL: f64 = 1e-9;

/// Largest `n·m` accepted by [`finite_diff_gradient`].
pub const FINITE_DIFF_MAX_WEIGHTS: usize = 5000;

/// Measured effect of one update on one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityDeltaRecord {
    pub sample_index: usize,
    pub s_before: f64,
    pub s_after: f64,
    /// `s_after − s_before`, computed from coordinate differences so that it
    /// stays accurate when the two values agree in most digits.
    pub sparsity_change: f64,
    pub actually_sparser: bool,
    pub dl1_actual: f64,
    pub dl2_actual: f64,
    /// Set when the activation is silent before or after the update, which
    /// leaves sparsity undefined.
    pub degenerate: bool,
}

/// Exact before/after differences of one activation.
#[derive(Clone, Copy, Debug)]
pub struct NormChange {
    pub l1_before: f64,
    pub l2_before: f64,
    pub l2_after: f64,
    pub dl1: f64,
    pub dl2: f64,
}

impl NormChange {
    /// `Σ(h' − h)` and `(‖h'‖² − ‖h‖²)/(‖h'‖ + ‖h‖)`, both accumulated from
    /// per-coordinate differences rather than as a difference of norms.
    pub fn measure(before: &[f64], after: &[f64]) -> Self {
        let (mut dl1, mut dsq) = (0.0, 0.0);
        for (&h, &h2) in before.iter().zip(after) {
            let d = h2 - h;
            dl1 += d;
            dsq += d * (h2 + h);
        }
        let l1_before = crate::numerics::l1_norm(before);
        let l2_before = crate::numerics::l2_norm(before);
        let l2_after = crate::numerics::l2_norm(after);
        let denom = l2_after + l2_before;
        let dl2 = if denom == 0.0 { 0.0 } else { dsq / denom };
        Self {
            l1_before,
            l2_before,
            l2_after,
            dl1,
            dl2,
        }
    }

    /// `Δℓ1·‖h‖₂ − ‖h‖₁·Δℓ2`; negative exactly when `‖h‖₁/‖h‖₂` falls.
    pub fn cross(&self) -> f64 {
        self.dl1 * self.l2_before - self.l1_before * self.dl2
    }

    fn is_tie(&self) -> bool {
        let scale = (self.dl1 * self.l2_before).abs() + (self.l1_before * self.dl2).abs();
        self.cross().abs() <= TIE_REL * scale
    }
}

fn compare(index: usize, before: &Activation, after: &Activation) -> SparsityDeltaRecord {
    let change = NormChange::measure(&before.h, &after.h);
    let degenerate = before.is_silent() || after.is_silent() || before.len() < 2;
    if degenerate {
        return SparsityDeltaRecord {
            sample_index: index,
            s_before: hoyer_sparsity(&before.h).unwrap_or(f64::NAN),
            s_after: hoyer_sparsity(&after.h).unwrap_or(f64::NAN),
            sparsity_change: f64::NAN,
            actually_sparser: false,
            dl1_actual: change.dl1,
            dl2_actual: change.dl2,
            degenerate: true,
        };
    }
    let root_n = (before.len() as f64).sqrt();
    let sparsity_change = -change.cross() / (change.l2_before * change.l2_after) / (root_n - 1.0);
    SparsityDeltaRecord {
        sample_index: index,
        s_before: hoyer_sparsity(&before.h).expect("checked non-silent"),
        s_after: hoyer_sparsity(&after.h).expect("checked non-silent"),
        sparsity_change,
        actually_sparser: change.cross() < 0.0 && !change.is_tie(),
        dl1_actual: change.dl1,
        dl2_actual: change.dl2,
        degenerate: false,
    }
}

/// Pre-activation sign changes across an update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SignAudit {
    /// Coordinates whose nonzero sign changed.
    pub flips: usize,
    pub total: usize,
    /// Coordinates that are exactly zero before or after.
    pub exact_zeros: usize,
}

impl SignAudit {
    pub fn flip_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.flips as f64 / self.total as f64
        }
    }

    fn tally(&mut self, before: &[f64], after: &[f64]) {
        for (&b, &a) in before.iter().zip(after) {
            self.total += 1;
            if b == 0.0 || a == 0.0 {
                self.exact_zeros += 1;
            } else if (b > 0.0) != (a > 0.0) {
                self.flips += 1;
            }
        }
    }

    fn merge(&mut self, other: SignAudit) {
        self.flips += other.flips;
        self.total += other.total;
        self.exact_zeros += other.exact_zeros;
    }
}

/// Which loss drives the update.
#[derive(Clone, Copy, Debug)]
pub enum Update<'a> {
    /// Gradient descent on the goodness of one batch.
    Goodness(&'a Batch),
    /// Gradient descent on `G(H₋) − G(H₊)`.
    Ffa { pos: &'a Batch, neg: &'a Batch },
}

/// Everything measured around one real update.
#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub updated: LayerState,
    /// Plain batch for goodness descent; the positive batch for FFA.
    pub records: Vec<SparsityDeltaRecord>,
    /// The negative batch for FFA; empty for goodness descent.
    pub negative_records: Vec<SparsityDeltaRecord>,
    pub sign_audit: SignAudit,
}

/// Computes the true gradient, takes one SGD step of size `eta` (0 allowed,
/// as a null update) on a copy of `layer`, and re-measures every sample.
pub fn actual_update_outcome(layer: &LayerState, update: Update<'_>, eta: f64) -> Result<UpdateOutcome> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::config(format!("learning rate must be >= 0, got {eta}")));
    }
    let grad = match update {
        Update::Goodness(batch) => goodness_gradient(batch),
        Update::Ffa { pos, neg } => ffa_gradient(pos, neg)?,
    };
    if grad.shape() != layer.weights().shape() {
        return Err(Error::dim("batch activations do not match the layer"));
    }
    let updated = LayerState::new(unchecked_step(layer.weights(), &grad, eta));

    let mut sign_audit = SignAudit::default();
    let mut remeasure = |batch: &Batch| -> Result<Vec<SparsityDeltaRecord>> {
        let after = updated.forward_batch(batch.inputs())?;
        Ok(batch
            .activations()
            .iter()
            .zip(&after)
            .enumerate()
            .map(|(i, (b, a))| {
                sign_audit.tally(&b.preactivation, &a.preactivation);
                compare(i, b, a)
            })
            .collect())
    };
    let (records, negative_records) = match update {
        Update::Goodness(batch) => (remeasure(batch)?, Vec::new()),
        Update::Ffa { pos, neg } => (remeasure(pos)?, remeasure(neg)?),
    };
    Ok(UpdateOutcome {
        updated,
        records,
        negative_records,
        sign_audit,
    })
}

/// Recomputes `Wx` and `(W + ΔW)x` for every input and compares signs.
pub fn sign_preservation_audit(layer: &LayerState, delta_w: &Matrix, batch: &Batch) -> Result<SignAudit> {
    let moved = layer.weights().add(delta_w)?;
    let before = layer.weights().apply_batch(batch.inputs())?;
    let after = moved.apply_batch(batch.inputs())?;
    let mut audit = SignAudit::default();
    for (b, a) in before.iter().zip(&after) {
        let mut one = SignAudit::default();
        one.tally(b, a);
        audit.merge(one);
    }
    Ok(audit)
}

/// Loss whose weight gradient is estimated numerically.
#[derive(Clone, Copy, Debug)]
pub enum Loss<'a> {
    Goodness(&'a [Vec<f64>]),
    Ffa {
        pos: &'a [Vec<f64>],
        neg: &'a [Vec<f64>],
    },
}

impl Loss<'_> {
    fn eval(&self, layer: &LayerState) -> Result<f64> {
        Ok(match *self {
            Loss::Goodness(x) => goodness(&Batch::new(layer, x.to_vec())?, 0.0),
            Loss::Ffa { pos, neg } => {
                goodness(&Batch::new(layer, neg.to_vec())?, 0.0)
                    - goodness(&Batch::new(layer, pos.to_vec())?, 0.0)
            }
        })
    }

    fn inputs(&self) -> Vec<&[f64]> {
        match *self {
            Loss::Goodness(x) => x.iter().map(Vec::as_slice).collect(),
            Loss::Ffa { pos, neg } => pos.iter().chain(neg).map(Vec::as_slice).collect(),
        }
    }
}

/// Central-difference gradient with kink-adjacent weights left out.
#[derive(Clone, Debug)]
pub struct FiniteDiffGradient {
    pub grad: Matrix,
    /// Row-major flags for weights whose perturbation could cross a ReLU
    /// kink; their `grad` entries are 0 and must not be compared.
    pub excluded: Vec<bool>,
}

impl FiniteDiffGradient {
    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    pub fn is_excluded(&self, p: usize, q: usize) -> bool {
        self.excluded[p * self.grad.cols() + q]
    }
}

/// `(L(W + εE_pq) − L(W − εE_pq)) / 2ε` for every weight.
///
/// Weight `(p, q)` is excluded when some input has `|(Wx)[p]| ≤ ε|x[q]|`,
/// since the perturbation could then move that pre-activation across zero.
pub fn finite_diff_gradient(layer: &LayerState, loss: Loss<'_>, epsilon: f64) -> Result<FiniteDiffGradient> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::config(format!("epsilon must be > 0, got {epsilon}")));
    }
    let (n, m) = layer.weights().shape();
    if n * m > FINITE_DIFF_MAX_WEIGHTS {
        return Err(Error::config(format!(
            "{n}x{m} layer is too large for finite differences"
        )));
    }
    let inputs = loss.inputs();
    let preacts: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| layer.weights().apply(x))
        .collect::<Result<_>>()?;

    let mut grad = Matrix::zeros(n, m)?;
    let mut excluded = vec![false; n * m];
    let mut probe = layer.weights().clone();
    for p in 0..n {
        for q in 0..m {
            let near_kink = inputs
                .iter()
                .zip(&preacts)
                .any(|(x, z)| z[p].abs() <= epsilon * x[q].abs());
            if near_kink {
                excluded[p * m + q] = true;
                continue;
            }
            let w = probe.get(p, q);
            probe.set(p, q, w + epsilon);
            let up = loss.eval(&LayerState::new(probe.clone()))?;
            probe.set(p, q, w - epsilon);
            let down = loss.eval(&LayerState::new(probe.clone()))?;
            probe.set(p, q, w);
            grad.set(p, q, (up - down) / (2.0 * epsilon));
        }
    }
    Ok(FiniteDiffGradient { grad, excluded })
}

/// Measured against predicted norm changes of one sample at one step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaResidual {
    pub eta: f64,
    pub dl1_actual: f64,
    pub dl1_predicted: f64,
    pub dl2_actual: f64,
    pub dl2_predicted: f64,
    /// `|dl2_actual − dl2_predicted|`.
    pub dl2_residual: f64,
    /// `|dl1_actual − dl1_predicted| / |dl1_predicted|`, 0 when both vanish.
    pub dl1_relative_residual: f64,
    /// Sign changes among the sample's own pre-activations.
    pub sign_flips: usize,
}

/// Goodness-descent steps of each size in `etas` applied to fresh copies of
/// `layer`, comparing sample `sample_index`'s actual norm changes with the
/// first-order predictions.
pub fn eta_scaling_residual(
    layer: &LayerState,
    batch: &Batch,
    sample_index: usize,
    etas: &[f64],
) -> Result<Vec<EtaResidual>> {
    if sample_index >= batch.len() {
        return Err(Error::dim(format!(
            "sample {sample_index} out of range for a batch of {}",
            batch.len()
        )));
    }
    if let Some(bad) = etas.iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(Error::config(format!("step sizes must be >= 0, got {bad}")));
    }
    let grad = goodness_gradient(batch);
    let x = batch.input(sample_index);
    let before = batch.activation(sample_index);
    etas.iter()
        .map(|&eta| {
            let stepped = LayerState::new(unchecked_step(layer.weights(), &grad, eta));
            let after = stepped.forward(x)?;
            let change = NormChange::measure(&before.h, &after.h);
            let predicted = predicted_deltas_t1(sample_index, batch, eta)?;
            let mut audit = SignAudit::default();
            audit.tally(&before.preactivation, &after.preactivation);
            let dl1_err = (change.dl1 - predicted.dl1).abs();
            Ok(EtaResidual {
                eta,
                dl1_actual: change.dl1,
                dl1_predicted: predicted.dl1,
                dl2_actual: change.dl2,
                dl2_predicted: predicted.dl2,
                dl2_residual: (change.dl2 - predicted.dl2).abs(),
                dl1_relative_residual: if predicted.dl1 == 0.0 {
                    dl1_err
                } else {
                    dl1_err / predicted.dl1.abs()
                },
                sign_flips: audit.flips,
            })
        })
        .collect()
}

/// Predicate verdicts checked against measured directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Agreement {
    pub compared: usize,
    pub agreed: usize,
    pub skipped_degenerate: usize,
    pub skipped_small_margin: usize,
}

impl Agreement {
    pub fn rate(&self) -> f64 {
        if self.compared == 0 {
            return f64::NAN;
        }
        self.agreed as f64 / self.compared as f64
    }

    pub fn add(&mut self, other: Agreement) {
        self.compared += other.compared;
        self.agreed += other.agreed;
        self.skipped_degenerate += other.skipped_degenerate;
        self.skipped_small_margin += other.skipped_small_margin;
    }
}

/// Compares `reports[i].satisfied` with `records[i].actually_sparser` for
/// every non-degenerate sample whose relative margin exceeds
/// `min_relative_margin`.
pub fn tally_agreement(
    reports: &[TheoremReport],
    records: &[SparsityDeltaRecord],
    min_relative_margin: f64,
) -> Agreement {
    let mut tally = Agreement::default();
    for (r, rec) in reports.iter().zip(records) {
        if r.degenerate || rec.degenerate {
            tally.skipped_degenerate += 1;
        } else if r.relative_margin() <= min_relative_margin {
            tally.skipped_small_margin += 1;
        } else {
            tally.compared += 1;
            if r.satisfied == rec.actually_sparser {
                tally.agreed += 1;
            }
        }
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{random_unit_vector, SeededRng};

    fn instance(n: usize, m: usize, count: usize, seed: u64) -> (LayerState, Batch) {
        let mut rng = SeededRng::new(seed);
        let layer = LayerState::kaiming(n, m, &mut rng).unwrap();
        let inputs = (0..count).map(|_| random_unit_vector(m, &mut rng)).collect();
        let batch = Batch::new(&layer, inputs).unwrap();
        (layer, batch)
    }

    #[test]
    fn null_update_changes_nothing() {
        let (layer, batch) = instance(40, 8, 5, 1);
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), 0.0).unwrap();
        assert_eq!(out.updated, layer);
        for r in &out.records {
            assert_eq!(r.s_after, r.s_before);
            assert_eq!(r.dl1_actual, 0.0);
            assert_eq!(r.dl2_actual, 0.0);
            assert!(!r.actually_sparser);
        }
        assert_eq!(out.sign_audit.flips, 0);
    }

    #[test]
    fn single_sample_descent_keeps_sparsity() {
        let (layer, batch) = instance(256, 16, 1, 3);
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), 1e-7).unwrap();
        let r = out.records[0];
        assert!(!r.degenerate);
        assert!(!r.actually_sparser);
        assert!((r.s_after - r.s_before).abs() <= 1e-9);
    }

    #[test]
    fn input_layer_is_not_mutated() {
        let (layer, batch) = instance(20, 6, 4, 8);
        let copy = layer.clone();
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), 0.01).unwrap();
        assert_eq!(layer, copy);
        assert_ne!(out.updated, layer);
    }

    #[test]
    fn sparser_flag_matches_sparsity_values_when_clear() {
        let (layer, batch) = instance(128, 8, 6, 12);
        let out = actual_update_outcome(&layer, Update::Goodness(&batch), 1e-3).unwrap();
        for r in out.records.iter().filter(|r| !r.degenerate) {
            let direct = r.s_after - r.s_before;
            if direct.abs() > 1e-12 {
                assert_eq!(r.actually_sparser, direct > 0.0);
                assert!((direct - r.sparsity_change).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ffa_outcome_has_both_streams() {
        let (layer, pos) = instance(30, 6, 4, 2);
        let mut rng = SeededRng::new(77);
        let neg = Batch::new(&layer, (0..4).map(|_| random_unit_vector(6, &mut rng)).collect()).unwrap();
        let out = actual_update_outcome(&layer, Update::Ffa { pos: &pos, neg: &neg }, 1e-3).unwrap();
        assert_eq!(out.records.len(), 4);
        assert_eq!(out.negative_records.len(), 4);
        assert_eq!(out.sign_audit.total, 2 * 4 * 30);
    }

    #[test]
    fn sign_audit_cases() {
        let (layer, batch) = instance(50, 10, 6, 4);
        let zero = Matrix::zeros(50, 10).unwrap();
        let audit = sign_preservation_audit(&layer, &zero, &batch).unwrap();
        assert_eq!(audit.flips, 0);
        assert_eq!(audit.total, 300);

        let negate = layer.weights().scale(-2.0);
        let audit = sign_preservation_audit(&layer, &negate, &batch).unwrap();
        let nonzero: usize = batch
            .activations()
            .iter()
            .map(|a| a.preactivation.iter().filter(|v| **v != 0.0).count())
            .sum();
        assert_eq!(audit.flips, nonzero);
        let active: usize = batch
            .activations()
            .iter()
            .map(|a| a.mask.iter().filter(|&&on| on).count())
            .sum();
        assert!(audit.flips >= active);
        assert!(audit.flips + audit.exact_zeros <= audit.total);
    }

    #[test]
    fn finite_differences_of_constant_loss_vanish() {
        let layer = LayerState::new(Matrix::from_rows(&[vec![-1.0, -1.0], vec![-2.0, -0.5]]).unwrap());
        let x = vec![vec![0.6, 0.8]];
        let fd = finite_diff_gradient(&layer, Loss::Goodness(&x), 1e-6).unwrap();
        assert!(fd.grad.as_slice().iter().all(|&g| g == 0.0));
        assert_eq!(fd.excluded_count(), 0);
    }

    #[test]
    fn finite_differences_cancel_for_identical_ffa_batches() {
        let (layer, batch) = instance(3, 2, 2, 6);
        let x = batch.inputs().to_vec();
        let fd = finite_diff_gradient(&layer, Loss::Ffa { pos: &x, neg: &x }, 1e-6).unwrap();
        assert!(fd.grad.max_abs() <= 1e-9);
    }

    #[test]
    fn finite_differences_match_goodness_gradient() {
        let (layer, batch) = instance(3, 2, 2, 10);
        let fd = finite_diff_gradient(&layer, Loss::Goodness(batch.inputs()), 1e-6).unwrap();
        let an = goodness_gradient(&batch);
        for p in 0..3 {
            for q in 0..2 {
                if fd.is_excluded(p, q) {
                    continue;
                }
                let (a, b) = (an.get(p, q), fd.grad.get(p, q));
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
                assert!(a == b || rel <= 1e-5, "({p},{q}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn finite_differences_refuse_large_layers() {
        let (layer, batch) = instance(100, 51, 1, 1);
        assert!(finite_diff_gradient(&layer, Loss::Goodness(batch.inputs()), 1e-6).is_err());
    }

    #[test]
    fn zero_step_has_zero_residual() {
        let (layer, batch) = instance(64, 8, 4, 5);
        let res = eta_scaling_residual(&layer, &batch, 0, &[0.0]).unwrap();
        assert_eq!(res[0].dl2_residual, 0.0);
        assert_eq!(res[0].dl1_relative_residual, 0.0);
        assert!(eta_scaling_residual(&layer, &batch, 9, &[0.1]).is_err());
        assert!(eta_scaling_residual(&layer, &batch, 0, &[-0.1]).is_err());
    }

    #[test]
    fn agreement_tally_filters() {
        let report = |margin: f64, degenerate| TheoremReport {
            lhs: 1.0,
            rhs: 1.0 + margin,
            margin,
            satisfied: margin > 0.0,
            degenerate,
        };
        let record = |sparser| SparsityDeltaRecord {
            sample_index: 0,
            s_before: 0.5,
            s_after: 0.5,
            sparsity_change: 0.0,
            actually_sparser: sparser,
            dl1_actual: 0.0,
            dl2_actual: 0.0,
            degenerate: false,
        };
        let t = tally_agreement(
            &[report(0.1, false), report(-0.1, false), report(1e-8, false), report(0.1, true)],
            &[record(true), record(true), record(false), record(true)],
            1e-4,
        );
        assert_eq!(t.compared, 2);
        assert_eq!(t.agreed, 1);
        assert_eq!(t.skipped_small_margin, 1);
        assert_eq!(t.skipped_degenerate, 1);
    }
}
