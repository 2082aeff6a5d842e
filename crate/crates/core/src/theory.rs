//! Hoyer sparsity, first-order predictions of the ℓ1/ℓ2 change of one
//! sample's activation under a gradient step, and the two per-sample
//! predicates that decide whether that step makes the activation sparser.
//!
//! Both predicates reduce to comparing `Δℓ1·‖hᵢ‖₂` against `‖hᵢ‖₁·Δℓ2`.
//! Under sign preservation the update moves `hᵢ` by
//! `Σₖ cₖ (hₖ ⊙ mᵢ) cos(xₖ, xᵢ)` for per-batch coefficients `cₖ`, so both
//! deltas are sums of per-sample coupling terms:
//!
//! * ℓ1 coupling: `‖hₖ ⊙ mᵢ‖₁ cos(xₖ, xᵢ)`
//! * ℓ2 coupling: `‖hₖ ⊙ mᵢ‖₂ cos(hᵢ, hₖ ⊙ mᵢ) cos(xₖ, xᵢ)`
//!
//! Goodness descent uses `cₖ = −2η` for every sample; the forward-forward
//! loss uses `+2η` on positives and `−2η` on negatives, giving the
//! `A±`/`B±` sums.

use crate::error::{Error, Result};
use crate::model::{Activation, Batch};
use crate::numerics::{cosine_from_parts, l1_norm, l2_norm, Matrix};

/// A margin within this absolute distance of zero is a tie, not a success.
pub const MARGIN_TOL: f64 = 1e-12;

/// `(√n − ‖h‖₁/‖h‖₂) / (√n − 1)`: 0 for a flat vector, 1 for a one-hot.
pub fn hoyer_sparsity(h: &[f64]) -> Result<f64> {
    if h.len() < 2 {
        return Err(Error::Domain(format!(
            "Hoyer sparsity needs at least 2 coordinates, got {}",
            h.len()
        )));
    }
    let l2 = l2_norm(h);
    if l2 == 0.0 {
        return Err(Error::DegenerateActivation);
    }
    let root_n = (h.len() as f64).sqrt();
    Ok((root_n - l1_norm(h) / l2) / (root_n - 1.0))
}

/// `h_k ⊙ m_i`.
pub fn masked_projection(h_k: &[f64], mask_i: &[bool]) -> Result<Vec<f64>> {
    if h_k.len() != mask_i.len() {
        return Err(Error::dim(format!(
            "activation of length {} against mask of length {}",
            h_k.len(),
            mask_i.len()
        )));
    }
    Ok(h_k
        .iter()
        .zip(mask_i)
        .map(|(&v, &on)| if on { v } else { 0.0 })
        .collect())
}

/// Predicted `Δℓ1` and `Δℓ2` of one activation with the second-order
/// remainder dropped.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FirstOrderDeltas {
    pub dl1: f64,
    pub dl2: f64,
}

/// Outcome of a per-sample sparsity predicate.
///
/// For goodness descent `lhs = ‖hᵢ‖₁/‖hᵢ‖₂` and `rhs` is the ratio of the
/// ℓ1 and ℓ2 coupling sums. For the forward-forward loss
/// `lhs = ‖hᵢ‖₂(A₊ − A₋)` and `rhs = ‖hᵢ‖₁(B₊ − B₋)`. In both cases a
/// positive `margin` predicts a sparser activation after the step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
    pub degenerate: bool,
}

impl TheoremReport {
    fn degenerate(lhs: f64) -> Self {
        Self {
            lhs,
            rhs: f64::NAN,
            margin: 0.0,
            satisfied: false,
            degenerate: true,
        }
    }

    fn decided(lhs: f64, rhs: f64, margin: f64) -> Self {
        Self {
            lhs,
            rhs,
            margin,
            satisfied: margin > MARGIN_TOL,
            degenerate: false,
        }
    }

    /// `|margin|` relative to the larger side of the inequality.
    pub fn relative_margin(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 || !scale.is_finite() {
            return 0.0;
        }
        self.margin.abs() / scale
    }
}

/// The four coupling sums of the forward-forward predicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermsAB {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A sample in one of the two forward-forward batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Target {
    pub polarity: Polarity,
    pub index: usize,
}

impl Target {
    pub fn positive(index: usize) -> Self {
        Self {
            polarity: Polarity::Positive,
            index,
        }
    }

    pub fn negative(index: usize) -> Self {
        Self {
            polarity: Polarity::Negative,
            index,
        }
    }
}

/// ℓ1 and ℓ2 coupling sums of one sample against a batch.
#[derive(Clone, Copy, Debug, Default)]
struct Coupling {
    l1: f64,
    l2: f64,
}

/// Norms of `hᵢ` plus its mask: everything the coupling sums need from the
/// target sample.
struct Focus<'a> {
    h: &'a [f64],
    mask: &'a [bool],
    l1: f64,
    l2: f64,
}

impl<'a> Focus<'a> {
    fn new(a: &'a Activation) -> Self {
        Self {
            h: &a.h,
            mask: &a.mask,
            l1: a.l1(),
            l2: a.l2(),
        }
    }

    /// `‖hₖ ⊙ mᵢ‖₁`, `‖hₖ ⊙ mᵢ‖₂` and `(hₖ ⊙ mᵢ)·hᵢ`, without materializing
    /// the projection. Sums run in ascending coordinate order, matching
    /// the allocating path through [`masked_projection`].
    fn masked_stats(&self, h_k: &[f64]) -> (f64, f64, f64) {
        let (mut l1, mut sq, mut dot) = (0.0, 0.0, 0.0);
        for ((&v, &on), &hi) in h_k.iter().zip(self.mask).zip(self.h) {
            let v = if on { v } else { 0.0 };
            l1 += v;
            sq += v * v;
            dot += v * hi;
        }
        (l1, sq.sqrt(), dot)
    }

    fn coupling(&self, batch: &Batch, cos_x: impl Fn(usize) -> f64) -> Coupling {
        let mut acc = Coupling::default();
        for (k, a) in batch.activations().iter().enumerate() {
            let (l1, l2, dot) = self.masked_stats(&a.h);
            let cx = cos_x(k);
            let ch = cosine_from_parts(dot, l2, self.l2);
            acc.l1 += l1 * cx;
            acc.l2 += l2 * ch * cx;
        }
        acc
    }
}

fn direct_cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_from_parts(crate::numerics::dot(a, b), l2_norm(a), l2_norm(b))
}

fn check_index(i: usize, batch: &Batch) -> Result<()> {
    if i >= batch.len() {
        return Err(Error::dim(format!(
            "sample index {i} out of range for a batch of {}",
            batch.len()
        )));
    }
    Ok(())
}

fn check_pair(pos: &Batch, neg: &Batch) -> Result<()> {
    if pos.len() != neg.len() {
        return Err(Error::config(format!(
            "positive batch has {} samples, negative batch has {}",
            pos.len(),
            neg.len()
        )));
    }
    if pos.n() != neg.n() || pos.m() != neg.m() {
        return Err(Error::dim("positive and negative batches differ in shape"));
    }
    Ok(())
}

fn goodness_report(focus: &Focus<'_>, c: Coupling) -> TheoremReport {
    if focus.l2 == 0.0 {
        return TheoremReport::degenerate(f64::NAN);
    }
    let lhs = focus.l1 / focus.l2;
    if c.l2 == 0.0 {
        return TheoremReport::degenerate(lhs);
    }
    let rhs = c.l1 / c.l2;
    // With a negative ℓ2 coupling sum the ratio form flips direction.
    let margin = if c.l2 > 0.0 { rhs - lhs } else { lhs - rhs };
    TheoremReport::decided(lhs, rhs, margin)
}

fn ffa_report(focus: &Focus<'_>, t: TermsAB) -> TheoremReport {
    if focus.l2 == 0.0 {
        return TheoremReport::degenerate(f64::NAN);
    }
    let lhs = focus.l2 * (t.a_plus - t.a_minus);
    let rhs = focus.l1 * (t.b_plus - t.b_minus);
    TheoremReport::decided(lhs, rhs, rhs - lhs)
}

fn terms(pos_c: Coupling, neg_c: Coupling) -> TermsAB {
    TermsAB {
        a_plus: pos_c.l1,
        a_minus: neg_c.l1,
        b_plus: pos_c.l2,
        b_minus: neg_c.l2,
    }
}

/// Predicted change of sample `i` under one goodness-descent step of size
/// `eta` on `batch`. Silenced samples get zero deltas.
pub fn predicted_deltas_t1(i: usize, batch: &Batch, eta: f64) -> Result<FirstOrderDeltas> {
    check_index(i, batch)?;
    let focus = Focus::new(batch.activation(i));
    if focus.l2 == 0.0 {
        return Ok(FirstOrderDeltas::default());
    }
    let xi = batch.input(i);
    let c = focus.coupling(batch, |k| direct_cosine(batch.input(k), xi));
    Ok(FirstOrderDeltas {
        dl1: -2.0 * eta * c.l1,
        dl2: -2.0 * eta * c.l2,
    })
}

/// Predicted change of `target` under one forward-forward step.
pub fn predicted_deltas_ffa(
    target: Target,
    pos: &Batch,
    neg: &Batch,
    eta: f64,
) -> Result<FirstOrderDeltas> {
    let t = ab_terms(target, pos, neg)?;
    let (batch, i) = resolve(target, pos, neg);
    if batch.activation(i).is_silent() {
        return Ok(FirstOrderDeltas::default());
    }
    Ok(FirstOrderDeltas {
        dl1: 2.0 * eta * (t.a_plus - t.a_minus),
        dl2: 2.0 * eta * (t.b_plus - t.b_minus),
    })
}

/// Goodness-descent predicate for sample `i`.
///
/// # Panics
///
/// If `i` is out of range for `batch`.
pub fn theorem1_check(i: usize, batch: &Batch) -> TheoremReport {
    let focus = Focus::new(batch.activation(i));
    if focus.l2 == 0.0 {
        return TheoremReport::degenerate(f64::NAN);
    }
    let xi = batch.input(i);
    let c = focus.coupling(batch, |k| direct_cosine(batch.input(k), xi));
    goodness_report(&focus, c)
}

fn resolve<'b>(target: Target, pos: &'b Batch, neg: &'b Batch) -> (&'b Batch, usize) {
    match target.polarity {
        Polarity::Positive => (pos, target.index),
        Polarity::Negative => (neg, target.index),
    }
}

/// `A₊`, `A₋`, `B₊`, `B₋` for `target`, using its mask and input.
pub fn ab_terms(target: Target, pos: &Batch, neg: &Batch) -> Result<TermsAB> {
    check_pair(pos, neg)?;
    let (batch, i) = resolve(target, pos, neg);
    check_index(i, batch)?;
    let focus = Focus::new(batch.activation(i));
    let xi = batch.input(i);
    let p = focus.coupling(pos, |k| direct_cosine(pos.input(k), xi));
    let n = focus.coupling(neg, |k| direct_cosine(neg.input(k), xi));
    Ok(terms(p, n))
}

/// Forward-forward predicate for `target`.
pub fn theorem2_check(target: Target, pos: &Batch, neg: &Batch) -> Result<TheoremReport> {
    let t = ab_terms(target, pos, neg)?;
    let (batch, i) = resolve(target, pos, neg);
    Ok(ffa_report(&Focus::new(batch.activation(i)), t))
}

/// Cosines between every pair of inputs, from one Gram product.
///
/// Entries are bit-identical to computing each cosine directly.
pub struct CosineTable {
    gram: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl CosineTable {
    pub fn new(inputs: &[Vec<f64>]) -> Result<Self> {
        let stacked = Matrix::from_rows(inputs)?;
        let gram = stacked.apply_batch(inputs)?;
        let norms = inputs.iter().map(|x| l2_norm(x)).collect();
        Ok(Self { gram, norms })
    }

    /// `cos(x_k, x_i)`.
    pub fn get(&self, k: usize, i: usize) -> f64 {
        cosine_from_parts(self.gram[i][k], self.norms[k], self.norms[i])
    }
}

/// [`theorem1_check`] for every sample of the batch.
pub fn theorem1_all(batch: &Batch) -> Result<Vec<TheoremReport>> {
    let table = CosineTable::new(batch.inputs())?;
    Ok((0..batch.len())
        .map(|i| {
            let focus = Focus::new(batch.activation(i));
            if focus.l2 == 0.0 {
                return TheoremReport::degenerate(f64::NAN);
            }
            let c = focus.coupling(batch, |k| table.get(k, i));
            goodness_report(&focus, c)
        })
        .collect())
}

/// [`theorem2_check`] for every sample of both batches, positives first.
pub fn theorem2_all(pos: &Batch, neg: &Batch) -> Result<(Vec<TheoremReport>, Vec<TheoremReport>)> {
    check_pair(pos, neg)?;
    let n = pos.len();
    let stacked: Vec<Vec<f64>> = pos.inputs().iter().chain(neg.inputs()).cloned().collect();
    let table = CosineTable::new(&stacked)?;
    let report = |a: &Activation, row: usize| {
        let focus = Focus::new(a);
        if focus.l2 == 0.0 {
            return TheoremReport::degenerate(f64::NAN);
        }
        let p = focus.coupling(pos, |k| table.get(k, row));
        let q = focus.coupling(neg, |k| table.get(n + k, row));
        ffa_report(&focus, terms(p, q))
    };
    let pos_reports = pos
        .activations()
        .iter()
        .enumerate()
        .map(|(i, a)| report(a, i))
        .collect();
    let neg_reports = neg
        .activations()
        .iter()
        .enumerate()
        .map(|(i, a)| report(a, n + i))
        .collect();
    Ok((pos_reports, neg_reports))
}
