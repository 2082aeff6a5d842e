//! The single fully-connected ReLU layer without bias, its goodness, the
//! forward-forward loss, their analytic weight gradients and plain SGD.
//!
//! Updates are functional: [`sgd_step`] returns a new [`LayerState`] and never
//! touches its input, so a pre-update layer can always be re-run alongside
//! the post-update one.

use crate::error::{Error, Result};
use crate::numerics::{kaiming_init, l1_norm, l2_norm, Matrix, SeededRng};

/// Tolerance on `‖x‖₂ = 1` for every batch input.
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    weights: Matrix,
}

impl LayerState {
    pub fn new(weights: Matrix) -> Self {
        Self { weights }
    }

    /// Kaiming-initialized layer with `n` outputs and `m` inputs.
    pub fn kaiming(n: usize, m: usize, rng: &mut SeededRng) -> Result<Self> {
        kaiming_init(n, m, rng).map(Self::new)
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Output width.
    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    /// Input width.
    pub fn m(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Activation> {
        self.weights.apply(x).map(Activation::from_preactivation)
    }

    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Activation>> {
        Ok(self
            .weights
            .apply_batch(inputs)?
            .into_iter()
            .map(Activation::from_preactivation)
            .collect())
    }
}

/// `h = ReLU(Wx)` together with its mask and the raw pre-activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Activation {
    pub h: Vec<f64>,
    /// `mask[p]` is true exactly when `h[p] > 0`.
    pub mask: Vec<bool>,
    pub preactivation: Vec<f64>,
    /// Coordinates where `Wx` is exactly zero. These are masked out.
    pub preact_zero_count: usize,
}

impl Activation {
    pub fn from_preactivation(preactivation: Vec<f64>) -> Self {
        let h: Vec<f64> = preactivation.iter().map(|&v| v.max(0.0)).collect();
        let mask = preactivation.iter().map(|&v| v > 0.0).collect();
        let preact_zero_count = preactivation.iter().filter(|&&v| v == 0.0).count();
        Self {
            h,
            mask,
            preactivation,
            preact_zero_count,
        }
    }

    /// Builds an activation directly from a non-negative `h`, for hand-made
    /// instances. The pre-activation is taken to be `h` itself.
    pub fn from_output(h: Vec<f64>) -> Result<Self> {
        if h.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Domain("activation entries must be >= 0".into()));
        }
        Ok(Self::from_preactivation(h))
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn l1(&self) -> f64 {
        l1_norm(&self.h)
    }

    pub fn l2(&self) -> f64 {
        l2_norm(&self.h)
    }

    /// True when every coordinate is silenced.
    pub fn is_silent(&self) -> bool {
        !self.mask.iter().any(|&on| on)
    }
}

/// Unit-norm inputs and their activations under one layer.
#[derive(Clone, Debug)]
pub struct Batch {
    inputs: Vec<Vec<f64>>,
    activations: Vec<Activation>,
}

impl Batch {
    /// Runs `layer` over `inputs`.
    pub fn new(layer: &LayerState, inputs: Vec<Vec<f64>>) -> Result<Self> {
        check_inputs(&inputs)?;
        let activations = layer.forward_batch(&inputs)?;
        Ok(Self {
            inputs,
            activations,
        })
    }

    /// Pairs inputs with externally supplied activations.
    pub fn from_parts(inputs: Vec<Vec<f64>>, activations: Vec<Activation>) -> Result<Self> {
        check_inputs(&inputs)?;
        if activations.len() != inputs.len() {
            return Err(Error::dim(format!(
                "{} inputs but {} activations",
                inputs.len(),
                activations.len()
            )));
        }
        let n = activations[0].len();
        if n == 0 || activations.iter().any(|a| a.len() != n) {
            return Err(Error::dim("activations must share a positive width"));
        }
        Ok(Self {
            inputs,
            activations,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn activation(&self, i: usize) -> &Activation {
        &self.activations[i]
    }

    /// Output width of the activations.
    pub fn n(&self) -> usize {
        self.activations[0].len()
    }

    /// Input width.
    pub fn m(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn preact_zero_count(&self) -> usize {
        self.activations.iter().map(|a| a.preact_zero_count).sum()
    }

    pub fn into_inputs(self) -> Vec<Vec<f64>> {
        self.inputs
    }
}

fn check_inputs(inputs: &[Vec<f64>]) -> Result<()> {
    let Some(first) = inputs.first() else {
        return Err(Error::config("a batch needs at least one sample"));
    };
    let m = first.len();
    if m == 0 {
        return Err(Error::dim("inputs must be non-empty"));
    }
    for (i, x) in inputs.iter().enumerate() {
        if x.len() != m {
            return Err(Error::dim(format!(
                "input {i} has length {}, expected {m}",
                x.len()
            )));
        }
        let norm = l2_norm(x);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Domain(format!(
                "input {i} has norm {norm}, inputs must be unit length"
            )));
        }
    }
    Ok(())
}

/// `G = Σᵢ ‖hᵢ‖₂² − θ`.
pub fn goodness(batch: &Batch, theta: f64) -> f64 {
    let total = batch
        .activations
        .iter()
        .fold(0.0, |acc, a| acc + a.h.iter().fold(0.0, |s, v| s + v * v));
    total - theta
}

/// `L = G(H₋) − G(H₊)`. The threshold cancels.
pub fn ffa_loss(pos: &Batch, neg: &Batch, theta: f64) -> f64 {
    goodness(neg, theta) - goodness(pos, theta)
}

/// `∂G/∂W = Σₖ 2 hₖ xₖᵀ`, summed in sample order without averaging.
pub fn goodness_gradient(batch: &Batch) -> Matrix {
    let (n, m) = (batch.n(), batch.m());
    let mut grad = Matrix::zeros(n, m).expect("batch dimensions are positive");
    for p in 0..n {
        let row = grad.row_mut(p);
        for (x, a) in batch.inputs.iter().zip(&batch.activations) {
            let c = 2.0 * a.h[p];
            // Silenced coordinates would only add zeros.
            if c == 0.0 {
                continue;
            }
            for (g, &xq) in row.iter_mut().zip(x) {
                *g += c * xq;
            }
        }
    }
    grad
}

/// `∂L/∂W = ∂G(H₋)/∂W − ∂G(H₊)/∂W`. Both batches must have the same size.
pub fn ffa_gradient(pos: &Batch, neg: &Batch) -> Result<Matrix> {
    if pos.len() != neg.len() {
        return Err(Error::config(format!(
            "positive batch has {} samples, negative batch has {}",
            pos.len(),
            neg.len()
        )));
    }
    goodness_gradient(neg).sub(&goodness_gradient(pos))
}

/// `W ← W − η·grad`, returned as a new layer.
pub fn sgd_step(layer: &LayerState, grad: &Matrix, eta: f64) -> Result<LayerState> {
    if grad.shape() != layer.weights.shape() {
        return Err(Error::dim(format!(
            "gradient {:?} for weights {:?}",
            grad.shape(),
            layer.weights.shape()
        )));
    }
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::config(format!("learning rate must be > 0, got {eta}")));
    }
    Ok(LayerState::new(unchecked_step(&layer.weights, grad, eta)))
}

/// The update arithmetic without the `eta > 0` precondition. The oracle uses
/// it for its null-update identity check.
pub(crate) fn unchecked_step(weights: &Matrix, grad: &Matrix, eta: f64) -> Matrix {
    let data = weights
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&w, &g)| w - eta * g)
        .collect();
    Matrix::from_vec(weights.rows(), weights.cols(), data).expect("shapes already checked")
}
