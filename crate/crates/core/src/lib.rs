//! Single-layer forward-forward training with per-sample sparsity analysis.

pub mod data;
pub mod error;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod theory;

pub use error::{Error, Result};
pub use model::{Activation, Batch, LayerState};
pub use numerics::{Matrix, SeededRng};
