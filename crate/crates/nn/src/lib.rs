//! Small dense networks for actor-critic and value-based agents.
//!
//! Everything is `f64` and hand-differentiated: a fixed-topology MLP with
//! ReLU / sigmoid / linear activations, its exact backward pass, an Adam
//! optimizer over flat parameter slices, and a flat weight vector with a
//! binary checkpoint format used for federated exchange.

mod adam;
mod flat;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use flat::{FlatWeights, TensorLayout};
pub use mlp::{Activation, Cache, Gradients, Layer, LayerGrad, Mlp, Topology};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("activation cache is stale: network changed since the forward pass")]
    StaleCache,
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("weight layout mismatch: {0}")]
    Layout(String),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
