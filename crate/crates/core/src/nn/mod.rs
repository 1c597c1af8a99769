//! A minimal dense-network engine.
//!
//! Networks are plain MLPs: affine layers with ReLU on every hidden layer and
//! an identity output layer. Batches are row-major `B × d` matrices of `f64`.
//! Gradients are computed by explicit reverse-mode accumulation over the
//! cached activations of a forward pass.

mod matrix;
mod network;
mod optim;

pub use matrix::{Matrix, SampleBatch};
pub use network::{backward, forward, init_network, Checkpoint, ForwardPass, Gradients, Network};
pub use optim::{adam_step, clip_gradient_norm, AdamState};
