//! Minimal dense-network engine: layers, activations, losses, descent and a
//! finite-difference oracle. Everything is `f64`.

mod activation;
mod checkpoint;
mod gradcheck;
mod loss;
mod mlp;
mod optim;

pub use activation::{HiddenActivation, OutputActivation};
pub use checkpoint::{LayerRecord, MlpRecord, CHECKPOINT_VERSION, MLP_FORMAT};
pub use gradcheck::fd_gradient;
pub use loss::{binary_cross_entropy, cross_entropy_loss, mse_loss, PROB_EPS};
pub use mlp::{ForwardCache, GradientSet, Mlp, SeedLineage};
pub use optim::{sgd_step, OptimizerKind, OptimizerState, DEFAULT_LEARNING_RATE};
