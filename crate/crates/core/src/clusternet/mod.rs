//! Mixture of paired function and context networks, trained with
//! alternating regression and gate-classification steps.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{ClusterNetRecord, ClusterRecord, CLUSTERNET_FORMAT};
pub use model::{
    argmax, combine, select_hard, BatchOutput, Cluster, ClusterArchitecture, ClusterNet,
    ClusterOutput, GateMode,
};
pub use train::{
    context_gradients, context_loss, function_gradients, function_loss, train, train_fcn,
    train_step_context, train_step_function, ClusterOptimizers, IterationUnit, LossTrace,
    TrainConfig,
};
