//! Dense numerical engine: matrices, activations, losses with hand-derived
//! gradients, neighbourhood aggregation and the Adam optimizer.

mod adam;
mod matrix;
mod ops;
mod propagate;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use matrix::DenseMatrix;
pub use ops::{
    bce_loss, cosine_similarity, cross_entropy_loss, sigmoid, softmax_rows, wbce_loss, Activation,
    PROB_EPS,
};
pub(crate) use ops::cosine_with_grad;
pub use propagate::{gcn_layer_forward, mean_aggregate, Aggregation, Propagator};
