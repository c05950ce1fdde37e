//! Reverse-mode neural-network engine: the layers needed by the encoder and
//! decoder stacks, fused softmax cross-entropy, and Adam.

mod activation;
mod adam;
mod conv;
mod dense;
mod dropout;
mod layer;
pub(crate) mod linalg;
mod loss;
mod network;
mod pool;

pub use activation::{softmax_rows, Activation};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use dropout::{dropout_apply, dropout_forward};
pub use layer::LayerKind;
pub use loss::{softmax_cross_entropy, CrossEntropy};
pub use network::{Network, NetworkSpec};
pub use pool::{maxpool2d_backward, maxpool2d_forward, Pooled};
