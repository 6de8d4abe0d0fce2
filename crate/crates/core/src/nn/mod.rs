//! From-scratch 1D-CNN regressors, backpropagation and Adam.

pub mod adam;
pub mod layers;
pub mod model_io;
pub mod network;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    conv1d_forward, dense_forward, dropout_forward, leaky_relu, leaky_relu_tensor, Conv1dLayer, DenseLayer, Tensor,
};
pub use model_io::{load_model, save_model, Model};
pub use network::{forward_multi_head, forward_single_head, Architecture, NetConfig, NetworkParams};
pub use train::{backward, mse_loss, train, BatchGradient, Example, TrainConfig};
