//! Dense arrays and differentiable layers with hand-written backward passes.

mod activation;
mod conv1d;
mod dense;
pub mod gradcheck;
mod layer;
mod ops;
mod recurrent;
mod sequential;
mod tensor;

pub use activation::{relu, relu_scalar, sigmoid, sigmoid_scalar, tanh, tanh_scalar};
pub use conv1d::Conv1d;
pub use dense::Dense;
pub use layer::Layer;
pub use ops::{LastStep, MaxPool1d, Relu};
pub use recurrent::{CellKind, Gate, RecurrentCell, RecurrentLayer, RecurrentState};
pub use sequential::{Sequential, Stage};
pub use tensor::Tensor;
