//! Neural network substrate: tensors, a reverse-mode tape, layers, Adam and
//! finite-difference gradient checking.

pub mod adam;
pub mod container;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod ops;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use graph::{Gradients, Graph, PRef, SetHandle, Var};
pub use layers::{BiLstm, CharCnn, Dropout, Embedding, LstmCell, Linear};
pub use tensor::{clip_grad_norm, ParamId, ParamSet, Tensor};
