//! Generalized Hadamard products of matrices, block-constant tensor lifts and
//! first-order eigenvalue perturbation identities, with a randomized
//! verification harness.

pub mod blocks;
pub mod cli;
pub mod eig;
pub mod error;
pub mod hadamard;
pub mod lifts;
pub mod matrix;
pub mod perm;
pub mod tensor;
pub mod verify;

pub use blocks::BlockPartition;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use perm::Perm;
pub use tensor::DenseTensor;
