//! Deterministic dense math: tensors, activations, loss, Adam, the seeded
//! PRNG and the central-difference gradient oracle.
//!
//! Everything is `f64` and single-threaded; reductions always run in index
//! order so results are reproducible bit-for-bit on one platform.

mod adam;
mod gradcheck;
mod ops;
mod prng;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error};
pub use ops::{
    activation, binary_cross_entropy, gelu, gelu_grad, matmul, relu, sigmoid, softmax_in_place,
    Activation, BCE_CLAMP,
};
pub use prng::{xavier_init, Prng};
pub use tensor::Tensor;

pub(crate) use ops::{add_matvec, add_matvec_t, add_outer};
