//! Dense-matrix math, layer primitives with explicit backward rules, the
//! Adam optimizer, and finite-difference gradient verification.

pub mod gradcheck;
pub mod gru;
pub mod matrix;
pub mod ops;
pub mod param;

pub use gradcheck::{gradcheck, GradCheckOptions, GradCheckReport, ParamCheck};
pub use gru::{gru_forward, GruCache, GruParams};
pub use matrix::Matrix;
pub use ops::{
    cross_entropy, linear_forward, matmul, max_pool, mean_pool, mse, softmax_rows,
};
pub use param::{adam_step, AdamConfig, ParamTensor};
