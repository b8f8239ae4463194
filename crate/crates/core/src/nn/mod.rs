//! Small dense-network engine in `f64`.
//!
//! Batches are `Array2` with one sample per row. Every forward pass records an
//! [`MlpTrace`]; `backward` consumes it and returns exact reverse-mode
//! gradients. There is no general autodiff: the fixed architectures of this
//! crate are wired by hand on top of these pieces.

mod adam;
mod dense;
mod gaussian;
pub mod gradcheck;
pub mod io;
mod loss;

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, Dense, DenseGrads, Mlp, MlpGrads, MlpTrace};
pub use gaussian::{kl_diag_gaussian, reparameterize, standard_normal_matrix, GaussianLatent};
pub use loss::{squared_error_grad, squared_error_rows};
