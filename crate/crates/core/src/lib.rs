//! View-selective variational deep learning for WiFi CSI localization.
//!
//! - [`csi`]: CSI types, relative-phase preprocessing, dataset files
//! - [`channel`]: synthetic corridor channel simulator
//! - [`nn`]: dense networks, Gaussian latents, Adam, model files
//! - [`vsdl`]: two-stage view-selective model
//! - [`baselines`]: plain variational and plain dense regressors
//! - [`eval`]: metrics, reports, experiment orchestration

pub mod baselines;
pub mod bundle;
pub mod channel;
pub mod csi;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod vsdl;

pub use error::{Error, ErrorKind, Result};
