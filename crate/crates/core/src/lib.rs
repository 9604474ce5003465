//! SAR colorization toolkit.
//!
//! The pipeline: build a reference colorized SAR image for each SAR/optical pair by
//! fast-IHS component substitution ([`protocol`]), fit or train a colorizer from SAR alone
//! ([`regress`] for the spectral baselines, [`models`] for the convolutional and
//! adversarial networks), then score colorized outputs against the references with
//! NRMSE, SAM, Q4 and R² ([`metrics`]). [`bench`] wires the stages together and runs the
//! ablation grids; [`dataio`] holds the patch file format and dataset manifests.

pub mod bench;
pub mod dataio;
mod error;
pub mod metrics;
pub mod models;
pub mod protocol;
mod raster;
pub mod regress;
pub mod stats;

pub use error::{Error, Result};
pub use raster::{PairedSample, RasterPatch, DEFAULT_BIT_DEPTH};
