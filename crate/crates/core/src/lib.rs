//! Collapse-resistant Gaussian VAE training on spherical-shell data.
//!
//! Data is centered and mapped onto a thin spherical shell, clustered with
//! K-means, and the clustering fixes an interval `[W, δ_collapse]` for the
//! cluster-aware reconstruction loss. Training adds a hinge penalty that
//! keeps that loss inside the interval and a penalty that keeps decoder
//! output norms near the shell's mid radius. A decoder that ignores its
//! latent code (every output equal to the data mean) has cluster loss
//! exactly `δ_collapse`.
//!
//! The crate is `no_std` + `alloc`; file formats and the command-line tool
//! live in the `shellvae` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod clustering;
pub mod constraints;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod objective;
pub mod optim;
pub mod rng;
pub mod spectral;
pub mod synth;
pub mod train;
pub mod vae;

pub use clustering::{feasible_region, kmeans, verify_identity, Clustering, FeasibleInterval, FeasibleRegion, KMeansConfig};
pub use error::{Error, Result};
pub use geometry::{ShellDataset, ShellParams};
pub use matrix::Matrix;
pub use metrics::EvalResult;
pub use train::{train, ConstraintVariant, Seeds, TrainConfig, TrainReport};
pub use vae::VaeModel;
