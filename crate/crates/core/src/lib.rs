//! Virtual Big Data (VBD) toolkit.
//!
//! VBD is built by concatenating original training instances into longer
//! vectors. This crate provides:
//!
//! * [`vbd`]: synthesis of virtual datasets from small ([`vbd::synth_small`])
//!   and large ([`vbd::synth_large`]) sources, plus pairwise diversity stats.
//! * [`crossconcat`]: cross-concatenation of minority and majority classes
//!   into two balanced projected classes, and the centroid-probe decision rule
//!   used to classify test points in the projected space.
//! * [`autoencoder`] and [`anomaly`]: dense autoencoders (and a small VAE)
//!   trained on original data or VBD, and the count-threshold anomaly detector
//!   that compares a test point's reconstruction against random training pairs.
//! * [`resample`], [`models`], [`eval`]: the baselines, classifiers and the
//!   cross-validated harness used to compare all of the above.
//!
//! Everything that draws random numbers takes an explicit seed; see
//! [`rng::derive_seed`] for how sub-seeds are derived.

pub mod anomaly;
pub mod autoencoder;
pub mod crossconcat;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model_io;
pub mod models;
pub mod nn;
pub mod resample;
pub mod rng;
pub mod vbd;

pub use error::{Error, Result};
