//! Implicit temporal alignment for few-shot video classification, built on
//! a small dense-tensor autodiff tape.
//!
//! The crate is organized bottom-up:
//!
//! - [`rng`]: seeded xoshiro256** streams and tag-derived sub-seeds.
//! - [`tensor`]: row-major `NdArray` over `f32`/`f64` plus the rank-4
//!   feature-map and rank-2 frame-sequence views.
//! - [`tape`]: eager reverse-mode autodiff over named parameters.
//! - [`attention`]: spatial/channel/temporal attention blocks and
//!   positional encodings.
//! - [`metrics`]: frame-wise, mean-pooled, and DTW sequence similarities
//!   with a multiply-accumulate census.
//! - [`episodes`]: C-way K-shot sampling and class splits.
//! - [`data`]: the FVF1 feature container, dataset manifests, and the
//!   synthetic twin-class generator.
//! - [`model`]: the end-to-end embedding pipeline, multi-task loss, SGD
//!   training, and evaluation.
//! - [`checkpoint`]: versioned binary parameter snapshots.
//! - [`gradcheck`]: finite-difference verification of every gradient rule.
//! - [`bench`]: analytic cost formulas and wall-clock scaling slopes.
//! - [`config`]: the JSON run configuration with dotted-path overrides.

pub mod attention;
pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod episodes;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
