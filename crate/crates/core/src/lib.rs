//! Voxel time-series volumes to correlation graphs to graph-level
//! classifiers, end to end.
//!
//! The pipeline: parse a 4D volume (VOX1), drop signal-free voxels and
//! z-normalize the rest, correlate every voxel pair with a tiled parallel
//! kernel, keep edges above a threshold (BGR1 graphs), then train and
//! evaluate four architectures — FFN, GCN, GAT, GCRN — on graph-level
//! binary labels with grid-searched hyperparameters.

pub mod dataset;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod parallel;
pub mod pcc;
pub mod synth;
pub mod train;
pub mod volume;
pub mod voxels;

mod wire;

pub use error::{Error, Result};
