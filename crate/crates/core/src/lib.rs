//! Synthetic 4D data generation from animated meshes, sparse volumetric
//! shape and motion fields, classical motion-completion solvers and the
//! accompanying evaluation metrics.

pub mod error;
pub mod formats;
pub mod geometry;
pub mod metrics;
pub mod motion_field;
pub mod pipeline;
pub mod spatial;
pub mod render;
pub mod solvers;
pub mod synthetic;
pub mod volumetric;

pub use error::{Error, Result};
