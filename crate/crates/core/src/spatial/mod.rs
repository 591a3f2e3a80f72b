//! Spatial acceleration structures.

mod bvh;
mod kdtree;

pub use bvh::{Bvh, RayHit};
pub use kdtree::{KdTree, Neighbor};
