//! Geometric primitives shared by the rest of the crate.

mod camera;
mod mesh;
mod rotation;
mod transform;

pub use camera::{Intrinsics, PinholeCamera, Projection};
pub use mesh::{
    compute_vertex_normals, vertex_displacements, AnimationClip, TriangleMesh, VertexNormals,
    DEFAULT_FRAME_RATE,
};
pub use rotation::random_rotation;
pub use transform::{dqb_blend, dqb_blend_dual, fit_rotation, DualQuaternion, RigidTransform};

/// Positions, displacements and directions, in meters.
pub type Vec3 = nalgebra::Vector3<f64>;
