//! Sparse voxel grids, truncated signed distance fields and iso-surface
//! extraction.

mod grid;
mod marching_cubes;
mod mc_tables;
mod tsdf;

pub use grid::{
    GridLayout, MotionGrid, PayloadKind, SparseVoxelGrid, TsdfGrid, VoxelCoord, VoxelPayload,
    TRUNCATION_VOXELS,
};
pub use marching_cubes::marching_cubes;
pub use tsdf::{
    build_hierarchy, build_hierarchy_with_sizes, fuse_tsdf, fuse_tsdf_in, projective_tsdf,
    projective_tsdf_in, projective_value, ResolutionHierarchy, WeightedTsdfGrid,
    HIERARCHY_VOXEL_SIZES, INPUT_VOXEL_SIZE,
};
