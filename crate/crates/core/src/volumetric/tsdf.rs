//! Projective TSDF from single depth maps and multi-view fusion.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::Vec3;
use crate::render::DepthMap;
use crate::volumetric::grid::{GridLayout, TsdfGrid, VoxelCoord, TRUNCATION_VOXELS};

/// Voxel sizes (meters) of the four resolution levels, finest first.
pub const HIERARCHY_VOXEL_SIZES: [f64; 4] = [0.01, 0.02, 0.04, 0.08];
/// Voxel size of the single-view input TSDF (meters).
pub const INPUT_VOXEL_SIZE: f64 = 0.01;

/// Single-view TSDF with voxel `(0, 0, 0)` centered at the world origin.
pub fn projective_tsdf(depth: &DepthMap, voxel_size: f64) -> Result<TsdfGrid> {
    Ok(projective_tsdf_in(depth, GridLayout::with_voxel_size(voxel_size)?))
}

/// Single-view projective TSDF.
///
/// Every voxel met by a pixel ray inside the truncation band around its
/// measured depth is projected back into the image; its value is
/// `(measured depth - voxel depth) / voxel_size`, so voxels in front of the
/// surface are positive. Only voxels with `|sdf| < 3` are kept.
pub fn projective_tsdf_in(depth: &DepthMap, layout: GridLayout) -> TsdfGrid {
    let camera = &depth.camera;
    let (w, h) = (depth.width(), depth.height());
    let band = TRUNCATION_VOXELS * layout.voxel_size;

    let mut candidates: Vec<VoxelCoord> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let mut cells = Vec::new();
            for col in 0..w {
                let Some(d) = depth.get(col, row) else { continue };
                let (origin, dir) = camera.ray(col as f64, row as f64);
                let near = (d - band).max(0.0);
                let far = d + band;
                traverse_segment(
                    &layout.to_grid(&(origin + dir * near)),
                    &layout.to_grid(&(origin + dir * far)),
                    &mut cells,
                );
            }
            cells.sort_unstable();
            cells.dedup();
            cells
        })
        .collect();
    candidates.par_sort_unstable();
    candidates.dedup();

    let values: Vec<Option<(VoxelCoord, f64)>> = candidates
        .par_iter()
        .map(|c| {
            let sdf = projective_value(depth, &layout, c)?;
            (sdf.abs() < TRUNCATION_VOXELS).then_some((*c, sdf))
        })
        .collect();
    let mut grid = TsdfGrid::new(layout);
    for (c, v) in values.into_iter().flatten() {
        grid.insert(c, v).expect("value inside truncation band");
    }
    grid
}

/// Untruncated projective distance of one voxel, in voxel units; `None` when
/// the voxel center does not project onto a valid pixel.
pub fn projective_value(depth: &DepthMap, layout: &GridLayout, c: &VoxelCoord) -> Option<f64> {
    let p = depth.camera.project(&layout.center(c))?;
    let (col, row) = depth.camera.pixel_at(p.u, p.v)?;
    let measured = depth.get(col, row)?;
    Some((measured - p.depth) / layout.voxel_size)
}

/// Appends the voxels crossed by the segment `a -> b` (grid coordinates).
fn traverse_segment(a: &Vec3, b: &Vec3, out: &mut Vec<VoxelCoord>) {
    // Voxel k spans [k - 0.5, k + 0.5) in grid coordinates.
    let a = a.add_scalar(0.5);
    let b = b.add_scalar(0.5);
    let mut cell = [a.x.floor() as i32, a.y.floor() as i32, a.z.floor() as i32];
    let end = [b.x.floor() as i32, b.y.floor() as i32, b.z.floor() as i32];
    let d = b - a;
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for axis in 0..3 {
        if d[axis] > 0.0 {
            step[axis] = 1;
            t_delta[axis] = 1.0 / d[axis];
            t_max[axis] = (cell[axis] as f64 + 1.0 - a[axis]) / d[axis];
        } else if d[axis] < 0.0 {
            step[axis] = -1;
            t_delta[axis] = -1.0 / d[axis];
            t_max[axis] = (cell[axis] as f64 - a[axis]) / d[axis];
        }
    }
    let budget: i32 = (0..3).map(|i| (end[i] - cell[i]).abs()).sum::<i32>() + 1;
    out.push(cell);
    for _ in 0..budget {
        if cell == end {
            break;
        }
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            break;
        }
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        out.push(cell);
    }
}

/// TSDF with the number of observations averaged into each voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTsdfGrid {
    pub tsdf: TsdfGrid,
    weights: BTreeMap<VoxelCoord, f64>,
}

impl WeightedTsdfGrid {
    pub fn weight(&self, c: &VoxelCoord) -> Option<f64> {
        self.weights.get(c).copied()
    }

    pub fn weights(&self) -> impl Iterator<Item = (&VoxelCoord, &f64)> {
        self.weights.iter()
    }

    pub fn voxel_size(&self) -> f64 {
        self.tsdf.voxel_size()
    }

    pub fn len(&self) -> usize {
        self.tsdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tsdf.is_empty()
    }
}

pub fn fuse_tsdf(depths: &[DepthMap], voxel_size: f64) -> Result<WeightedTsdfGrid> {
    Ok(fuse_tsdf_in(depths, GridLayout::with_voxel_size(voxel_size)?))
}

/// Averages the projective TSDFs of all views, one unit of weight per view
/// that stores the voxel. Views are accumulated in list order.
pub fn fuse_tsdf_in(depths: &[DepthMap], layout: GridLayout) -> WeightedTsdfGrid {
    let per_view: Vec<TsdfGrid> = depths
        .par_iter()
        .map(|d| projective_tsdf_in(d, layout))
        .collect();
    let mut acc: BTreeMap<VoxelCoord, (f64, f64)> = BTreeMap::new();
    for view in &per_view {
        for (c, v) in view.iter() {
            let e = acc.entry(*c).or_insert((0.0, 0.0));
            e.0 += v;
            e.1 += 1.0;
        }
    }
    let mut tsdf = TsdfGrid::new(layout);
    let mut weights = BTreeMap::new();
    for (c, (sum, weight)) in acc {
        let v = sum / weight;
        if v.abs() < TRUNCATION_VOXELS {
            tsdf.insert(c, v).expect("average of truncated values");
            weights.insert(c, weight);
        }
    }
    WeightedTsdfGrid { tsdf, weights }
}

/// Fused TSDFs at several resolutions, each computed directly from the views.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionHierarchy {
    pub levels: Vec<WeightedTsdfGrid>,
}

impl ResolutionHierarchy {
    pub fn voxel_sizes(&self) -> Vec<f64> {
        self.levels.iter().map(WeightedTsdfGrid::voxel_size).collect()
    }
}

/// Four-level hierarchy at 1, 2, 4 and 8 cm.
pub fn build_hierarchy(depths: &[DepthMap]) -> Result<ResolutionHierarchy> {
    build_hierarchy_with_sizes(depths, &HIERARCHY_VOXEL_SIZES)
}

pub fn build_hierarchy_with_sizes(depths: &[DepthMap], sizes: &[f64]) -> Result<ResolutionHierarchy> {
    let levels = sizes
        .iter()
        .map(|&s| fuse_tsdf(depths, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolutionHierarchy { levels })
}
