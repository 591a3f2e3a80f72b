//! Point-based (scene flow) and volumetric motion fields and the conversions
//! between them.
//!
//! * Points to voxels: inverse-distance weighting over the `k` nearest points,
//!   `m(v) = Σ m_i / d_i / Σ 1 / d_i`.
//! * Voxels to points: trilinear interpolation over the 8 voxel centers of the
//!   cube enclosing the query.
//! * Mesh animation to voxels: dual quaternion blending of the transforms of
//!   the `k` nearest mesh vertices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    dqb_blend, fit_rotation, vertex_displacements, AnimationClip, RigidTransform, Vec3,
};
use crate::spatial::{KdTree, Neighbor};
use crate::volumetric::{GridLayout, MotionGrid, ResolutionHierarchy, TsdfGrid, VoxelCoord};

/// Neighbour count for inverse-distance interpolation and for blending.
pub const DEFAULT_NEIGHBORS: usize = 3;
/// Corners of the interpolation cube.
pub const TRILINEAR_CORNERS: usize = 8;
/// Distances below this (meters) count as coincident points.
pub const COINCIDENCE_EPS: f64 = 1e-9;

/// Points with one motion vector each (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct PointMotionSet {
    points: Vec<Vec3>,
    motions: Vec<Vec3>,
}

impl PointMotionSet {
    pub fn new(points: Vec<Vec3>, motions: Vec<Vec3>) -> Result<Self> {
        if points.len() != motions.len() {
            return Err(Error::invalid(format!(
                "{} points but {} motion vectors",
                points.len(),
                motions.len()
            )));
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !points.iter().all(finite) || !motions.iter().all(finite) {
            return Err(Error::invalid("point motion set contains non-finite values"));
        }
        Ok(Self { points, motions })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn motions(&self) -> &[Vec3] {
        &self.motions
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("index {i} out of range ({} points)", self.len())));
        }
        Ok(Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            motions: indices.iter().map(|&i| self.motions[i]).collect(),
        })
    }
}

/// Normalized inverse-distance weights for sorted neighbours. A neighbour
/// closer than [`COINCIDENCE_EPS`] takes all the weight.
pub fn inverse_distance_weights(neighbors: &[Neighbor]) -> Vec<(usize, f64)> {
    if let Some(n) = neighbors.iter().find(|n| n.distance() < COINCIDENCE_EPS) {
        return vec![(n.index, 1.0)];
    }
    let inv: Vec<f64> = neighbors.iter().map(|n| 1.0 / n.distance()).collect();
    let total: f64 = inv.iter().sum();
    neighbors
        .iter()
        .zip(inv)
        .map(|(n, w)| (n.index, w / total))
        .collect()
}

/// Inverse-distance interpolation of the point motions at arbitrary positions.
pub fn idw_interpolate(sff: &PointMotionSet, positions: &[Vec3], k: usize) -> Result<Vec<Vec3>> {
    if sff.is_empty() {
        return Err(Error::invalid("scene flow field is empty"));
    }
    if k == 0 {
        return Err(Error::invalid("neighbour count must be at least 1"));
    }
    let tree = KdTree::new(sff.points());
    Ok(positions
        .par_iter()
        .map(|v| {
            inverse_distance_weights(&tree.nearest_k(v, k))
                .into_iter()
                .map(|(i, w)| sff.motions[i] * w)
                .sum()
        })
        .collect())
}

/// Scene flow to a volumetric motion field on the given voxels.
pub fn sff_to_vmf(
    sff: &PointMotionSet,
    layout: GridLayout,
    voxels: &[VoxelCoord],
    k: usize,
) -> Result<MotionGrid> {
    let centers: Vec<Vec3> = voxels.iter().map(|c| layout.center(c)).collect();
    let motions = idw_interpolate(sff, &centers, k)?;
    MotionGrid::from_entries(layout, voxels.iter().copied().zip(motions))
}

/// Scene flow to a motion field on exactly the voxels stored in `tsdf`.
pub fn sff_to_vmf_on(sff: &PointMotionSet, tsdf: &TsdfGrid, k: usize) -> Result<MotionGrid> {
    let voxels: Vec<VoxelCoord> = tsdf.coords().copied().collect();
    sff_to_vmf(sff, tsdf.layout, &voxels, k)
}

/// How a trilinear sample was supported by stored voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Every corner with non-zero weight is stored.
    Full,
    /// Some weighted corners are missing; the rest were renormalized.
    Partial,
    /// No corner stored: copied from the nearest stored voxel.
    Extrapolated,
}

/// Motion sampled at query points, with per-point support flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMotion {
    pub motion: PointMotionSet,
    pub support: Vec<Support>,
}

/// Grid coordinates with near-integer components snapped, so queries at
/// voxel centers land exactly on them.
fn snapped_grid_coords(layout: &GridLayout, p: &Vec3) -> Vec3 {
    layout.to_grid(p).map(|g| {
        let r = g.round();
        if (g - r).abs() < 1e-9 {
            r
        } else {
            g
        }
    })
}

/// Trilinear weights of the 8 cube corners around `p`, in the order
/// `(dx, dy, dz)` with `dx` fastest.
pub fn trilinear_corners(layout: &GridLayout, p: &Vec3) -> [(VoxelCoord, f64); TRILINEAR_CORNERS] {
    let g = snapped_grid_coords(layout, p);
    let base = g.map(f64::floor);
    let f = g - base;
    let b = [base.x as i32, base.y as i32, base.z as i32];
    std::array::from_fn(|i| {
        let d = [(i & 1) as i32, ((i >> 1) & 1) as i32, ((i >> 2) & 1) as i32];
        let w = (0..3)
            .map(|a| if d[a] == 1 { f[a] } else { 1.0 - f[a] })
            .product::<f64>();
        ([b[0] + d[0], b[1] + d[1], b[2] + d[2]], w)
    })
}

/// Volumetric motion field to per-point motion by trilinear interpolation.
pub fn vmf_to_sff(vmf: &MotionGrid, queries: &[Vec3]) -> Result<SampledMotion> {
    if vmf.is_empty() {
        return Err(Error::invalid("volumetric motion field is empty"));
    }
    let layout = vmf.layout;
    let sampled: Vec<Option<(Vec3, Support)>> = queries
        .par_iter()
        .map(|p| {
            let mut sum = Vec3::zeros();
            let mut total = 0.0;
            let mut missing = false;
            for (c, w) in trilinear_corners(&layout, p) {
                if w == 0.0 {
                    continue;
                }
                match vmf.get(&c) {
                    Some(m) => {
                        sum += m * w;
                        total += w;
                    }
                    None => missing = true,
                }
            }
            (total > 0.0).then(|| {
                let support = if missing { Support::Partial } else { Support::Full };
                (sum / total, support)
            })
        })
        .collect();

    let mut nearest: Option<(KdTree, Vec<Vec3>)> = None;
    let mut motions = Vec::with_capacity(queries.len());
    let mut support = Vec::with_capacity(queries.len());
    for (p, s) in queries.iter().zip(sampled) {
        match s {
            Some((m, flag)) => {
                motions.push(m);
                support.push(flag);
            }
            None => {
                let (tree, values) = nearest.get_or_insert_with(|| {
                    let centers = vmf.centers();
                    let values = vmf.iter().map(|(_, m)| *m).collect();
                    (KdTree::new(&centers), values)
                });
                let n = tree.nearest(p).expect("non-empty grid");
                motions.push(values[n.index]);
                support.push(Support::Extrapolated);
            }
        }
    }
    Ok(SampledMotion {
        motion: PointMotionSet::new(queries.to_vec(), motions)?,
        support,
    })
}

/// Per-vertex rotations attached before blending vertex motions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexRotation {
    /// Pure translations; blending reduces to weighted averaging.
    #[default]
    Identity,
    /// Best-fit rotation of each vertex's one-ring between the two frames.
    OneRing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VmfOptions {
    pub k: usize,
    pub rotations: VertexRotation,
}

impl Default for VmfOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_NEIGHBORS,
            rotations: VertexRotation::Identity,
        }
    }
}

fn vertex_transforms(
    clip: &AnimationClip,
    src: usize,
    dst: usize,
    rotations: VertexRotation,
) -> Result<Vec<RigidTransform>> {
    let from = clip.frame(src)?;
    let to = clip.frame(dst)?;
    let disp = vertex_displacements(clip, src, dst)?;
    match rotations {
        VertexRotation::Identity => Ok(disp.into_iter().map(RigidTransform::from_translation).collect()),
        VertexRotation::OneRing => {
            let rings = clip.mesh().vertex_neighbors();
            Ok(rings
                .par_iter()
                .enumerate()
                .map(|(i, ring)| {
                    let cov = ring.iter().fold(nalgebra::Matrix3::zeros(), |acc, &j| {
                        let a = from[j as usize] - from[i];
                        let b = to[j as usize] - to[i];
                        acc + a * b.transpose()
                    });
                    let rotation = if ring.len() >= 2 {
                        fit_rotation(&cov).unwrap_or_else(nalgebra::Matrix3::identity)
                    } else {
                        nalgebra::Matrix3::identity()
                    };
                    RigidTransform::from_parts_unchecked(rotation, to[i] - rotation * from[i])
                })
                .collect())
        }
    }
}

/// Ground-truth motion of voxels near an animated surface.
///
/// Each voxel center is bound to its `k` nearest vertices in frame `src`;
/// their transforms are blended with inverse-distance weights and the motion
/// is the blended transform applied to the center, minus the center.
pub fn generate_vmf(
    clip: &AnimationClip,
    src: usize,
    dst: usize,
    layout: GridLayout,
    voxels: &[VoxelCoord],
    options: &VmfOptions,
) -> Result<MotionGrid> {
    if options.k == 0 {
        return Err(Error::invalid("neighbour count must be at least 1"));
    }
    let transforms = vertex_transforms(clip, src, dst, options.rotations)?;
    let tree = KdTree::new(clip.frame(src)?);
    let motions = voxels
        .par_iter()
        .map(|c| {
            let v = layout.center(c);
            let (idx, w): (Vec<usize>, Vec<f64>) =
                inverse_distance_weights(&tree.nearest_k(&v, options.k))
                    .into_iter()
                    .unzip();
            let ts: Vec<RigidTransform> = idx.iter().map(|&i| transforms[i]).collect();
            Ok(dqb_blend(&ts, &w)?.apply(&v) - v)
        })
        .collect::<Result<Vec<Vec3>>>()?;
    MotionGrid::from_entries(layout, voxels.iter().copied().zip(motions))
}

/// [`generate_vmf`] on the voxels stored in `tsdf`.
pub fn generate_vmf_on(
    clip: &AnimationClip,
    src: usize,
    dst: usize,
    tsdf: &TsdfGrid,
    options: &VmfOptions,
) -> Result<MotionGrid> {
    let voxels: Vec<VoxelCoord> = tsdf.coords().copied().collect();
    generate_vmf(clip, src, dst, tsdf.layout, &voxels, options)
}

/// One motion field per hierarchy level, on that level's voxels.
pub fn vmf_hierarchy(
    clip: &AnimationClip,
    src: usize,
    dst: usize,
    hierarchy: &ResolutionHierarchy,
    options: &VmfOptions,
) -> Result<Vec<MotionGrid>> {
    hierarchy
        .levels
        .iter()
        .map(|level| generate_vmf_on(clip, src, dst, &level.tsdf, options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{icosphere, translating_clip};
    use approx::assert_relative_eq;

    fn layout(s: f64) -> GridLayout {
        GridLayout::with_voxel_size(s).unwrap()
    }

    #[test]
    fn constant_flow_is_preserved() {
        let m = Vec3::new(0.1, -0.2, 0.3);
        let pts: Vec<Vec3> = (0..20).map(|i| Vec3::new(i as f64 * 0.1, (i % 3) as f64, 0.5)).collect();
        let sff = PointMotionSet::new(pts.clone(), vec![m; 20]).unwrap();
        let voxels: Vec<VoxelCoord> = (0..10).map(|i| [i, -i, 2 * i]).collect();
        let vmf = sff_to_vmf(&sff, layout(0.05), &voxels, 3).unwrap();
        assert_eq!(vmf.len(), 10);
        for (_, v) in vmf.iter() {
            assert_relative_eq!(*v, m, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_point_weights() {
        let sff = PointMotionSet::new(
            vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)],
            vec![Vec3::x(), Vec3::y()],
        )
        .unwrap();
        let out = idw_interpolate(&sff, &[Vec3::new(0.5, 0.0, 0.0)], 2).unwrap();
        // brute force: weights 1/0.5 and 1/1.5
        let (w1, w2) = (1.0 / 0.5, 1.0 / 1.5);
        let expected = (Vec3::x() * w1 + Vec3::y() * w2) / (w1 + w2);
        assert_relative_eq!(out[0], expected, epsilon = 1e-15);
        assert_relative_eq!(out[0], Vec3::new(0.75, 0.25, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn coincident_point_is_copied() {
        let sff = PointMotionSet::new(
            vec![Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0)],
            vec![Vec3::x(), Vec3::y()],
        )
        .unwrap();
        let out = idw_interpolate(&sff, &[Vec3::new(0.1, 0.0, 0.0)], 2).unwrap();
        assert_eq!(out[0], Vec3::y());
    }

    #[test]
    fn empty_inputs_are_errors() {
        let empty = PointMotionSet::new(vec![], vec![]).unwrap();
        assert!(idw_interpolate(&empty, &[Vec3::zeros()], 3).is_err());
        assert!(vmf_to_sff(&MotionGrid::new(layout(0.1)), &[Vec3::zeros()]).is_err());
        assert!(PointMotionSet::new(vec![Vec3::zeros()], vec![]).is_err());
    }

    fn cube_vmf() -> MotionGrid {
        let entries = (0..8).map(|i| {
            let c = [i & 1, (i >> 1) & 1, (i >> 2) & 1];
            (c, Vec3::new(i as f64, (i * i) as f64, -(i as f64)))
        });
        MotionGrid::from_entries(layout(0.1), entries).unwrap()
    }

    #[test]
    fn trilinear_at_voxel_center_is_exact() {
        let vmf = cube_vmf();
        for (c, m) in vmf.iter() {
            let out = vmf_to_sff(&vmf, &[vmf.layout.center(c)]).unwrap();
            assert_eq!(out.motion.motions()[0], *m);
            assert_eq!(out.support[0], Support::Full);
        }
    }

    #[test]
    fn trilinear_at_cube_center_is_mean() {
        let vmf = cube_vmf();
        let mean: Vec3 = vmf.iter().map(|(_, m)| *m).sum::<Vec3>() / 8.0;
        let out = vmf_to_sff(&vmf, &[Vec3::new(0.05, 0.05, 0.05)]).unwrap();
        assert_relative_eq!(out.motion.motions()[0], mean, epsilon = 1e-12);
    }

    #[test]
    fn partial_and_extrapolated_support() {
        let vmf = cube_vmf();
        let lone = MotionGrid::from_entries(
            vmf.layout,
            vmf.iter().filter(|(c, _)| **c != [1, 1, 1]).map(|(c, m)| (*c, *m)),
        )
        .unwrap();
        let out = vmf_to_sff(&lone, &[Vec3::new(0.05, 0.05, 0.05), Vec3::new(5.0, 5.0, 5.0)]).unwrap();
        assert_eq!(out.support, vec![Support::Partial, Support::Extrapolated]);
        let mean7: Vec3 = lone.iter().map(|(_, m)| *m).sum::<Vec3>() / 7.0;
        assert_relative_eq!(out.motion.motions()[0], mean7, epsilon = 1e-12);
        assert_eq!(out.motion.motions()[1], *lone.get(&[0, 1, 1]).unwrap()); // ties go to the lowest coordinate
    }

    #[test]
    fn rigid_translation_vmf_is_constant() {
        let mesh = icosphere(2, 0.3);
        let t = Vec3::new(0.02, 0.01, -0.03);
        let clip = translating_clip(&mesh, t, 4).unwrap();
        let voxels: Vec<VoxelCoord> = (-5..5).flat_map(|x| (-5..5).map(move |y| [x, y, 3])).collect();
        for rotations in [VertexRotation::Identity, VertexRotation::OneRing] {
            let vmf = generate_vmf(
                &clip,
                0,
                3,
                layout(0.1),
                &voxels,
                &VmfOptions { k: 3, rotations },
            )
            .unwrap();
            for (_, m) in vmf.iter() {
                assert_relative_eq!(*m, t * 3.0, epsilon = 1e-12);
            }
        }
        let zero = generate_vmf(&clip, 2, 2, layout(0.1), &voxels, &VmfOptions::default()).unwrap();
        assert!(zero.iter().all(|(_, m)| m.norm() < 1e-15));
        assert!(generate_vmf(&clip, 0, 4, layout(0.1), &voxels, &VmfOptions::default()).is_err());
    }
}
