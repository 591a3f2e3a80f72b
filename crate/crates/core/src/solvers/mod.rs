//! Motion completion of partially observed meshes: a single rigid fit, and
//! as-rigid-as-possible deformation with hard or soft constraints.

mod arap;
mod ordering;
mod rigid;

pub use arap::{
    arap_complete, arap_post_process, ArapConfig, ArapResult, ConstraintMode, EdgeWeights, SolveReport,
    DEFAULT_LAMBDA_DATA,
};
pub use rigid::{fit_rigid, kabsch, RigidFit};

use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

/// A mesh in its source frame with the motion of a subset of its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCompletionProblem {
    mesh: TriangleMesh,
    visible: Vec<u32>,
    visible_motion: Vec<Vec3>,
}

impl MotionCompletionProblem {
    /// Pairs are reordered by vertex index; duplicates are rejected.
    pub fn new(mesh: TriangleMesh, visible: Vec<u32>, visible_motion: Vec<Vec3>) -> Result<Self> {
        if visible.is_empty() {
            return Err(Error::invalid("visible vertex set is empty"));
        }
        if visible.len() != visible_motion.len() {
            return Err(Error::invalid(format!(
                "{} visible vertices but {} motion vectors",
                visible.len(),
                visible_motion.len()
            )));
        }
        let n = mesh.vertex_count();
        if let Some(i) = visible.iter().find(|&&i| i as usize >= n) {
            return Err(Error::invalid(format!("visible vertex {i} out of range ({n} vertices)")));
        }
        if !visible_motion.iter().all(|m| m.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("visible motion contains non-finite values"));
        }
        let mut pairs: Vec<(u32, Vec3)> = visible.into_iter().zip(visible_motion).collect();
        pairs.sort_by_key(|(i, _)| *i);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!("vertex {} listed twice as visible", w[0].0)));
        }
        let (visible, visible_motion) = pairs.into_iter().unzip();
        Ok(Self {
            mesh,
            visible,
            visible_motion,
        })
    }

    /// Problem whose visible motion is taken from a full per-vertex field.
    pub fn from_full_motion(mesh: TriangleMesh, visible: Vec<u32>, motion: &[Vec3]) -> Result<Self> {
        if motion.len() != mesh.vertex_count() {
            return Err(Error::invalid(format!(
                "{} motion vectors for {} vertices",
                motion.len(),
                mesh.vertex_count()
            )));
        }
        let picked = visible
            .iter()
            .map(|&i| motion.get(i as usize).copied().ok_or_else(|| Error::invalid(format!("visible vertex {i} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mesh, visible, picked)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Sorted, unique.
    pub fn visible(&self) -> &[u32] {
        &self.visible
    }

    pub fn visible_motion(&self) -> &[Vec3] {
        &self.visible_motion
    }

    /// Vertices not in the visible set, ascending.
    pub fn hidden(&self) -> Vec<u32> {
        let mut vis = self.visible.iter().peekable();
        (0..self.mesh.vertex_count() as u32)
            .filter(|i| {
                if vis.peek() == Some(&i) {
                    vis.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}
