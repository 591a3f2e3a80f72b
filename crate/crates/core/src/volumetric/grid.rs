use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Integer voxel coordinate `(x, y, z)`.
pub type VoxelCoord = [i32; 3];

/// Truncation band half-width, in voxels.
pub const TRUNCATION_VOXELS: f64 = 3.0;

/// Maps voxel coordinates to world positions: voxel `c` is centered at
/// `origin + c * voxel_size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub voxel_size: f64,
    pub origin: Vec3,
}

impl GridLayout {
    pub fn new(voxel_size: f64, origin: Vec3) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::invalid(format!("voxel size {voxel_size} must be positive")));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self { voxel_size, origin })
    }

    /// Layout with the origin at the world origin.
    pub fn with_voxel_size(voxel_size: f64) -> Result<Self> {
        Self::new(voxel_size, Vec3::zeros())
    }

    pub fn center(&self, c: &VoxelCoord) -> Vec3 {
        self.origin + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.voxel_size
    }

    /// Continuous grid coordinates: voxel centers sit at integers.
    pub fn to_grid(&self, p: &Vec3) -> Vec3 {
        (p - self.origin) / self.voxel_size
    }

    /// Voxel whose cell contains `p`.
    pub fn voxel_of(&self, p: &Vec3) -> VoxelCoord {
        let g = self.to_grid(p);
        [
            g.x.round() as i32,
            g.y.round() as i32,
            g.z.round() as i32,
        ]
    }
}

/// What a sparse grid stores per voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    /// Truncated signed distance in voxel units.
    Tsdf = 0,
    /// Motion vector in meters.
    Motion = 1,
}

pub trait VoxelPayload: Copy + PartialEq + std::fmt::Debug + Send + Sync {
    const KIND: PayloadKind;
    fn check(&self) -> Result<()>;
}

impl VoxelPayload for f64 {
    const KIND: PayloadKind = PayloadKind::Tsdf;

    fn check(&self) -> Result<()> {
        if self.is_finite() && self.abs() <= TRUNCATION_VOXELS {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "TSDF value {self} outside [-{TRUNCATION_VOXELS}, {TRUNCATION_VOXELS}]"
            )))
        }
    }
}

impl VoxelPayload for Vec3 {
    const KIND: PayloadKind = PayloadKind::Motion;

    fn check(&self) -> Result<()> {
        if self.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("motion vector is not finite"))
        }
    }
}

/// Sparse voxel grid ordered lexicographically by coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoxelGrid<T: VoxelPayload> {
    pub layout: GridLayout,
    entries: BTreeMap<VoxelCoord, T>,
}

/// Signed distances in voxel units, positive in front of the surface.
pub type TsdfGrid = SparseVoxelGrid<f64>;
/// Per-voxel motion vectors in meters.
pub type MotionGrid = SparseVoxelGrid<Vec3>;

impl<T: VoxelPayload> SparseVoxelGrid<T> {
    pub fn new(layout: GridLayout) -> Self {
        Self {
            layout,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        layout: GridLayout,
        entries: impl IntoIterator<Item = (VoxelCoord, T)>,
    ) -> Result<Self> {
        let mut grid = Self::new(layout);
        for (c, v) in entries {
            if grid.entries.contains_key(&c) {
                return Err(Error::invalid(format!("duplicate voxel coordinate {c:?}")));
            }
            grid.insert(c, v)?;
        }
        Ok(grid)
    }

    pub fn kind(&self) -> PayloadKind {
        T::KIND
    }

    pub fn voxel_size(&self) -> f64 {
        self.layout.voxel_size
    }

    /// Inserts or replaces a voxel value.
    pub fn insert(&mut self, c: VoxelCoord, value: T) -> Result<()> {
        value.check()?;
        self.entries.insert(c, value);
        Ok(())
    }

    pub fn get(&self, c: &VoxelCoord) -> Option<&T> {
        self.entries.get(c)
    }

    pub fn contains(&self, c: &VoxelCoord) -> bool {
        self.entries.contains_key(c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (&VoxelCoord, &T)> {
        self.entries.iter()
    }

    pub fn coords(&self) -> impl Iterator<Item = &VoxelCoord> {
        self.entries.keys()
    }

    /// World-space centers of all stored voxels, in coordinate order.
    pub fn centers(&self) -> Vec<Vec3> {
        self.entries.keys().map(|c| self.layout.center(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsdf_values_are_truncated() {
        let mut g = TsdfGrid::new(GridLayout::with_voxel_size(0.01).unwrap());
        assert!(g.insert([0, 0, 0], 3.0).is_ok());
        assert!(g.insert([0, 0, 1], -3.5).is_err());
        assert!(g.insert([0, 0, 1], f64::NAN).is_err());
    }

    #[test]
    fn duplicates_rejected() {
        let layout = GridLayout::with_voxel_size(0.01).unwrap();
        assert!(TsdfGrid::from_entries(layout, [([1, 2, 3], 0.5), ([1, 2, 3], 0.2)]).is_err());
    }

    #[test]
    fn voxel_lookup_round_trip() {
        let layout = GridLayout::new(0.02, Vec3::new(0.1, -0.3, 0.05)).unwrap();
        for c in [[0, 0, 0], [-5, 7, 100], [3, -2, -9]] {
            assert_eq!(layout.voxel_of(&layout.center(&c)), c);
        }
        assert!(GridLayout::with_voxel_size(0.0).is_err());
    }

    #[test]
    fn iteration_is_lexicographic() {
        let layout = GridLayout::with_voxel_size(1.0).unwrap();
        let g = MotionGrid::from_entries(
            layout,
            [([1, 0, 0], Vec3::x()), ([0, 5, 0], Vec3::y()), ([0, 0, 9], Vec3::z())],
        )
        .unwrap();
        let order: Vec<VoxelCoord> = g.coords().copied().collect();
        assert_eq!(order, vec![[0, 0, 9], [0, 5, 0], [1, 0, 0]]);
    }
}
