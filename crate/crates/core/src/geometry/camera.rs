use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

/// Pinhole intrinsics. Pixel `(col, row)` has its center at `(u, v) = (col, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    /// 640x576 sensor resembling a narrow field-of-view depth camera.
    fn default() -> Self {
        Self {
            fx: 504.0,
            fy: 504.0,
            cx: 319.5,
            cy: 287.5,
            width: 640,
            height: 576,
        }
    }
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A point projected into the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Distance along the optical axis (meters).
    pub depth: f64,
}

/// Ideal pinhole camera; `pose` maps camera coordinates to world coordinates.
///
/// Camera axes: `+x` right, `+y` down, `+z` forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub intrinsics: Intrinsics,
    pose: RigidTransform,
    world_to_camera: RigidTransform,
}

impl PinholeCamera {
    pub fn new(intrinsics: Intrinsics, pose: RigidTransform) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self {
            intrinsics,
            pose,
            world_to_camera: pose.inverse(),
        })
    }

    /// Camera at `eye` whose optical axis passes through `target`.
    ///
    /// Image "up" follows `up` unless the view direction is parallel to it,
    /// in which case `+y` world is used.
    pub fn look_at(intrinsics: Intrinsics, eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let forward = target - eye;
        let dist = forward.norm();
        if !(dist > 0.0) {
            return Err(Error::invalid("camera eye coincides with its target"));
        }
        let z = forward / dist;
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vec3::y());
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Self::new(intrinsics, RigidTransform::from_parts_unchecked(rotation, eye))
    }

    pub fn pose(&self) -> &RigidTransform {
        &self.pose
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn center(&self) -> Vec3 {
        *self.pose.translation()
    }

    /// Unit optical axis in world coordinates.
    pub fn axis(&self) -> Vec3 {
        self.pose.rotation().column(2).into_owned()
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.world_to_camera.apply(p)
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.pose.apply(p)
    }

    /// Projects a world point; `None` when it is not in front of the camera.
    pub fn project(&self, p: &Vec3) -> Option<Projection> {
        let pc = self.world_to_camera(p);
        if !(pc.z > 0.0) {
            return None;
        }
        let k = &self.intrinsics;
        Some(Projection {
            u: k.fx * pc.x / pc.z + k.cx,
            v: k.fy * pc.y / pc.z + k.cy,
            depth: pc.z,
        })
    }

    /// World point at image position `(u, v)` and axial depth `depth`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        let pc = Vec3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
        self.camera_to_world(&pc)
    }

    /// Ray through `(u, v)`: world origin and unnormalized direction with unit
    /// axial component, so `origin + z * dir` sits at depth `z`.
    pub fn ray(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let k = &self.intrinsics;
        let dc = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.center(), self.pose.apply_vector(&dc))
    }

    /// Pixel whose center is nearest to `(u, v)`, if inside the image.
    pub fn pixel_at(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let col = u.round();
        let row = v.round();
        if col >= 0.0
            && row >= 0.0
            && col < self.intrinsics.width as f64
            && row < self.intrinsics.height as f64
        {
            Some((col as u32, row as u32))
        } else {
            None
        }
    }
}
