//! Virtual camera rigs, ray-cast depth maps and per-pixel scene flow.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    vertex_displacements, AnimationClip, Intrinsics, PinholeCamera, TriangleMesh, Vec3,
};
use crate::spatial::{Bvh, RayHit};
use crate::synthetic::icosphere_directions;

/// Camera-to-target distances the synthetic rig is designed for (meters).
pub const RIG_RADIUS_RANGE: (f64, f64) = (0.5, 2.5);
/// Number of views of the default rig: one-level icosphere vertices.
pub const DEFAULT_VIEW_COUNT: usize = 42;

/// Largest depth representable as u16 millimeters.
const MAX_DEPTH_M: f64 = 65.535;
/// Smallest depth that does not quantize to the invalid value 0.
const MIN_DEPTH_M: f64 = 0.0005;

/// Cameras sharing intrinsics, all looking at `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub target: Vec3,
    pub cameras: Vec<PinholeCamera>,
}

/// Unit directions for `count` rig positions: the 42-vertex icosphere when
/// `count == 42`, otherwise a Fibonacci sphere.
pub fn rig_directions(count: usize) -> Vec<Vec3> {
    if count == DEFAULT_VIEW_COUNT {
        return icosphere_directions(1).0;
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = if count == 1 {
                1.0
            } else {
                1.0 - 2.0 * (i as f64 + 0.5) / count as f64
            };
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Samples `count` viewpoints on a sphere of `radius` around `target`.
pub fn sample_camera_rig(
    target: Vec3,
    radius: f64,
    count: usize,
    intrinsics: Intrinsics,
) -> Result<CameraRig> {
    sample_camera_rig_with_radii(target, &vec![radius; count], intrinsics)
}

/// Like [`sample_camera_rig`] with an individual distance per view.
pub fn sample_camera_rig_with_radii(
    target: Vec3,
    radii: &[f64],
    intrinsics: Intrinsics,
) -> Result<CameraRig> {
    if radii.is_empty() {
        return Err(Error::invalid("camera rig needs at least one view"));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::invalid(format!("camera distance {r} must be positive")));
    }
    if radii
        .iter()
        .any(|&r| r < RIG_RADIUS_RANGE.0 || r > RIG_RADIUS_RANGE.1)
    {
        log::warn!(
            "camera distance outside the recommended {:?} m range",
            RIG_RADIUS_RANGE
        );
    }
    let cameras = rig_directions(radii.len())
        .into_iter()
        .zip(radii)
        .map(|(dir, &r)| PinholeCamera::look_at(intrinsics, target + dir * r, target, Vec3::z()))
        .collect::<Result<Vec<_>>>()?;
    Ok(CameraRig { target, cameras })
}

/// Depth image in meters of axial (z) depth; `0.0` marks pixels without a hit.
///
/// Values stay at full precision in memory; quantization to millimeters
/// happens when the map is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub camera: PinholeCamera,
    depth: Vec<f64>,
}

impl DepthMap {
    pub fn new(camera: PinholeCamera, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != camera.intrinsics.pixel_count() {
            return Err(Error::invalid(format!(
                "{} depth values for a {}x{} camera",
                depth.len(),
                camera.width(),
                camera.height()
            )));
        }
        if let Some(d) = depth
            .iter()
            .find(|d| !d.is_finite() || **d < 0.0 || (**d > 0.0 && !(MIN_DEPTH_M..=MAX_DEPTH_M).contains(*d)))
        {
            return Err(Error::invalid(format!("depth {d} m is outside the storable range")));
        }
        Ok(Self { camera, depth })
    }

    /// Builds a map from u16 millimeters.
    pub fn from_millimeters(camera: PinholeCamera, mm: &[u16]) -> Result<Self> {
        Self::new(camera, mm.iter().map(|&v| f64::from(v) / 1000.0).collect())
    }

    pub fn width(&self) -> u32 {
        self.camera.width()
    }

    pub fn height(&self) -> u32 {
        self.camera.height()
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }

    /// Depth at pixel `(col, row)` in meters; `None` for invalid pixels.
    pub fn get(&self, col: u32, row: u32) -> Option<f64> {
        let d = self.depth[row as usize * self.width() as usize + col as usize];
        (d > 0.0).then_some(d)
    }

    pub fn is_valid(&self, col: u32, row: u32) -> bool {
        self.get(col, row).is_some()
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| **d > 0.0).count()
    }

    /// Rounded millimeters; 0 marks invalid pixels.
    pub fn to_millimeters(&self) -> Vec<u16> {
        self.depth
            .iter()
            .map(|&d| {
                if d > 0.0 {
                    (d * 1000.0).round().clamp(1.0, 65535.0) as u16
                } else {
                    0
                }
            })
            .collect()
    }

    pub fn millimeters_at(&self, col: u32, row: u32) -> u16 {
        self.get(col, row)
            .map_or(0, |d| (d * 1000.0).round().clamp(1.0, 65535.0) as u16)
    }

    /// The map after a write/read cycle through millimeter storage.
    pub fn quantized(&self) -> Self {
        Self {
            camera: self.camera,
            depth: self
                .to_millimeters()
                .iter()
                .map(|&v| f64::from(v) / 1000.0)
                .collect(),
        }
    }
}

/// Per-pixel 3D motion (meters, source camera coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFlowImage {
    pub width: u32,
    pub height: u32,
    flow: Vec<Option<Vec3>>,
}

impl SceneFlowImage {
    pub fn new(width: u32, height: u32, flow: Vec<Option<Vec3>>) -> Result<Self> {
        if flow.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "{} flow vectors for a {width}x{height} image",
                flow.len()
            )));
        }
        if flow.iter().flatten().any(|f| !f.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("valid scene-flow vectors must be finite"));
        }
        Ok(Self {
            width,
            height,
            flow,
        })
    }

    pub fn get(&self, col: u32, row: u32) -> Option<Vec3> {
        self.flow[row as usize * self.width as usize + col as usize]
    }

    pub fn vectors(&self) -> &[Option<Vec3>] {
        &self.flow
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        self.flow.iter().map(Option::is_some).collect()
    }

    /// Lossy f32 round-trip, as stored on disk.
    pub fn quantized(&self) -> Self {
        let q = |v: f64| f64::from(v as f32);
        Self {
            width: self.width,
            height: self.height,
            flow: self
                .flow
                .iter()
                .map(|f| f.map(|v| Vec3::new(q(v.x), q(v.y), q(v.z))))
                .collect(),
        }
    }
}

/// Nearest hit per pixel, row-major, for rays through pixel centers.
pub fn cast_pixels(bvh: &Bvh, camera: &PinholeCamera) -> Vec<Option<RayHit>> {
    let (w, h) = (camera.width() as usize, camera.height() as usize);
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (col, row) = ((i % w) as f64, (i / w) as f64);
            let (origin, dir) = camera.ray(col, row);
            // dir has unit axial component, so t is the z-depth.
            bvh.intersect(&origin, &dir)
                .filter(|hit| (MIN_DEPTH_M..=MAX_DEPTH_M).contains(&hit.t))
        })
        .collect()
}

pub fn render_depth(mesh: &TriangleMesh, camera: &PinholeCamera) -> DepthMap {
    render_depth_with(&Bvh::new(mesh), camera)
}

/// Depth rendering against a prebuilt hierarchy.
pub fn render_depth_with(bvh: &Bvh, camera: &PinholeCamera) -> DepthMap {
    let depth = cast_pixels(bvh, camera)
        .into_iter()
        .map(|h| h.map_or(0.0, |h| h.t))
        .collect();
    DepthMap {
        camera: *camera,
        depth,
    }
}

/// Scene flow of every pixel that sees the mesh in `src`, expressed in the
/// camera frame. Pixels occluded in `dst` still receive flow.
pub fn render_scene_flow(
    clip: &AnimationClip,
    src: usize,
    dst: usize,
    camera: &PinholeCamera,
) -> Result<SceneFlowImage> {
    let displacement = vertex_displacements(clip, src, dst)?;
    let mesh = clip.frame_mesh(src)?;
    let bvh = Bvh::new(&mesh);
    let to_camera = camera.pose().rotation().transpose();
    let flow = cast_pixels(&bvh, camera)
        .into_iter()
        .map(|hit| {
            hit.map(|h| {
                let tri = mesh.triangles()[h.triangle];
                let world: Vec3 = tri
                    .iter()
                    .zip(h.barycentric)
                    .map(|(&v, b)| displacement[v as usize] * b)
                    .sum();
                to_camera * world
            })
        })
        .collect();
    SceneFlowImage::new(camera.width(), camera.height(), flow)
}
