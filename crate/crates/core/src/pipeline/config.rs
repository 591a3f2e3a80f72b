use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Vec3};
use crate::motion_field::VmfOptions;
use crate::render::DEFAULT_VIEW_COUNT;
use crate::solvers::{ArapConfig, DEFAULT_LAMBDA_DATA};
use crate::volumetric::HIERARCHY_VOXEL_SIZES;

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_FRAME_JUMPS: [usize; 4] = [1, 3, 7, 12];
pub const DEFAULT_RIG_RADIUS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    /// Distance of every camera to the target (meters).
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Per-view distances; overrides `radius` and `count`.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    /// Look-at point; defaults to the bounding-box center of the source frame.
    #[serde(default)]
    pub target: Option<[f64; 3]>,
    #[serde(default)]
    pub intrinsics: Intrinsics,
}

fn default_count() -> usize {
    DEFAULT_VIEW_COUNT
}

fn default_radius() -> f64 {
    DEFAULT_RIG_RADIUS
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_VIEW_COUNT,
            radius: DEFAULT_RIG_RADIUS,
            radii: None,
            target: None,
            intrinsics: Intrinsics::default(),
        }
    }
}

impl RigConfig {
    pub fn view_count(&self) -> usize {
        self.radii.as_ref().map_or(self.count, Vec::len)
    }

    pub fn view_radii(&self) -> Vec<f64> {
        self.radii.clone().unwrap_or_else(|| vec![self.radius; self.count])
    }

    pub fn target_point(&self) -> Option<Vec3> {
        self.target.map(Vec3::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub arap: ArapConfig,
    #[serde(default = "default_lambda")]
    pub lambda_data: f64,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA_DATA
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            arap: ArapConfig::default(),
            lambda_data: DEFAULT_LAMBDA_DATA,
        }
    }
}

/// Data generation settings, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// ANIM clip.
    pub clip: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source_frame: usize,
    /// Index of the input camera; drawn from the seed when unset.
    #[serde(default)]
    pub input_view: Option<usize>,
    #[serde(default = "default_jumps")]
    pub frame_jumps: Vec<usize>,
    /// Hierarchy voxel sizes (meters), finest first.
    #[serde(default = "default_sizes")]
    pub voxel_sizes: Vec<f64>,
    /// Rotate the whole clip by a uniformly random rotation drawn from the seed.
    #[serde(default)]
    pub augment_rotation: bool,
    #[serde(default)]
    pub cameras: RigConfig,
    #[serde(default)]
    pub motion: VmfOptions,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_jumps() -> Vec<usize> {
    DEFAULT_FRAME_JUMPS.to_vec()
}

fn default_sizes() -> Vec<f64> {
    HIERARCHY_VOXEL_SIZES.to_vec()
}

impl PipelineConfig {
    /// Defaults for everything but the clip.
    pub fn new(clip: impl Into<PathBuf>) -> Self {
        Self {
            version: CONFIG_VERSION,
            clip: clip.into(),
            output_dir: None,
            seed: 0,
            source_frame: 0,
            input_view: None,
            frame_jumps: default_jumps(),
            voxel_sizes: default_sizes(),
            augment_rotation: false,
            cameras: RigConfig::default(),
            motion: VmfOptions::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.clip.as_os_str().is_empty() {
            return fail("clip path is empty".into());
        }
        if self.frame_jumps.iter().any(|&j| j == 0) {
            return fail("frame jumps must be positive".into());
        }
        if self.voxel_sizes.is_empty() || self.voxel_sizes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return fail("voxel sizes must be a non-empty list of positive numbers".into());
        }
        if self.cameras.view_count() == 0 {
            return fail("camera rig needs at least one view".into());
        }
        if let Some(v) = self.input_view.filter(|&v| v >= self.cameras.view_count()) {
            return fail(format!("input view {v} out of range ({} views)", self.cameras.view_count()));
        }
        if self.motion.k == 0 {
            return fail("motion.k must be at least 1".into());
        }
        if !(self.solver.lambda_data > 0.0) {
            return fail("solver.lambda_data must be positive".into());
        }
        self.cameras.intrinsics.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.solver.arap.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = PipelineConfig::from_toml("version = 1\nclip = \"a.anim\"\n").unwrap();
        assert_eq!(cfg, PipelineConfig::new("a.anim"));
        assert_eq!(cfg.frame_jumps, vec![1, 3, 7, 12]);
        assert_eq!(cfg.voxel_sizes, vec![0.01, 0.02, 0.04, 0.08]);
        assert_eq!(cfg.cameras.count, 42);
        assert_eq!(cfg.motion.k, 3);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = PipelineConfig::new("clips/x.anim");
        cfg.input_view = Some(4);
        cfg.cameras.radii = Some(vec![1.0, 2.0, 1.5, 0.7, 2.2]);
        cfg.cameras.target = Some([0.0, 0.1, 0.2]);
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(PipelineConfig::from_toml("version = 1\nclip = \"a\"\nframe_jump = [1]\n").is_err());
        assert!(PipelineConfig::from_toml("version = 2\nclip = \"a\"\n").is_err());
        assert!(PipelineConfig::from_toml("version = 1\nclip = \"a\"\nframe_jumps = [0]\n").is_err());
        assert!(PipelineConfig::from_toml("version = 1\nclip = \"a\"\ninput_view = 42\n").is_err());
        assert!(PipelineConfig::from_toml("version = 1\nclip = \"a\"\n[cameras.intrinsics]\nfx = 1.0\n").is_err());
    }
}
