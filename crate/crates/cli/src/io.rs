//! Typed file loading with the offending path in every error.

use std::path::Path;

use anyhow::{bail, Context, Result};
use volmotion_core::formats::{
    decode_anim, decode_camera, decode_depth, decode_indices, decode_mesh, decode_pmsn, decode_svox, read_file,
    svox_kind, write_file, SvoxPayload, PMSN_MAGIC,
};
use volmotion_core::geometry::{AnimationClip, PinholeCamera, TriangleMesh, Vec3};
use volmotion_core::motion_field::PointMotionSet;
use volmotion_core::render::DepthMap;
use volmotion_core::solvers::ArapConfig;
use volmotion_core::volumetric::{PayloadKind, SparseVoxelGrid};

fn bytes(path: &Path) -> Result<Vec<u8>> {
    Ok(read_file(path)?)
}

pub fn text(path: &Path) -> Result<String> {
    String::from_utf8(bytes(path)?).with_context(|| format!("{} is not UTF-8 text", path.display()))
}

pub fn camera(path: &Path) -> Result<PinholeCamera> {
    decode_camera(&text(path)?).with_context(|| format!("reading camera {}", path.display()))
}

pub fn mesh(path: &Path, frame: Option<usize>) -> Result<TriangleMesh> {
    decode_mesh(&bytes(path)?, frame).with_context(|| format!("reading mesh {}", path.display()))
}

pub fn clip(path: &Path) -> Result<AnimationClip> {
    decode_anim(&bytes(path)?).with_context(|| format!("reading clip {}", path.display()))
}

pub fn depth(path: &Path, camera: PinholeCamera) -> Result<DepthMap> {
    decode_depth(&bytes(path)?, camera).with_context(|| format!("reading depth {}", path.display()))
}

pub fn pmsn(path: &Path) -> Result<PointMotionSet> {
    decode_pmsn(&bytes(path)?).with_context(|| format!("reading motion {}", path.display()))
}

pub fn indices(path: &Path) -> Result<Vec<u32>> {
    decode_indices(&text(path)?).with_context(|| format!("reading indices {}", path.display()))
}

pub fn grid<T: SvoxPayload>(path: &Path) -> Result<SparseVoxelGrid<T>> {
    let data = bytes(path)?;
    let kind = svox_kind(&data).with_context(|| format!("reading grid {}", path.display()))?;
    if kind != T::KIND {
        let want = match T::KIND {
            PayloadKind::Tsdf => "a TSDF",
            PayloadKind::Motion => "a motion",
        };
        bail!("{} is not {want} grid", path.display());
    }
    decode_svox(&data).with_context(|| format!("reading grid {}", path.display()))
}

/// Query points from a PMSN file or the vertices of a mesh.
pub fn points(path: &Path, frame: Option<usize>) -> Result<Vec<Vec3>> {
    let data = bytes(path)?;
    if data.starts_with(PMSN_MAGIC) {
        Ok(decode_pmsn(&data)?.points().to_vec())
    } else {
        Ok(mesh(path, frame)?.vertices().to_vec())
    }
}

pub fn arap_config(path: &Path) -> Result<ArapConfig> {
    let config: ArapConfig =
        toml::from_str(&text(path)?).with_context(|| format!("parsing ARAP config {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

pub fn write(path: &Path, data: &[u8]) -> Result<()> {
    write_file(path, data)?;
    log::info!("wrote {}", path.display());
    Ok(())
}
