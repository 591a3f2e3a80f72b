use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::{
    decode_anim, encode_camera, encode_depth, encode_flow, encode_pmsn, encode_svox, read_file, write_file,
};
use crate::geometry::{random_rotation, vertex_displacements};
use crate::motion_field::{vmf_hierarchy, PointMotionSet};
use crate::pipeline::manifest::{digest, Artifact, RunManifest};
use crate::pipeline::PipelineConfig;
use crate::render::{render_depth_with, render_scene_flow, sample_camera_rig_with_radii, DepthMap};
use crate::spatial::Bvh;
use crate::volumetric::{build_hierarchy_with_sizes, projective_tsdf};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARTIAL_MANIFEST_FILE: &str = "manifest.partial.json";
/// Stage timings live outside the manifest so reruns stay byte-identical.
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Serialize)]
struct StageTiming {
    stage: &'static str,
    seconds: f64,
}

#[derive(Serialize)]
struct PartialManifest<'a> {
    error: String,
    artifacts: &'a [Artifact],
}

struct Run<'a> {
    out: &'a Path,
    artifacts: Vec<Artifact>,
    timings: Vec<StageTiming>,
}

impl Run<'_> {
    fn emit(&mut self, rel: String, bytes: &[u8]) -> Result<()> {
        write_file(&self.out.join(&rel), bytes)?;
        self.artifacts.push(Artifact {
            path: rel,
            sha256: digest(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {name}");
        let result = f(self).map_err(|e| e.in_stage(name));
        self.timings.push(StageTiming {
            stage: name,
            seconds: start.elapsed().as_secs_f64(),
        });
        result
    }
}

/// Renders, fuses and annotates a clip as configured, writing every artifact
/// under `out_dir` together with `manifest.json`.
///
/// On failure the artifacts written so far are listed in
/// `manifest.partial.json` and the error names the failing stage.
pub fn run_datagen(config: &PipelineConfig, out_dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    let mut run = Run {
        out: out_dir,
        artifacts: Vec::new(),
        timings: Vec::new(),
    };
    match generate(config, &mut run) {
        Ok(mut manifest) => {
            manifest.artifacts = std::mem::take(&mut run.artifacts);
            manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
            write_file(&out_dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
            let timings = serde_json::to_string_pretty(&run.timings).expect("timings serialize");
            write_file(&out_dir.join(TIMINGS_FILE), timings.as_bytes())?;
            Ok(manifest)
        }
        Err(e) => {
            let partial = PartialManifest {
                error: e.to_string(),
                artifacts: &run.artifacts,
            };
            let text = serde_json::to_string_pretty(&partial).expect("partial manifest serializes");
            if let Err(w) = write_file(&out_dir.join(PARTIAL_MANIFEST_FILE), text.as_bytes()) {
                log::error!("could not write partial manifest: {w}");
            }
            Err(e)
        }
    }
}

fn generate(config: &PipelineConfig, run: &mut Run) -> Result<RunManifest> {
    let (clip_bytes, clip) = run.stage("load-clip", |_| {
        let bytes = read_file(&config.clip)?;
        let clip = decode_anim(&bytes)?;
        Ok((bytes, clip))
    })?;

    let views = config.cameras.view_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input_view = config.input_view.unwrap_or_else(|| rng.random_range(0..views));
    let (clip, augmentation) = if config.augment_rotation {
        let r = random_rotation(&mut rng);
        (clip.map_positions(|p| r * p), Some(std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)]))))
    } else {
        (clip, None)
    };

    let src = config.source_frame;
    let source = clip.frame_mesh(src).map_err(|e| e.in_stage("load-clip"))?;
    let (jumps, skipped_jumps): (Vec<usize>, Vec<usize>) =
        config.frame_jumps.iter().partition(|&&j| src + j < clip.frame_count());
    if !skipped_jumps.is_empty() {
        log::warn!("frame jumps {skipped_jumps:?} run past the {}-frame clip", clip.frame_count());
    }

    let rig = run.stage("cameras", |run| {
        let target = match config.cameras.target_point() {
            Some(t) => t,
            None => {
                let (lo, hi) = source
                    .bounding_box()
                    .ok_or_else(|| Error::invalid("source frame has no vertices"))?;
                (lo + hi) / 2.0
            }
        };
        let rig = sample_camera_rig_with_radii(target, &config.cameras.view_radii(), config.cameras.intrinsics)?;
        for (v, cam) in rig.cameras.iter().enumerate() {
            run.emit(format!("cameras/view_{v:02}.toml"), encode_camera(cam).as_bytes())?;
        }
        Ok(rig)
    })?;
    let input_cam = rig.cameras[input_view];

    // Downstream stages consume depth as stored on disk.
    let depths: Vec<DepthMap> = run.stage("render-depth", |run| {
        let bvh = Bvh::new(&source);
        let mut depths = Vec::with_capacity(rig.cameras.len());
        for (v, cam) in rig.cameras.iter().enumerate() {
            let d = render_depth_with(&bvh, cam);
            run.emit(format!("depth/view_{v:02}_frame_{src:04}.dpth"), &encode_depth(&d))?;
            depths.push(d.quantized());
        }
        for &j in &jumps {
            let dst = src + j;
            let d = render_depth_with(&Bvh::new(&clip.frame_mesh(dst)?), &input_cam);
            run.emit(format!("depth/view_{input_view:02}_frame_{dst:04}.dpth"), &encode_depth(&d))?;
        }
        Ok(depths)
    })?;

    run.stage("render-flow", |run| {
        for &j in &jumps {
            let dst = src + j;
            let flow = render_scene_flow(&clip, src, dst, &input_cam)?;
            run.emit(format!("flow/view_{input_view:02}_frame_{src:04}_to_{dst:04}.sflw"), &encode_flow(&flow))?;
            let motion = PointMotionSet::new(source.vertices().to_vec(), vertex_displacements(&clip, src, dst)?)?;
            run.emit(format!("motion/vertices_frame_{src:04}_to_{dst:04}.pmsn"), &encode_pmsn(&motion))?;
        }
        Ok(())
    })?;

    run.stage("tsdf-project", |run| {
        let grid = projective_tsdf(&depths[input_view], config.voxel_sizes[0])?;
        run.emit(format!("tsdf/input_view_{input_view:02}.svox"), &encode_svox(&grid))
    })?;

    let hierarchy = run.stage("tsdf-fuse", |run| {
        let h = build_hierarchy_with_sizes(&depths, &config.voxel_sizes)?;
        for (l, level) in h.levels.iter().enumerate() {
            run.emit(format!("tsdf/fused_level{l}.svox"), &encode_svox(&level.tsdf))?;
        }
        Ok(h)
    })?;

    run.stage("vmf", |run| {
        for &j in &jumps {
            let dst = src + j;
            for (l, grid) in vmf_hierarchy(&clip, src, dst, &hierarchy, &config.motion)?.iter().enumerate() {
                run.emit(format!("vmf/frame_{src:04}_to_{dst:04}_level{l}.svox"), &encode_svox(grid))?;
            }
        }
        Ok(())
    })?;

    let mut snapshot = config.clone();
    snapshot.output_dir = None;
    Ok(RunManifest {
        tool: "volmotion".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: snapshot,
        clip_sha256: digest(&clip_bytes),
        input_view,
        augmentation,
        skipped_jumps,
        artifacts: Vec::new(),
    })
}
