use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use nalgebra::{Matrix3, Rotation3, Vector3};
use volmotion_core::formats::{
    encode_anim, encode_camera, encode_depth, encode_flow, encode_indices, encode_obj, encode_pmsn, encode_svox,
};
use volmotion_core::geometry::{PinholeCamera, RigidTransform, TriangleMesh, Vec3};
use volmotion_core::metrics;
use volmotion_core::motion_field::{self, PointMotionSet, Support, VertexRotation, VmfOptions};
use volmotion_core::pipeline::{self, Method, PipelineConfig, RigConfig, SolverConfig};
use volmotion_core::render::{self, render_scene_flow, sample_camera_rig_with_radii};
use volmotion_core::solvers::{self, ArapConfig, MotionCompletionProblem, SolveReport};
use volmotion_core::synthetic;
use volmotion_core::volumetric::{fuse_tsdf, marching_cubes, projective_tsdf, MotionGrid, TsdfGrid};

use crate::io;
use crate::{
    ArapFlags, ArapPpArgs, Globals, ConvertCommand, EvalMotionArgs, EvalShapeArgs, ExtractMeshArgs, GenCamerasArgs,
    MakeProblemArgs, MakeVisibilityArgs, Motion, RenderDepthArgs, RenderFlowArgs, RotationMode, RunBenchmarkArgs,
    Shape, SolverArgs, SynthClipArgs, TsdfFuseArgs, TsdfProjectArgs, VerifyManifestArgs, VmfGenArgs,
};

/// Pipeline config from `--config`, with clip and output paths taken
/// relative to the config file.
fn load_config(ctx: &Globals) -> Result<Option<PipelineConfig>> {
    let Some(path) = &ctx.config else {
        return Ok(None);
    };
    let mut config =
        PipelineConfig::from_toml(&io::text(path)?).with_context(|| format!("loading config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    if config.clip.is_relative() {
        config.clip = base.join(&config.clip);
    }
    if let Some(dir) = config.output_dir.as_mut().filter(|d| d.is_relative()) {
        *dir = base.join(&*dir);
    }
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    Ok(Some(config))
}

fn solver_config(ctx: &Globals, flags: &ArapFlags, lambda_data: Option<f64>) -> Result<SolverConfig> {
    let mut solver = load_config(ctx)?.map(|c| c.solver).unwrap_or_default();
    if let Some(path) = &flags.arap_config {
        solver.arap = io::arap_config(path)?;
    }
    if let Some(n) = flags.max_iterations {
        solver.arap.max_iterations = n;
    }
    if let Some(t) = flags.tolerance {
        solver.arap.tolerance = t;
    }
    if let Some(l) = lambda_data {
        solver.lambda_data = l;
    }
    solver.arap.validate()?;
    Ok(solver)
}

pub fn gen_cameras(ctx: &Globals, a: GenCamerasArgs) -> Result<()> {
    let config = load_config(ctx)?;
    let mut rig = config.as_ref().map(|c| c.cameras.clone()).unwrap_or_else(RigConfig::default);
    if let Some(n) = a.count {
        rig.count = n;
        rig.radii = None;
    }
    if let Some(r) = a.radius {
        rig.radius = r;
        rig.radii = None;
    }
    let center_of = |mesh: &TriangleMesh| -> Result<Vec3> {
        let (lo, hi) = mesh.bounding_box().ok_or_else(|| anyhow!("mesh has no vertices"))?;
        Ok((lo + hi) / 2.0)
    };
    let target = match (&a.target, &a.mesh, rig.target_point(), &config) {
        (Some(t), ..) if t.len() == 3 => Vec3::new(t[0], t[1], t[2]),
        (Some(t), ..) => bail!("--target needs three comma-separated numbers, got {}", t.len()),
        (None, Some(m), ..) => center_of(&io::mesh(m, None)?)?,
        (None, None, Some(t), _) => t,
        (None, None, None, Some(c)) => center_of(&io::clip(&c.clip)?.frame_mesh(c.source_frame)?)?,
        (None, None, None, None) => Vec3::zeros(),
    };
    let cameras = sample_camera_rig_with_radii(target, &rig.view_radii(), rig.intrinsics)?.cameras;
    let dir = ctx.out_dir()?;
    for (v, cam) in cameras.iter().enumerate() {
        io::write(&dir.join(format!("view_{v:02}.toml")), encode_camera(cam).as_bytes())?;
    }
    println!("cameras = {}", cameras.len());
    Ok(())
}

pub fn render_depth(ctx: &Globals, a: RenderDepthArgs) -> Result<()> {
    let mesh = io::mesh(&a.mesh.mesh, a.mesh.frame)?;
    let depth = render::render_depth(&mesh, &io::camera(&a.camera)?);
    io::write(&ctx.output(&a.output), &encode_depth(&depth))?;
    println!("valid_pixels = {}", depth.valid_count());
    Ok(())
}

pub fn render_flow(ctx: &Globals, a: RenderFlowArgs) -> Result<()> {
    let clip = io::clip(&a.clip)?;
    let flow = render_scene_flow(&clip, a.src, a.dst, &io::camera(&a.camera)?)?;
    io::write(&ctx.output(&a.output), &encode_flow(&flow))?;
    println!("valid_pixels = {}", flow.vectors().iter().flatten().count());
    Ok(())
}

pub fn tsdf_project(ctx: &Globals, a: TsdfProjectArgs) -> Result<()> {
    let depth = io::depth(&a.depth, io::camera(&a.camera)?)?;
    let grid = projective_tsdf(&depth, a.voxel_size)?;
    io::write(&ctx.output(&a.output), &encode_svox(&grid))?;
    println!("voxels = {}", grid.len());
    Ok(())
}

pub fn tsdf_fuse(ctx: &Globals, a: TsdfFuseArgs) -> Result<()> {
    if a.depth.len() != a.camera.len() {
        bail!("{} depth maps but {} cameras", a.depth.len(), a.camera.len());
    }
    let depths = a
        .depth
        .iter()
        .zip(&a.camera)
        .map(|(d, c)| io::depth(d, io::camera(c)?))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_tsdf(&depths, a.voxel_size)?;
    io::write(&ctx.output(&a.output), &encode_svox(&fused.tsdf))?;
    println!("voxels = {}", fused.tsdf.len());
    Ok(())
}

pub fn vmf_gen(ctx: &Globals, a: VmfGenArgs) -> Result<()> {
    let clip = io::clip(&a.clip)?;
    let tsdf: TsdfGrid = io::grid(&a.tsdf)?;
    let options = VmfOptions {
        k: a.k,
        rotations: match a.rotations {
            RotationMode::Identity => VertexRotation::Identity,
            RotationMode::OneRing => VertexRotation::OneRing,
        },
    };
    let vmf = motion_field::generate_vmf_on(&clip, a.src, a.dst, &tsdf, &options)?;
    io::write(&ctx.output(&a.output), &encode_svox(&vmf))?;
    println!("voxels = {}", vmf.len());
    Ok(())
}

pub fn convert(ctx: &Globals, c: ConvertCommand) -> Result<()> {
    match c {
        ConvertCommand::Sff2vmf { input, tsdf, k, output } => {
            let sff = io::pmsn(&input)?;
            let tsdf: TsdfGrid = io::grid(&tsdf)?;
            let vmf = motion_field::sff_to_vmf_on(&sff, &tsdf, k)?;
            io::write(&ctx.output(&output), &encode_svox(&vmf))?;
            println!("voxels = {}", vmf.len());
        }
        ConvertCommand::Vmf2sff { input, points, frame, output } => {
            let vmf: MotionGrid = io::grid(&input)?;
            let sampled = motion_field::vmf_to_sff(&vmf, &io::points(&points, frame)?)?;
            io::write(&ctx.output(&output), &encode_pmsn(&sampled.motion))?;
            let count = |s: Support| sampled.support.iter().filter(|&&x| x == s).count();
            println!("points = {}", sampled.support.len());
            println!("full = {}", count(Support::Full));
            println!("partial = {}", count(Support::Partial));
            println!("extrapolated = {}", count(Support::Extrapolated));
        }
    }
    Ok(())
}

pub fn extract_mesh(ctx: &Globals, a: ExtractMeshArgs) -> Result<()> {
    let tsdf: TsdfGrid = io::grid(&a.tsdf)?;
    let mesh = marching_cubes(&tsdf);
    io::write(&ctx.output(&a.output), encode_obj(&mesh).as_bytes())?;
    println!("vertices = {}", mesh.vertex_count());
    println!("triangles = {}", mesh.triangles().len());
    Ok(())
}

/// Accepts motion for just the visible vertices (in index order) or for all.
fn load_completion_problem(a: &SolverArgs) -> Result<MotionCompletionProblem> {
    let mesh = io::mesh(&a.mesh.mesh, a.mesh.frame)?;
    let visible = io::indices(&a.visible)?;
    let motion = io::pmsn(&a.motion)?;
    let problem = if motion.len() == mesh.vertex_count() && motion.len() != visible.len() {
        MotionCompletionProblem::from_full_motion(mesh, visible, motion.motions())?
    } else {
        MotionCompletionProblem::new(mesh, visible, motion.motions().to_vec())?
    };
    Ok(problem)
}

fn write_motion(ctx: &Globals, mesh: &TriangleMesh, motion: Vec<Vec3>, output: &Path) -> Result<()> {
    let set = PointMotionSet::new(mesh.vertices().to_vec(), motion)?;
    io::write(&ctx.output(output), &encode_pmsn(&set))
}

fn emit_report(ctx: &Globals, text: &str, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => io::write(&ctx.output(p), text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn transform_report(t: &RigidTransform, wall_time_s: f64) -> String {
    let r = t.rotation();
    let tr = t.translation();
    format!(
        "rotation = [[{}, {}, {}], [{}, {}, {}], [{}, {}, {}]]\ntranslation = [{}, {}, {}]\nwall_time_s = {:.6}\n",
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
        tr.x,
        tr.y,
        tr.z,
        wall_time_s
    )
}

pub fn fit_rigid(ctx: &Globals, a: SolverArgs) -> Result<()> {
    let problem = load_completion_problem(&a)?;
    let start = std::time::Instant::now();
    let fit = solvers::fit_rigid(&problem)?;
    let report = transform_report(&fit.transform, start.elapsed().as_secs_f64());
    write_motion(ctx, problem.mesh(), fit.motion, &a.output)?;
    emit_report(ctx, &report, a.report.as_ref())
}

fn arap_report(report: &SolveReport, config: &ArapConfig) -> String {
    format!("{}max_iterations = {}\ntolerance = {:e}\n", report.to_text(), config.max_iterations, config.tolerance)
}

pub fn deform_arap(ctx: &Globals, a: SolverArgs) -> Result<()> {
    let solver = solver_config(ctx, &a.arap, None)?;
    let problem = load_completion_problem(&a)?;
    let result = solvers::arap_complete(&problem, &solver.arap)?;
    write_motion(ctx, problem.mesh(), result.motion, &a.output)?;
    emit_report(ctx, &arap_report(&result.report, &solver.arap), a.report.as_ref())
}

pub fn arap_pp(ctx: &Globals, a: ArapPpArgs) -> Result<()> {
    let solver = solver_config(ctx, &a.arap, a.lambda_data)?;
    let mesh = io::mesh(&a.mesh.mesh, a.mesh.frame)?;
    let predicted = io::pmsn(&a.motion)?;
    let result = solvers::arap_post_process(&mesh, predicted.motions(), solver.lambda_data, &solver.arap)?;
    write_motion(ctx, &mesh, result.motion, &a.output)?;
    let text = format!("{}lambda_data = {}\n", arap_report(&result.report, &solver.arap), solver.lambda_data);
    emit_report(ctx, &text, a.report.as_ref())
}

pub fn make_visibility(ctx: &Globals, a: MakeVisibilityArgs) -> Result<()> {
    let mesh = io::mesh(&a.mesh.mesh, a.mesh.frame)?;
    let visible = pipeline::make_visibility(&mesh, &io::camera(&a.camera)?, a.tolerance);
    io::write(&ctx.output(&a.output), encode_indices(&visible).as_bytes())?;
    println!("visible = {}", visible.len());
    println!("vertices = {}", mesh.vertex_count());
    Ok(())
}

pub fn make_problem(ctx: &Globals, a: MakeProblemArgs) -> Result<()> {
    let clip = io::clip(&a.clip)?;
    let camera: PinholeCamera = io::camera(&a.camera)?;
    let (problem, gt) = pipeline::build_problem(&clip, a.src, a.dst, &camera, a.tolerance)?;
    pipeline::write_problem(&ctx.output(&a.output), &problem, &gt)?;
    println!("visible = {}", problem.visible().len());
    println!("hidden = {}", problem.hidden().len());
    Ok(())
}

fn write_json(ctx: &Globals, path: Option<&PathBuf>, value: &impl serde::Serialize) -> Result<()> {
    if let Some(p) = path {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        io::write(&ctx.output(p), text.as_bytes())?;
    }
    Ok(())
}

pub fn eval_motion(ctx: &Globals, a: EvalMotionArgs) -> Result<()> {
    let mut pred = io::pmsn(&a.pred)?;
    let mut gt = io::pmsn(&a.gt)?;
    if let Some(path) = &a.indices {
        let idx: Vec<usize> = io::indices(path)?.into_iter().map(|i| i as usize).collect();
        pred = pred.select(&idx)?;
        gt = gt.select(&idx)?;
    }
    let report = metrics::eval_motion(&pred, &gt)?;
    print!("{}", report.to_text());
    write_json(ctx, a.json.as_ref(), &report)
}

pub fn eval_shape(ctx: &Globals, a: EvalShapeArgs) -> Result<()> {
    let report = metrics::eval_shape(
        &io::mesh(&a.pred_mesh, None)?,
        &io::mesh(&a.gt_mesh, None)?,
        &io::grid(&a.pred_tsdf)?,
        &io::grid(&a.gt_tsdf)?,
        a.samples,
        ctx.seed.unwrap_or(metrics::DEFAULT_SAMPLE_SEED),
    )?;
    print!("{}", report.to_text());
    write_json(ctx, a.json.as_ref(), &report)
}

pub fn run_datagen(ctx: &Globals) -> Result<()> {
    let mut config = load_config(ctx)?.ok_or_else(|| anyhow!("--config PATH is required"))?;
    let out = match (&ctx.out, &config.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => bail!("no output directory: pass --out or set output_dir"),
    };
    config.output_dir = Some(out.clone());
    let manifest = pipeline::run_datagen(&config, &out)?;
    println!("input_view = {}", manifest.input_view);
    println!("artifacts = {}", manifest.artifacts.len());
    println!("manifest = {}", out.join(pipeline::MANIFEST_FILE).display());
    Ok(())
}

pub fn run_benchmark(ctx: &Globals, a: RunBenchmarkArgs) -> Result<()> {
    let solver = solver_config(ctx, &a.arap, a.lambda_data)?;
    let methods = a
        .methods
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<Method>)
        .collect::<volmotion_core::Result<Vec<_>>>()?;
    let problems: Vec<PathBuf> = a.problems.iter().map(|p| ctx.output(p)).collect();
    let table = pipeline::run_benchmark(&problems, &methods, &solver);
    print!("{}", table.to_text());
    write_json(ctx, a.json.as_ref(), &table)
}

pub fn verify_manifest(ctx: &Globals, a: VerifyManifestArgs) -> Result<()> {
    let dir = match a.dir {
        Some(d) => d,
        None => ctx.out_dir()?.to_path_buf(),
    };
    let report = pipeline::verify_manifest(&dir)?;
    println!("checked = {}", report.checked);
    println!("missing = {}", report.missing.len());
    println!("mismatched = {}", report.mismatched.len());
    for p in &report.missing {
        eprintln!("missing: {p}");
    }
    for p in &report.mismatched {
        eprintln!("mismatched: {p}");
    }
    if !report.is_ok() {
        bail!("{} of {} artifacts failed verification", report.missing.len() + report.mismatched.len(), report.checked);
    }
    Ok(())
}

pub fn synth_clip(ctx: &Globals, a: SynthClipArgs) -> Result<()> {
    let mesh = match a.shape {
        Shape::Sphere => synthetic::icosphere(a.detail as u32, a.radius),
        Shape::Tube => synthetic::capped_tube(a.radius, 1.0, a.detail.max(2), 32),
    };
    let clip = match a.motion {
        Motion::Translate => synthetic::translating_clip(&mesh, Vec3::new(a.amount, 0.0, 0.0), a.frames)?,
        Motion::Rigid => {
            let step = RigidTransform::new(rotation_z(a.amount), Vec3::new(a.amount * 0.5, 0.0, 0.0))?;
            synthetic::rigid_clip(&mesh, &step, a.frames)?
        }
        Motion::Wobble => synthetic::wobble_clip(&mesh, a.frames, a.amount)?,
        Motion::Bend => {
            let n = a.frames.max(2);
            synthetic::animated_clip(&mesh, n, |k, p| {
                synthetic::bend_point(p, a.amount * k as f64 / (n - 1) as f64)
            })?
        }
    };
    io::write(&ctx.output(&a.output), &encode_anim(&clip)?)?;
    println!("vertices = {}", clip.mesh().vertex_count());
    println!("frames = {}", clip.frame_count());
    Ok(())
}

/// Rotation by `angle` about the z axis.
fn rotation_z(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix()
}
