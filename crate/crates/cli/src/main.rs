use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

#[derive(Parser, Debug)]
#[command(name = "volmotion", version, about = "Synthetic 4D data generation, motion completion and evaluation")]
struct Cli {
    /// Pipeline config (TOML). Used by run-datagen, gen-cameras and run-benchmark.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed; overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Output directory. Relative output paths are resolved against it.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a ring of look-at cameras as TOML files.
    GenCameras(GenCamerasArgs),
    /// Ray-cast a depth map of one mesh frame.
    RenderDepth(RenderDepthArgs),
    /// Scene flow between two clip frames as seen from one camera.
    RenderFlow(RenderFlowArgs),
    /// Projective TSDF of a single depth map.
    TsdfProject(TsdfProjectArgs),
    /// Fuse several depth maps into one TSDF.
    TsdfFuse(TsdfFuseArgs),
    /// Ground-truth volumetric motion on the voxels of a TSDF.
    VmfGen(VmfGenArgs),
    /// Convert between point and volumetric motion.
    #[command(subcommand)]
    Convert(ConvertCommand),
    /// Marching-cubes surface of a TSDF as OBJ.
    ExtractMesh(ExtractMeshArgs),
    /// Complete motion with the best rigid transform of the visible part.
    FitRigid(SolverArgs),
    /// Complete motion with as-rigid-as-possible deformation.
    DeformArap(SolverArgs),
    /// Regularize a dense motion prediction with the ARAP prior.
    ArapPp(ArapPpArgs),
    /// Indices of mesh vertices seen by a camera.
    MakeVisibility(MakeVisibilityArgs),
    /// Write a motion-completion problem directory from a clip.
    MakeProblem(MakeProblemArgs),
    /// End-point error and accuracy of predicted motion.
    EvalMotion(EvalMotionArgs),
    /// IoU, chamfer, normal consistency, point-to-plane and SDF error.
    EvalShape(EvalShapeArgs),
    /// Full data generation run driven by --config.
    RunDatagen,
    /// Score completion methods on problem directories.
    RunBenchmark(RunBenchmarkArgs),
    /// Check every artifact listed in a run manifest.
    VerifyManifest(VerifyManifestArgs),
    /// Write a synthetic animation clip.
    SynthClip(SynthClipArgs),
}

#[derive(Args, Debug)]
struct GenCamerasArgs {
    /// Number of views (default from config, else 42).
    #[arg(long)]
    count: Option<usize>,
    /// Camera distance in meters (default from config, else 1.5).
    #[arg(long)]
    radius: Option<f64>,
    /// Look-at point `x,y,z`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
    /// Center the rig on the bounding box of this mesh (OBJ or ANIM).
    #[arg(long, conflicts_with = "target")]
    mesh: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeshArg {
    /// OBJ mesh or ANIM clip.
    #[arg(long)]
    mesh: PathBuf,
    /// Frame to use when --mesh is a clip.
    #[arg(long)]
    frame: Option<usize>,
}

#[derive(Args, Debug)]
struct RenderDepthArgs {
    #[command(flatten)]
    mesh: MeshArg,
    #[arg(long)]
    camera: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct RenderFlowArgs {
    #[arg(long)]
    clip: PathBuf,
    #[arg(long)]
    src: usize,
    #[arg(long)]
    dst: usize,
    #[arg(long)]
    camera: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct TsdfProjectArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    camera: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    voxel_size: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct TsdfFuseArgs {
    /// Depth maps; paired in order with --camera.
    #[arg(long, required = true, num_args = 1..)]
    depth: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    camera: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    voxel_size: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RotationMode {
    Identity,
    OneRing,
}

#[derive(Args, Debug)]
struct VmfGenArgs {
    #[arg(long)]
    clip: PathBuf,
    #[arg(long)]
    src: usize,
    #[arg(long)]
    dst: usize,
    /// TSDF whose voxels receive motion.
    #[arg(long)]
    tsdf: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, value_enum, default_value_t = RotationMode::Identity)]
    rotations: RotationMode,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ConvertCommand {
    /// Point motion (PMSN) to a motion grid on the voxels of a TSDF.
    Sff2vmf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tsdf: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Motion grid sampled at points taken from a PMSN file or a mesh.
    Vmf2sff {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Frame to use when --points is a clip.
        #[arg(long)]
        frame: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ExtractMeshArgs {
    #[arg(long)]
    tsdf: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ArapFlags {
    /// ArapConfig TOML file.
    #[arg(long)]
    arap_config: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[command(flatten)]
    mesh: MeshArg,
    /// Visible vertex indices, one per line.
    #[arg(long)]
    visible: PathBuf,
    /// PMSN motion of the visible vertices, or of every vertex.
    #[arg(long)]
    motion: PathBuf,
    #[command(flatten)]
    arap: ArapFlags,
    /// Output PMSN with motion for every vertex.
    #[arg(short, long)]
    output: PathBuf,
    /// Solve report (key = value); printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ArapPpArgs {
    #[command(flatten)]
    mesh: MeshArg,
    /// Dense predicted motion (PMSN, one vector per vertex).
    #[arg(long)]
    motion: PathBuf,
    #[arg(long)]
    lambda_data: Option<f64>,
    #[command(flatten)]
    arap: ArapFlags,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MakeVisibilityArgs {
    #[command(flatten)]
    mesh: MeshArg,
    #[arg(long)]
    camera: PathBuf,
    #[arg(long, default_value_t = volmotion_core::pipeline::VISIBILITY_TOLERANCE)]
    tolerance: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct MakeProblemArgs {
    #[arg(long)]
    clip: PathBuf,
    #[arg(long)]
    src: usize,
    #[arg(long)]
    dst: usize,
    #[arg(long)]
    camera: PathBuf,
    #[arg(long, default_value_t = volmotion_core::pipeline::VISIBILITY_TOLERANCE)]
    tolerance: f64,
    /// Problem directory to create.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalMotionArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Restrict scoring to these point indices (one per line).
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalShapeArgs {
    #[arg(long)]
    pred_mesh: PathBuf,
    #[arg(long)]
    gt_mesh: PathBuf,
    #[arg(long)]
    pred_tsdf: PathBuf,
    #[arg(long)]
    gt_tsdf: PathBuf,
    #[arg(long, default_value_t = volmotion_core::metrics::DEFAULT_SHAPE_SAMPLES)]
    samples: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunBenchmarkArgs {
    /// Problem directories.
    #[arg(long = "problem", num_args = 1..)]
    problems: Vec<PathBuf>,
    /// Comma-separated subset of rigid, arap, arap-pp; empty for none.
    #[arg(long, default_value = "rigid,arap,arap-pp")]
    methods: String,
    #[command(flatten)]
    arap: ArapFlags,
    #[arg(long)]
    lambda_data: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyManifestArgs {
    /// Run directory (defaults to --out).
    dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Shape {
    Sphere,
    Tube,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Motion {
    Translate,
    Rigid,
    Wobble,
    Bend,
}

#[derive(Args, Debug)]
struct SynthClipArgs {
    #[arg(long, value_enum, default_value_t = Shape::Sphere)]
    shape: Shape,
    #[arg(long, value_enum, default_value_t = Motion::Translate)]
    motion: Motion,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    /// Icosphere subdivisions, or tube rings.
    #[arg(long, default_value_t = 4)]
    detail: usize,
    /// Sphere or tube radius in meters.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    /// Per-frame step (m), rotation (rad), wobble amplitude or bend curvature (1/m).
    #[arg(long, default_value_t = 0.01)]
    amount: f64,
    #[arg(short, long)]
    output: PathBuf,
}

/// Global settings shared by every subcommand.
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Globals {
    /// Output path: relative paths land under `--out` when given.
    pub fn output(&self, path: &Path) -> PathBuf {
        match &self.out {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| anyhow!("--out DIR is required"))
    }
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::GenCameras(_) => "gen-cameras",
        Command::RenderDepth(_) => "render-depth",
        Command::RenderFlow(_) => "render-flow",
        Command::TsdfProject(_) => "tsdf-project",
        Command::TsdfFuse(_) => "tsdf-fuse",
        Command::VmfGen(_) => "vmf-gen",
        Command::Convert(ConvertCommand::Sff2vmf { .. }) => "convert sff2vmf",
        Command::Convert(ConvertCommand::Vmf2sff { .. }) => "convert vmf2sff",
        Command::ExtractMesh(_) => "extract-mesh",
        Command::FitRigid(_) => "fit-rigid",
        Command::DeformArap(_) => "deform-arap",
        Command::ArapPp(_) => "arap-pp",
        Command::MakeVisibility(_) => "make-visibility",
        Command::MakeProblem(_) => "make-problem",
        Command::EvalMotion(_) => "eval-motion",
        Command::EvalShape(_) => "eval-shape",
        Command::RunDatagen => "run-datagen",
        Command::RunBenchmark(_) => "run-benchmark",
        Command::VerifyManifest(_) => "verify-manifest",
        Command::SynthClip(_) => "synth-clip",
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = Globals {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
    };
    use commands::*;
    match cli.command {
        Command::GenCameras(a) => gen_cameras(&ctx, a),
        Command::RenderDepth(a) => render_depth(&ctx, a),
        Command::RenderFlow(a) => render_flow(&ctx, a),
        Command::TsdfProject(a) => tsdf_project(&ctx, a),
        Command::TsdfFuse(a) => tsdf_fuse(&ctx, a),
        Command::VmfGen(a) => vmf_gen(&ctx, a),
        Command::Convert(c) => convert(&ctx, c),
        Command::ExtractMesh(a) => extract_mesh(&ctx, a),
        Command::FitRigid(a) => fit_rigid(&ctx, a),
        Command::DeformArap(a) => deform_arap(&ctx, a),
        Command::ArapPp(a) => arap_pp(&ctx, a),
        Command::MakeVisibility(a) => make_visibility(&ctx, a),
        Command::MakeProblem(a) => make_problem(&ctx, a),
        Command::EvalMotion(a) => eval_motion(&ctx, a),
        Command::EvalShape(a) => eval_shape(&ctx, a),
        Command::RunDatagen => run_datagen(&ctx),
        Command::RunBenchmark(a) => run_benchmark(&ctx, a),
        Command::VerifyManifest(a) => verify_manifest(&ctx, a),
        Command::SynthClip(a) => synth_clip(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stage = stage_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {stage}: {e:#}");
            ExitCode::FAILURE
        }
    }
}
