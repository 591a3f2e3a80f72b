//! End-to-end drivers: synthetic data generation with a verifiable run
//! manifest, and the motion-completion benchmark.

mod benchmark;
mod config;
mod datagen;
mod manifest;

pub use benchmark::{
    build_problem, load_problem, make_visibility, run_benchmark, write_problem, BenchmarkRow, BenchmarkTable,
    Method, ProblemFiles, VISIBILITY_TOLERANCE,
};
pub use config::{PipelineConfig, RigConfig, SolverConfig, CONFIG_VERSION, DEFAULT_FRAME_JUMPS, DEFAULT_RIG_RADIUS};
pub use datagen::{run_datagen, MANIFEST_FILE, PARTIAL_MANIFEST_FILE, TIMINGS_FILE};
pub use manifest::{digest, verify_manifest, Artifact, RunManifest, VerifyReport};
