use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{
    decode_indices, decode_mesh, decode_pmsn, encode_indices, encode_obj, encode_pmsn, read_file, write_file,
};
use crate::geometry::{vertex_displacements, AnimationClip, PinholeCamera, TriangleMesh, Vec3};
use crate::metrics::{eval_motion_vectors, MotionEvalReport};
use crate::motion_field::PointMotionSet;
use crate::render::cast_pixels;
use crate::pipeline::SolverConfig;
use crate::solvers::{arap_complete, arap_post_process, fit_rigid, MotionCompletionProblem};
use crate::spatial::Bvh;

/// Depth agreement (meters) for a vertex to count as visible: 1.5 voxels of
/// the finest grid.
pub const VISIBILITY_TOLERANCE: f64 = 0.015;

/// Vertices whose projected depth matches the rendered depth at their pixel
/// within `tolerance` meters.
pub fn make_visibility(mesh: &TriangleMesh, camera: &PinholeCamera, tolerance: f64) -> Vec<u32> {
    let hits = cast_pixels(&Bvh::new(mesh), camera);
    let w = camera.width() as usize;
    mesh.vertices()
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let Some(proj) = camera.project(p) else { return false };
            let Some((col, row)) = camera.pixel_at(proj.u, proj.v) else { return false };
            hits[row as usize * w + col as usize].is_some_and(|h| (h.t - proj.depth).abs() <= tolerance)
        })
        .map(|(i, _)| i as u32)
        .collect()
}

/// Completion problem for `clip` between two frames as seen from `camera`,
/// with the ground-truth motion of every vertex.
pub fn build_problem(
    clip: &AnimationClip,
    src: usize,
    dst: usize,
    camera: &PinholeCamera,
    tolerance: f64,
) -> Result<(MotionCompletionProblem, Vec<Vec3>)> {
    let mesh = clip.frame_mesh(src)?;
    let gt = vertex_displacements(clip, src, dst)?;
    let visible = make_visibility(&mesh, camera, tolerance);
    Ok((MotionCompletionProblem::from_full_motion(mesh, visible, &gt)?, gt))
}

/// File names inside a problem directory.
pub struct ProblemFiles;

impl ProblemFiles {
    pub const MESH: &'static str = "mesh.obj";
    pub const VISIBLE: &'static str = "visible.txt";
    /// Visible vertex positions and motions.
    pub const MOTION: &'static str = "motion.pmsn";
    /// Ground truth for every vertex.
    pub const GT: &'static str = "gt.pmsn";
    /// Optional dense prediction to post-process.
    pub const PREDICTION: &'static str = "prediction.pmsn";
}

pub fn write_problem(dir: &Path, problem: &MotionCompletionProblem, gt: &[Vec3]) -> Result<()> {
    let mesh = problem.mesh();
    let verts = mesh.vertices();
    write_file(&dir.join(ProblemFiles::MESH), encode_obj(mesh).as_bytes())?;
    write_file(&dir.join(ProblemFiles::VISIBLE), encode_indices(problem.visible()).as_bytes())?;
    let points = problem.visible().iter().map(|&i| verts[i as usize]).collect();
    let visible = PointMotionSet::new(points, problem.visible_motion().to_vec())?;
    write_file(&dir.join(ProblemFiles::MOTION), &encode_pmsn(&visible))?;
    write_file(&dir.join(ProblemFiles::GT), &encode_pmsn(&PointMotionSet::new(verts.to_vec(), gt.to_vec())?))
}

/// Problem, ground-truth motion and optional prediction from a directory.
pub fn load_problem(dir: &Path) -> Result<(MotionCompletionProblem, Vec<Vec3>, Option<Vec<Vec3>>)> {
    let text = |name: &str| -> Result<String> {
        String::from_utf8(read_file(&dir.join(name))?).map_err(|_| Error::format("text", format!("{name} is not UTF-8")))
    };
    let mesh = decode_mesh(&read_file(&dir.join(ProblemFiles::MESH))?, None)?;
    let visible = decode_indices(&text(ProblemFiles::VISIBLE)?)?;
    let motion = decode_pmsn(&read_file(&dir.join(ProblemFiles::MOTION))?)?;
    if motion.len() != visible.len() {
        return Err(Error::invalid(format!(
            "{} visible indices but {} motion records",
            visible.len(),
            motion.len()
        )));
    }
    let gt = decode_pmsn(&read_file(&dir.join(ProblemFiles::GT))?)?;
    if gt.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "ground truth has {} vectors for {} vertices",
            gt.len(),
            mesh.vertex_count()
        )));
    }
    let prediction_path = dir.join(ProblemFiles::PREDICTION);
    let prediction = if prediction_path.exists() {
        Some(decode_pmsn(&read_file(&prediction_path)?)?.motions().to_vec())
    } else {
        None
    };
    let problem = MotionCompletionProblem::new(mesh, visible, motion.motions().to_vec())?;
    Ok((problem, gt.motions().to_vec(), prediction))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rigid")]
    Rigid,
    #[serde(rename = "arap")]
    Arap,
    #[serde(rename = "arap-pp")]
    ArapPp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rigid, Method::Arap, Method::ArapPp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rigid => "rigid",
            Method::Arap => "arap",
            Method::ArapPp => "arap-pp",
        }
    }

    /// Full per-vertex motion estimate.
    pub fn complete(
        self,
        problem: &MotionCompletionProblem,
        prediction: Option<&[Vec3]>,
        solver: &SolverConfig,
    ) -> Result<Vec<Vec3>> {
        match self {
            Method::Rigid => Ok(fit_rigid(problem)?.motion),
            Method::Arap => Ok(arap_complete(problem, &solver.arap)?.motion),
            Method::ArapPp => {
                let dense = match prediction {
                    Some(p) => p.to_vec(),
                    None => rigid_prediction(problem)?,
                };
                Ok(arap_post_process(problem.mesh(), &dense, solver.lambda_data, &solver.arap)?.motion)
            }
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}` (expected rigid, arap or arap-pp)")))
    }
}

/// Dense stand-in prediction: observed motion on visible vertices, the best
/// rigid fit everywhere else.
fn rigid_prediction(problem: &MotionCompletionProblem) -> Result<Vec<Vec3>> {
    let mut motion = fit_rigid(problem)?.motion;
    for (&i, m) in problem.visible().iter().zip(problem.visible_motion()) {
        motion[i as usize] = *m;
    }
    Ok(motion)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub problem: String,
    pub method: Method,
    /// Hidden-vertex metrics, or the failure message.
    pub result: std::result::Result<MotionEvalReport, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:<8} {:>12} {:>8} {:>8} {:>8}", "problem", "method", "epe_cm", "acc5", "acc10", "count");
        for r in &self.rows {
            match &r.result {
                Ok(m) => {
                    let _ = writeln!(
                        s,
                        "{:<24} {:<8} {:>12.6} {:>8.4} {:>8.4} {:>8}",
                        r.problem, r.method, m.epe, m.acc5, m.acc10, m.count
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{:<24} {:<8} error: {e}", r.problem, r.method);
                }
            }
        }
        s
    }

    pub fn row(&self, problem: &str, method: Method) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.problem == problem && r.method == method)
    }
}

/// Runs every method on every problem directory and scores hidden vertices.
/// Failures are recorded per row.
pub fn run_benchmark(problem_dirs: &[PathBuf], methods: &[Method], solver: &SolverConfig) -> BenchmarkTable {
    let mut rows = Vec::new();
    if methods.is_empty() {
        return BenchmarkTable { rows };
    }
    for dir in problem_dirs {
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        let loaded = load_problem(dir);
        for &method in methods {
            let result = match &loaded {
                Err(e) => Err(format!("loading problem: {e}")),
                Ok((problem, gt, prediction)) => score(problem, gt, method.complete(problem, prediction.as_deref(), solver)),
            };
            if let Err(e) = &result {
                log::warn!("{name}/{method}: {e}");
            }
            rows.push(BenchmarkRow {
                problem: name.clone(),
                method,
                result,
            });
        }
    }
    BenchmarkTable { rows }
}

fn score(
    problem: &MotionCompletionProblem,
    gt: &[Vec3],
    estimate: Result<Vec<Vec3>>,
) -> std::result::Result<MotionEvalReport, String> {
    let estimate = estimate.map_err(|e| e.to_string())?;
    let hidden = problem.hidden();
    let pick = |m: &[Vec3]| hidden.iter().map(|&i| m[i as usize]).collect::<Vec<_>>();
    eval_motion_vectors(&pick(&estimate), &pick(gt)).map_err(|e| format!("no hidden vertices to score ({e})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Intrinsics;
    use crate::synthetic::icosphere;

    fn camera_on_z(distance: f64) -> PinholeCamera {
        PinholeCamera::look_at(Intrinsics::default(), Vec3::new(0.0, 0.0, distance), Vec3::zeros(), Vec3::y()).unwrap()
    }

    #[test]
    fn sphere_visibility_is_front_hemisphere() {
        let mesh = icosphere(4, 0.5);
        let cam = camera_on_z(1.5);
        let vis = make_visibility(&mesh, &cam, VISIBILITY_TOLERANCE);
        assert!(!vis.is_empty());
        let eye = cam.center();
        let facing = |i: usize| {
            let p = mesh.vertices()[i];
            p.normalize().dot(&(p - eye).normalize())
        };
        // the polyhedral silhouette sits a little past the analytic limb
        for &i in &vis {
            assert!(facing(i as usize) < 0.02, "vertex {i} faces away");
        }
        for i in 0..mesh.vertex_count() {
            if facing(i) < -0.2 {
                assert!(vis.binary_search(&(i as u32)).is_ok(), "front vertex {i} missed");
            }
        }
    }

    #[test]
    fn occluded_and_flat_cases() {
        let sheet = TriangleMesh::new(
            vec![Vec3::new(-0.2, -0.2, 0.0), Vec3::new(0.2, -0.2, 0.0), Vec3::new(0.2, 0.2, 0.0), Vec3::new(-0.2, 0.2, 0.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let cam = camera_on_z(1.0);
        assert_eq!(make_visibility(&sheet, &cam, VISIBILITY_TOLERANCE), vec![0, 1, 2, 3]);

        // a big plane between the camera and the sheet hides it
        let mut v = sheet.vertices().to_vec();
        v.extend([Vec3::new(-5.0, -5.0, 0.5), Vec3::new(5.0, -5.0, 0.5), Vec3::new(5.0, 5.0, 0.5), Vec3::new(-5.0, 5.0, 0.5)]);
        let both = TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]]).unwrap();
        assert!(make_visibility(&both, &cam, VISIBILITY_TOLERANCE).is_empty());
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("icp".parse::<Method>().is_err());
    }
}
