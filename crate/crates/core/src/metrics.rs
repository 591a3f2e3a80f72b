//! Motion metrics (end-point error and accuracy) and shape metrics
//! (volumetric IoU, Chamfer distance, normal consistency, point-to-plane
//! distance and SDF error).

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};
use crate::motion_field::PointMotionSet;
use crate::spatial::KdTree;
use crate::volumetric::TsdfGrid;

/// Accuracy thresholds, each in centimeters and in percent of the
/// ground-truth magnitude.
pub const ACC_THRESHOLDS: [f64; 2] = [5.0, 10.0];
pub const DEFAULT_SHAPE_SAMPLES: usize = 30_000;
pub const DEFAULT_SAMPLE_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionEvalReport {
    /// Mean end-point error (cm).
    pub epe: f64,
    pub acc5: f64,
    pub acc10: f64,
    pub count: usize,
}

impl MotionEvalReport {
    pub fn to_text(&self) -> String {
        format!(
            "epe_cm = {}\nacc5 = {}\nacc10 = {}\ncount = {}\n",
            self.epe, self.acc5, self.acc10, self.count
        )
    }
}

/// True if the error passes threshold `t`: below `t` cm, or below `t`
/// percent of the ground-truth magnitude.
pub fn within_threshold(error_m: f64, gt_norm_m: f64, t: f64) -> bool {
    error_m * 100.0 < t || (gt_norm_m > 0.0 && error_m < t / 100.0 * gt_norm_m)
}

/// Motion metrics over paired vectors (meters in, centimeters out).
pub fn eval_motion_vectors(pred: &[Vec3], gt: &[Vec3]) -> Result<MotionEvalReport> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} predicted vectors but {} ground-truth vectors",
            pred.len(),
            gt.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::invalid("no motion vectors to evaluate"));
    }
    let n = gt.len() as f64;
    let (mut sum, mut hit5, mut hit10) = (0.0, 0usize, 0usize);
    for (p, g) in pred.iter().zip(gt) {
        let err = (p - g).norm();
        let mag = g.norm();
        sum += err;
        hit5 += within_threshold(err, mag, ACC_THRESHOLDS[0]) as usize;
        hit10 += within_threshold(err, mag, ACC_THRESHOLDS[1]) as usize;
    }
    Ok(MotionEvalReport {
        epe: sum / n * 100.0,
        acc5: hit5 as f64 / n,
        acc10: hit10 as f64 / n,
        count: gt.len(),
    })
}

/// Motion metrics for two motion sets over the same points in the same order.
pub fn eval_motion(pred: &PointMotionSet, gt: &PointMotionSet) -> Result<MotionEvalReport> {
    eval_motion_vectors(pred.motions(), gt.motions())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetrics {
    /// Chamfer distance (cm).
    pub cd: f64,
    pub snc: f64,
    /// Point-to-plane distance (cm).
    pub p2p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeMetrics {
    pub iou: f64,
    /// Mean absolute SDF difference (voxel units).
    pub l1_sdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeEvalReport {
    pub iou: f64,
    pub cd: f64,
    pub snc: f64,
    pub p2p: f64,
    pub l1_sdf: f64,
    pub samples: usize,
    pub seed: u64,
}

impl ShapeEvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "iou = {}", self.iou);
        let _ = writeln!(s, "cd_cm = {}", self.cd);
        let _ = writeln!(s, "snc = {}", self.snc);
        let _ = writeln!(s, "p2p_cm = {}", self.p2p);
        let _ = writeln!(s, "l1_sdf = {}", self.l1_sdf);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// Area-uniform surface samples with the unit normal of their triangle.
pub fn sample_surface<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let areas: Vec<f64> = (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.triangle_positions(t);
            0.5 * (b - a).cross(&(c - a)).norm()
        })
        .collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| Error::invalid("mesh has no surface area to sample"))?;
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let t = pick.sample(rng);
        let [a, b, c] = mesh.triangle_positions(t);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        normals.push((b - a).cross(&(c - a)).normalize());
    }
    Ok((points, normals))
}

/// Mean nearest-neighbour distance, |cos| between normals and point-to-plane
/// distance from `from` to `to`.
fn directed(from: &(Vec<Vec3>, Vec<Vec3>), to: &(Vec<Vec3>, Vec<Vec3>), tree: &KdTree) -> (f64, f64, f64) {
    let (dist, cos, plane) = from
        .0
        .par_iter()
        .zip(&from.1)
        .map(|(p, n)| {
            let nb = tree.nearest(p).expect("non-empty sample set");
            let (q, nq) = (to.0[nb.index], to.1[nb.index]);
            (nb.distance(), n.dot(&nq).abs(), (p - q).dot(&nq).abs())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let n = from.0.len() as f64;
    (dist / n, cos / n, plane / n)
}

/// Chamfer, normal consistency and point-to-plane metrics from `samples`
/// points per mesh. Both meshes are sampled with generators seeded by `seed`.
pub fn surface_metrics(pred: &TriangleMesh, gt: &TriangleMesh, samples: usize, seed: u64) -> Result<SurfaceMetrics> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    for (name, m) in [("predicted", pred), ("ground-truth", gt)] {
        if m.is_empty() {
            return Err(Error::invalid(format!("{name} mesh is empty")));
        }
    }
    let sp = sample_surface(pred, samples, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let sg = sample_surface(gt, samples, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let tp = KdTree::new(&sp.0);
    let tg = KdTree::new(&sg.0);
    let (d1, c1, p1) = directed(&sp, &sg, &tg);
    let (d2, c2, p2) = directed(&sg, &sp, &tp);
    Ok(SurfaceMetrics {
        cd: 0.5 * (d1 + d2) * 100.0,
        snc: 0.5 * (c1 + c2),
        p2p: 0.5 * (p1 + p2) * 100.0,
    })
}

/// IoU of the `sdf < 0` regions over the union of stored voxels, and mean
/// SDF difference over voxels stored in both grids. IoU is 1 when neither
/// grid has an inside voxel.
pub fn volume_metrics(pred: &TsdfGrid, gt: &TsdfGrid) -> Result<VolumeMetrics> {
    if pred.layout != gt.layout {
        return Err(Error::invalid(format!(
            "grid layouts differ (voxel sizes {} and {})",
            pred.voxel_size(),
            gt.voxel_size()
        )));
    }
    let inside = |g: &TsdfGrid, c| g.get(c).is_some_and(|v| *v < 0.0);
    let (mut both, mut either) = (0usize, 0usize);
    let mut l1 = 0.0;
    let mut shared = 0usize;
    for (c, v) in pred.iter() {
        let (a, b) = (*v < 0.0, inside(gt, c));
        both += (a && b) as usize;
        either += (a || b) as usize;
        if let Some(g) = gt.get(c) {
            l1 += (v - g).abs();
            shared += 1;
        }
    }
    either += gt.iter().filter(|(c, v)| **v < 0.0 && !pred.contains(c)).count();
    if shared == 0 {
        let missing = match (pred.is_empty(), gt.is_empty()) {
            (true, _) => "predicted grid is empty",
            (_, true) => "ground-truth grid is empty",
            _ => "grids share no voxels",
        };
        return Err(Error::invalid(format!("cannot compare SDF values: {missing}")));
    }
    Ok(VolumeMetrics {
        iou: if either == 0 { 1.0 } else { both as f64 / either as f64 },
        l1_sdf: l1 / shared as f64,
    })
}

pub fn eval_shape(
    pred_mesh: &TriangleMesh,
    gt_mesh: &TriangleMesh,
    pred_tsdf: &TsdfGrid,
    gt_tsdf: &TsdfGrid,
    samples: usize,
    seed: u64,
) -> Result<ShapeEvalReport> {
    let s = surface_metrics(pred_mesh, gt_mesh, samples, seed)?;
    let v = volume_metrics(pred_tsdf, gt_tsdf)?;
    Ok(ShapeEvalReport {
        iou: v.iou,
        cd: s.cd,
        snc: s.snc,
        p2p: s.p2p,
        l1_sdf: v.l1_sdf,
        samples,
        seed,
    })
}
