use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{fit_rotation, RigidTransform, Vec3};
use crate::solvers::MotionCompletionProblem;

/// Relative singular-value floor below which a covariance counts as rank
/// deficient.
const RANK_EPS: f64 = 1e-12;

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]`.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::invalid(format!("{} source points but {} targets", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "rigid fit needs at least 3 points, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;

    let mut spread = Matrix3::zeros();
    let mut cov = Matrix3::zeros();
    for (a, b) in src.iter().zip(dst) {
        let a = a - cs;
        let b = b - cd;
        spread += a * a.transpose();
        cov += a * b.transpose();
    }
    let mut ev: Vec<f64> = spread.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= RANK_EPS * ev[0] {
        return Err(Error::DegenerateGeometry(format!(
            "source points are collinear or coincident (scatter eigenvalues {:.3e}, {:.3e})",
            ev[0], ev[1]
        )));
    }
    let sv = cov.singular_values();
    if sv[0] <= 0.0 || sv[1] <= RANK_EPS * sv[0] {
        return Err(Error::DegenerateGeometry(format!(
            "cross-covariance has rank below 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            sv[0], sv[1], sv[2]
        )));
    }
    let r = fit_rotation(&cov).ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    Ok(RigidTransform::from_parts_unchecked(r, cd - r * cs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidFit {
    pub transform: RigidTransform,
    /// `T(p) - p` for every vertex.
    pub motion: Vec<Vec3>,
}

/// One rigid transform explaining the visible motion, applied to all vertices.
pub fn fit_rigid(problem: &MotionCompletionProblem) -> Result<RigidFit> {
    let verts = problem.mesh().vertices();
    let src: Vec<Vec3> = problem.visible().iter().map(|&i| verts[i as usize]).collect();
    let dst: Vec<Vec3> = src.iter().zip(problem.visible_motion()).map(|(p, m)| p + m).collect();
    let transform = kabsch(&src, &dst)?;
    let motion = verts.iter().map(|p| transform.apply(p) - p).collect();
    Ok(RigidFit { transform, motion })
}
