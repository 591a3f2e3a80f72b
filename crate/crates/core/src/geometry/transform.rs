//! Rigid transforms, dual quaternions and dual-quaternion blending.
//!
//! Quaternions are scalar-first `(w, x, y, z)` wherever they are exposed as
//! plain arrays.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// An element of SE(3): `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho_err <= ORTHONORMAL_TOLERANCE) || (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::invalid(format!(
                "rotation is not in SO(3) (|RtR - I| = {ortho_err:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("translation is not finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Wraps matrices already known to be a proper rotation (e.g. from an SVD).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), translation)
    }

    pub fn from_rotation(rotation: &UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self::from_parts_unchecked(*rotation.to_rotation_matrix().matrix(), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self::from_parts_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self::from_parts_unchecked(rt, -(rt * self.translation))
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs()) > 1e-12 {
            return Err(Error::invalid("bottom row of a rigid 4x4 matrix must be [0 0 0 1]"));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Unit dual quaternion `real + ε dual` encoding a rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuaternion {
    pub real: Quaternion<f64>,
    pub dual: Quaternion<f64>,
}

impl DualQuaternion {
    pub fn from_rigid(t: &RigidTransform) -> Self {
        let real = t.quaternion().into_inner();
        let tq = Quaternion::new(0.0, t.translation.x, t.translation.y, t.translation.z);
        let dual = tq * real * 0.5;
        Self { real, dual }
    }

    /// Normalizes, restores `<real, dual> = 0` and converts back.
    pub fn to_rigid(&self) -> Result<RigidTransform> {
        let n = self.real.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::Numerical(format!(
                "dual quaternion real part has norm {n:e}"
            )));
        }
        let real = self.real / n;
        let mut dual = self.dual / n;
        dual -= real * real.dot(&dual);
        let t = (dual * real.conjugate() * 2.0).imag();
        let rot = UnitQuaternion::new_unchecked(real).to_rotation_matrix();
        Ok(RigidTransform::from_parts_unchecked(*rot.matrix(), t))
    }

    /// The same transform with the opposite sign.
    pub fn negated(&self) -> Self {
        Self {
            real: -self.real,
            dual: -self.dual,
        }
    }

    /// Representative with non-negative scalar part.
    ///
    /// A zero scalar part is broken by the first non-zero vector component.
    pub fn canonical(&self) -> Self {
        let r = &self.real;
        let key = [r.w, r.i, r.j, r.k]
            .into_iter()
            .find(|c| *c != 0.0)
            .unwrap_or(0.0);
        if key < 0.0 {
            self.negated()
        } else {
            *self
        }
    }

    /// `(w, x, y, z, w', x', y', z')`.
    pub fn to_array(&self) -> [f64; 8] {
        let (r, d) = (&self.real, &self.dual);
        [r.w, r.i, r.j, r.k, d.w, d.i, d.j, d.k]
    }
}

/// Rotation `R` minimizing `Σ w |b - R a|²` given `covariance = Σ w a bᵀ`.
///
/// Reflections are corrected by flipping the smallest singular direction.
/// Returns `None` if the SVD fails to converge.
pub fn fit_rotation(covariance: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = covariance.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // singular values are sorted in decreasing order
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -1.0;
        r = v * flip * u.transpose();
    }
    Some(r)
}

fn normalized_weights(len: usize, weights: &[f64]) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::invalid("blend of an empty transform list"));
    }
    if weights.len() != len {
        return Err(Error::invalid(format!(
            "{} weights for {len} transforms",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid(format!("blend weight {w} is not a finite non-negative number")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("blend weights sum to zero"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Dual quaternion blending of rigid transforms.
pub fn dqb_blend(transforms: &[RigidTransform], weights: &[f64]) -> Result<RigidTransform> {
    if transforms.len() == 1 {
        normalized_weights(1, weights)?;
        return Ok(transforms[0]);
    }
    let dqs: Vec<DualQuaternion> = transforms.iter().map(DualQuaternion::from_rigid).collect();
    dqb_blend_dual(&dqs, weights)
}

/// Dual quaternion blending over explicit quaternion representations.
///
/// Every input is canonicalized, then aligned to the hemisphere of the first
/// one, so the result does not depend on the sign each input was stored with.
pub fn dqb_blend_dual(dqs: &[DualQuaternion], weights: &[f64]) -> Result<RigidTransform> {
    let weights = normalized_weights(dqs.len(), weights)?;
    let pivot = dqs[0].canonical().real;
    let mut real = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    let mut dual = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    for (dq, w) in dqs.iter().zip(&weights) {
        let mut q = dq.canonical();
        if q.real.dot(&pivot) < 0.0 {
            q = q.negated();
        }
        real += q.real * *w;
        dual += q.dual * *w;
    }
    DualQuaternion { real, dual }.to_rigid()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use std::f64::consts::FRAC_PI_2;

    fn rz(angle: f64) -> RigidTransform {
        RigidTransform::from_rotation(
            &UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
            Vec3::zeros(),
        )
    }

    #[test]
    fn rejects_non_rotation() {
        assert!(RigidTransform::new(Matrix3::identity() * 2.0, Vec3::zeros()).is_err());
        let mut reflect = Matrix3::identity();
        reflect[(2, 2)] = -1.0;
        assert!(RigidTransform::new(reflect, Vec3::zeros()).is_err());
    }

    #[test]
    fn matrix4_round_trip() {
        let t = RigidTransform::from_rotation(
            &UnitQuaternion::from_euler_angles(0.1, -0.4, 2.0),
            Vec3::new(1.0, 2.0, 3.0),
        );
        let back = RigidTransform::from_matrix4(&t.to_matrix4()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn dual_quaternion_round_trip() {
        let t = RigidTransform::from_rotation(
            &UnitQuaternion::from_euler_angles(0.7, 0.2, -1.3),
            Vec3::new(-0.4, 0.25, 3.0),
        );
        let dq = DualQuaternion::from_rigid(&t);
        assert_relative_eq!(dq.real.norm(), 1.0, epsilon = 1e-12);
        assert!(dq.real.dot(&dq.dual).abs() < 1e-12);
        let back = dq.to_rigid().unwrap();
        assert_relative_eq!(back.rotation(), t.rotation(), epsilon = 1e-12);
        assert_relative_eq!(back.translation(), t.translation(), epsilon = 1e-12);
    }

    #[test]
    fn single_blend_is_exact() {
        let t = RigidTransform::from_rotation(
            &UnitQuaternion::from_euler_angles(0.3, 0.0, 1.0),
            Vec3::new(0.1, 0.2, 0.3),
        );
        assert_eq!(dqb_blend(&[t], &[1.0]).unwrap(), t);
    }

    #[test]
    fn translation_blend_is_linear() {
        let a = RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::from_translation(Vec3::new(0.0, 1.0, 0.0));
        let out = dqb_blend(&[a, b], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(*out.rotation(), Matrix3::identity(), epsilon = 1e-15);
        assert_relative_eq!(*out.translation(), Vec3::new(0.5, 0.5, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn antipodal_pair_blends_to_identity() {
        let a = DualQuaternion::from_rigid(&rz(FRAC_PI_2));
        let b = DualQuaternion::from_rigid(&rz(-FRAC_PI_2)).negated();

        // Slerp oracle at t = 0.5 on hemisphere-aligned, canonical inputs.
        let qa = a.canonical().real;
        let mut qb = b.canonical().real;
        if qa.dot(&qb) < 0.0 {
            qb = -qb;
        }
        let theta = qa.dot(&qb).clamp(-1.0, 1.0).acos();
        let half = (theta * 0.5).sin() / theta.sin();
        let oracle = UnitQuaternion::new_normalize(qa * half + qb * half);

        let out = dqb_blend_dual(&[a, b], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(
            *out.rotation(),
            *oracle.to_rotation_matrix().matrix(),
            epsilon = 1e-12
        );
        assert_relative_eq!(*out.rotation(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn fit_rotation_recovers_rotation() {
        let r = UnitQuaternion::from_euler_angles(0.4, -1.1, 2.5);
        let pts = [Vec3::x(), Vec3::y(), Vec3::new(0.3, -0.2, 1.0), Vec3::new(-1.0, 0.5, 0.2)];
        let cov = pts
            .iter()
            .fold(Matrix3::zeros(), |acc, a| acc + a * (r * a).transpose());
        let fit = fit_rotation(&cov).unwrap();
        assert_relative_eq!(fit, *r.to_rotation_matrix().matrix(), epsilon = 1e-12);
        // planar reflection-prone input still gives det +1
        let flat = [Vec3::x(), Vec3::y(), -Vec3::x()];
        let cov = flat.iter().fold(Matrix3::zeros(), |acc, a| {
            acc + a * Vec3::new(a.x, -a.y, 0.0).transpose()
        });
        assert!((fit_rotation(&cov).unwrap().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blend_errors() {
        assert!(dqb_blend(&[], &[]).is_err());
        let t = RigidTransform::identity();
        assert!(dqb_blend(&[t, t], &[0.0, 0.0]).is_err());
        assert!(dqb_blend(&[t, t], &[1.0]).is_err());
        assert!(dqb_blend(&[t, t], &[1.0, -1.0]).is_err());
    }
}
