//! Rigid and affine transforms acting on points and meshes.

use nalgebra::{Matrix4, Rotation3, Unit};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Matrix3, Point3, Result, Vector3};

/// Tolerance for accepting a rotation block as orthonormal with det +1.
pub const RIGID_TOLERANCE: f64 = 1e-9;

/// Anything that maps points by `p' = L·p + t`.
pub trait Transform {
    fn linear(&self) -> Matrix3;
    fn translation(&self) -> Vector3;
    /// Rigid transforms carry normals along; general affine maps force a recompute.
    fn is_rigid(&self) -> bool;

    fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.linear() * p.coords + self.translation())
    }

    fn apply_points(&self, points: &[Point3]) -> Vec<Point3> {
        let l = self.linear();
        let t = self.translation();
        points.iter().map(|p| Point3::from(l * p.coords + t)).collect()
    }

    fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.linear());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation());
        m
    }

    /// Row-major 4×4 homogeneous matrix.
    fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix4();
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        rows
    }
}

/// Largest absolute entry of `RᵀR − I`.
pub fn orthonormality_error(r: &Matrix3) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Nearest rotation to `m` in the Frobenius sense (polar factor), forced to det +1.
pub fn nearest_rotation(m: &Matrix3) -> Matrix3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * v_t;
    }
    r
}

fn split_rows(rows: &[[f64; 4]; 4]) -> Result<(Matrix3, Vector3)> {
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("transform matrix contains non-finite entries"));
    }
    let bottom = rows[3];
    if bottom != [0.0, 0.0, 0.0, 1.0] {
        return Err(Error::invalid(format!(
            "homogeneous row must be [0, 0, 0, 1], found {bottom:?}"
        )));
    }
    let linear = Matrix3::from_fn(|r, c| rows[r][c]);
    let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
    Ok((linear, translation))
}

/// Proper rigid motion `p' = R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3,
    translation: Vector3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is orthonormal with det +1 within [`RIGID_TOLERANCE`].
    pub fn new(rotation: Matrix3, translation: Vector3) -> Result<Self> {
        Self::with_tolerance(rotation, translation, RIGID_TOLERANCE)
    }

    pub fn with_tolerance(rotation: Matrix3, translation: Vector3, tol: f64) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("rigid transform contains non-finite entries"));
        }
        let err = orthonormality_error(&rotation);
        let det = rotation.determinant();
        if err > tol || (det - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "rotation block is not a proper rotation (orthonormality error {err:.3e}, det {det:.9})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Trusted constructor for rotations produced by our own solvers.
    pub(crate) fn from_parts_unchecked(rotation: Matrix3, translation: Vector3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about `axis` through the origin.
    pub fn from_axis_angle(axis: &Vector3, angle: f64) -> Result<Self> {
        let axis = Unit::try_new(*axis, 1e-12)
            .ok_or_else(|| Error::invalid("rotation axis has zero length"))?;
        Ok(Self {
            rotation: *Rotation3::from_axis_angle(&axis, angle).matrix(),
            translation: Vector3::zeros(),
        })
    }

    /// Rotation by `angle` about the line through `pivot` along `axis`.
    pub fn about_pivot(pivot: &Point3, axis: &Vector3, angle: f64) -> Result<Self> {
        let r = Self::from_axis_angle(axis, angle)?.rotation;
        Ok(Self {
            rotation: r,
            translation: pivot.coords - r * pivot.coords,
        })
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        let (r, t) = split_rows(rows)?;
        Self::new(r, t)
    }

    /// Like [`Self::from_rows`], but a rotation block that drifted from
    /// orthonormal by less than `max_drift` is replaced by its polar factor.
    /// Returns whether a correction was applied.
    pub fn from_rows_corrected(rows: &[[f64; 4]; 4], max_drift: f64) -> Result<(Self, bool)> {
        let (r, t) = split_rows(rows)?;
        let det = r.determinant();
        if !(det > 0.0) {
            return Err(Error::invalid(format!("rotation determinant {det:.6} is not positive")));
        }
        if let Ok(rigid) = Self::new(r, t) {
            return Ok((rigid, false));
        }
        let err = orthonormality_error(&r);
        if err >= max_drift {
            return Err(Error::invalid(format!(
                "rotation block is {err:.3e} from orthonormal (limit {max_drift:.1e}), det {det:.6}"
            )));
        }
        Ok((Self::from_parts_unchecked(nearest_rotation(&r), t), true))
    }

    pub fn rotation(&self) -> &Matrix3 {
        &self.rotation
    }

    pub fn translation_vector(&self) -> &Vector3 {
        &self.translation
    }

    /// `self` followed by `next`: `x ↦ next(self(x))`.
    pub fn then(&self, next: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: next.rotation * self.rotation,
            translation: next.rotation * self.translation + next.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }
}

impl Transform for RigidTransform {
    fn linear(&self) -> Matrix3 {
        self.rotation
    }
    fn translation(&self) -> Vector3 {
        self.translation
    }
    fn is_rigid(&self) -> bool {
        true
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    matrix: [[f64; 4]; 4],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRecord {
            matrix: self.to_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = MatrixRecord::deserialize(d)?;
        RigidTransform::from_rows(&rec.matrix).map_err(serde::de::Error::custom)
    }
}

/// General invertible affine map `p' = L·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    linear: Matrix3,
    translation: Vector3,
}

impl AffineTransform {
    /// Smallest accepted `|det L|`.
    pub const MIN_ABS_DET: f64 = 1e-12;

    pub fn new(linear: Matrix3, translation: Vector3) -> Result<Self> {
        if linear.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("affine transform contains non-finite entries"));
        }
        let det = linear.determinant();
        if det.abs() <= Self::MIN_ABS_DET {
            return Err(Error::invalid(format!(
                "affine linear part is singular (det {det:.3e})"
            )));
        }
        Ok(Self {
            linear,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self::from(RigidTransform::identity())
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        let (l, t) = split_rows(rows)?;
        Self::new(l, t)
    }

    pub fn linear_part(&self) -> &Matrix3 {
        &self.linear
    }

    pub fn translation_vector(&self) -> &Vector3 {
        &self.translation
    }

    pub fn determinant(&self) -> f64 {
        self.linear.determinant()
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &AffineTransform) -> AffineTransform {
        AffineTransform {
            linear: next.linear * self.linear,
            translation: next.linear * self.translation + next.translation,
        }
    }

    pub fn inverse(&self) -> Result<AffineTransform> {
        let inv = self
            .linear
            .try_inverse()
            .ok_or_else(|| Error::invalid("affine linear part is not invertible"))?;
        AffineTransform::new(inv, -(inv * self.translation))
    }
}

impl From<RigidTransform> for AffineTransform {
    fn from(r: RigidTransform) -> Self {
        AffineTransform {
            linear: r.rotation,
            translation: r.translation,
        }
    }
}

impl Transform for AffineTransform {
    fn linear(&self) -> Matrix3 {
        self.linear
    }
    fn translation(&self) -> Vector3 {
        self.translation
    }
    fn is_rigid(&self) -> bool {
        false
    }
}
