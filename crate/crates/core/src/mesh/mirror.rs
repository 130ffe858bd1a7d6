//! Reflection of meshes across a plane.

use serde::{Deserialize, Serialize};

use crate::mesh::TriangleMesh;
use crate::{Error, Point3, Result, Vector3};

/// Plane through `point` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRecord")]
pub struct MirrorPlane {
    point: Point3,
    normal: Vector3,
}

#[derive(Deserialize)]
struct PlaneRecord {
    point: Point3,
    normal: Vector3,
}

impl TryFrom<PlaneRecord> for MirrorPlane {
    type Error = Error;

    fn try_from(r: PlaneRecord) -> Result<Self> {
        MirrorPlane::new(r.point, r.normal)
    }
}

impl MirrorPlane {
    /// Normalizes `normal`; rejects zero or non-finite input.
    pub fn new(point: Point3, normal: Vector3) -> Result<Self> {
        let len = normal.norm();
        if !(len.is_finite() && len > 1e-12) || !point.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("mirror plane needs a finite point and non-zero normal"));
        }
        Ok(Self {
            point,
            normal: normal / len,
        })
    }

    pub fn point(&self) -> &Point3 {
        &self.point
    }

    pub fn normal(&self) -> &Vector3 {
        &self.normal
    }

    pub fn signed_offset(&self, p: &Point3) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    /// Reflection of `p` across the plane.
    pub fn reflect(&self, p: &Point3) -> Point3 {
        // Axis-aligned planes reflect one coordinate as `2c - x`; for c = 0
        // this is a sign flip and the reflection is an exact involution.
        if let Some(k) = self.axis() {
            let mut q = *p;
            let c = self.point[k];
            q[k] = if c == 0.0 { -p[k] } else { 2.0 * c - p[k] };
            return q;
        }
        p - self.normal * (2.0 * self.signed_offset(p))
    }

    fn axis(&self) -> Option<usize> {
        (0..3).find(|&k| self.normal[k].abs() == 1.0 && (0..3).all(|j| j == k || self.normal[j] == 0.0))
    }
}

/// Reflects every vertex and reverses winding so normals keep facing outward.
/// Vertex indices are preserved.
pub fn mirror_mesh(mesh: &TriangleMesh, plane: &MirrorPlane) -> TriangleMesh {
    let vertices = mesh.vertices().iter().map(|p| plane.reflect(p)).collect();
    let triangles = mesh.triangles().iter().map(|&[a, b, c]| [a, c, b]).collect();
    let mut out = TriangleMesh::new(vertices, triangles).expect("reflection preserves validity");
    out.warnings = mesh.warnings().to_vec();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn reflects_across_yz_plane() {
        let plane = MirrorPlane::new(Point3::origin(), Vector3::x()).unwrap();
        assert_eq!(plane.reflect(&Point3::new(1.0, 0.0, 0.0)), Point3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn double_mirror_is_bitwise_identity_for_midsagittal_plane() {
        let m = synthetic::uv_sphere(Point3::new(3.3, -1.7, 0.9), 5.0, 24, 12);
        let plane = MirrorPlane::new(Point3::new(0.0, 4.0, -2.0), Vector3::x()).unwrap();
        let twice = mirror_mesh(&mirror_mesh(&m, &plane), &plane);
        assert_eq!(twice.vertices(), m.vertices());
        assert_eq!(twice.triangles(), m.triangles());
    }

    #[test]
    fn oblique_plane_round_trip_is_close() {
        let m = synthetic::uv_sphere(Point3::new(3.3, -1.7, 0.9), 5.0, 24, 12);
        let plane = MirrorPlane::new(Point3::new(0.5, 0.2, -0.1), Vector3::new(1.0, 0.3, -0.2)).unwrap();
        let twice = mirror_mesh(&mirror_mesh(&m, &plane), &plane);
        for (a, b) in twice.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn mirrored_tetrahedron_keeps_volume_and_orientation() {
        let m = synthetic::tetrahedron([
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(3.0, 0.2, 0.1),
            Point3::new(0.4, 2.0, -0.3),
            Point3::new(0.7, 0.5, 1.9),
        ]);
        let v = m.signed_volume();
        assert!(v > 0.0);
        let plane = MirrorPlane::new(Point3::new(1.0, 2.0, 3.0), Vector3::new(0.3, -0.5, 0.8)).unwrap();
        let r = mirror_mesh(&m, &plane);
        assert!((r.signed_volume() - v).abs() < 1e-9);
        assert!((r.surface_area() - m.surface_area()).abs() < 1e-9 * m.surface_area());
    }
}
