//! Triangle meshes and the geometric queries built on them.

mod geometry;
mod index;
pub mod io;
mod landmarks;
mod mirror;
mod polyline;
mod transform;

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::{Error, Point3, Result, Vector3};

pub use geometry::{closest_point_on_triangle, face_cross, triangle_area};
pub use index::{ClosestPointResult, SpatialIndex};
pub use io::{load_mesh, load_mesh_with_options, load_ply_with_scalars, save_mesh_with_scalars, LoadOptions, MeshFormat};
pub use landmarks::{load_landmarks, save_landmarks, Landmark, LandmarkFormat, LandmarkSet};
pub use mirror::{mirror_mesh, MirrorPlane};
pub use polyline::{resample_polyline, Polyline};
pub use transform::{nearest_rotation, orthonormality_error, AffineTransform, RigidTransform, Transform, RIGID_TOLERANCE};

/// Triangles with area at or below this are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle surface with angle-weighted vertex normals.
///
/// Immutable after construction. Vertices keep their indices through
/// transforms and mirroring, so per-vertex masks and scalars stay valid.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    vertex_normals: Vec<Vector3>,
    warnings: Vec<String>,
}

impl TriangleMesh {
    /// Builds a mesh, dropping degenerate triangles (recorded as warnings).
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((i, p)) = vertices.iter().enumerate().find(|(_, p)| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("vertex {i} has non-finite coordinates {p:?}")));
        }
        if let Some((t, tri)) = triangles.iter().enumerate().find(|(_, tri)| tri.iter().any(|&i| i >= n)) {
            return Err(Error::invalid(format!(
                "triangle {t} references vertex {tri:?} but the mesh has {n} vertices"
            )));
        }

        let mut warnings = Vec::new();
        let mut kept = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.into_iter().enumerate() {
            let [a, b, c] = tri;
            let area = triangle_area(&vertices[a], &vertices[b], &vertices[c]);
            if a == b || b == c || a == c || area <= DEGENERATE_AREA {
                warnings.push(format!("dropped degenerate triangle {t} (area {area:.3e} mm²)"));
            } else {
                kept.push(tri);
            }
        }

        let vertex_normals = angle_weighted_normals(&vertices, &kept);
        Ok(Self {
            vertices,
            triangles: kept,
            vertex_normals,
            warnings,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> &[Vector3] {
        &self.vertex_normals
    }

    /// Load-time notes such as dropped facets.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_normal(&self, t: usize) -> Vector3 {
        let [a, b, c] = self.triangle_points(t);
        face_cross(&a, &b, &c).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// Signed enclosed volume (positive for a closed, outward-wound surface).
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    pub fn centroid(&self) -> Point3 {
        let sum = self.vertices.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / self.vertices.len().max(1) as f64)
    }

    /// Axis-aligned bounds `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Every undirected edge is shared by exactly two triangles, with opposite orientation.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Applies `transform` to every vertex. Rigid transforms rotate the
    /// normals; anything else recomputes them, and a negative determinant
    /// flips the winding so normals stay on the same side of the surface.
    pub fn transformed<T: Transform + ?Sized>(&self, transform: &T) -> TriangleMesh {
        let vertices = transform.apply_points(&self.vertices);
        if transform.is_rigid() {
            let r = transform.linear();
            return TriangleMesh {
                vertices,
                triangles: self.triangles.clone(),
                vertex_normals: self.vertex_normals.iter().map(|n| r * n).collect(),
                warnings: self.warnings.clone(),
            };
        }
        let triangles = if transform.linear().determinant() < 0.0 {
            self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect()
        } else {
            self.triangles.clone()
        };
        self.with_geometry(vertices, triangles)
    }

    /// Same connectivity, new vertex positions (normals recomputed).
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<TriangleMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::invalid(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(self.with_geometry(vertices, self.triangles.clone()))
    }

    fn with_geometry(&self, vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> TriangleMesh {
        let vertex_normals = angle_weighted_normals(&vertices, &triangles);
        TriangleMesh {
            vertices,
            triangles,
            vertex_normals,
            warnings: self.warnings.clone(),
        }
    }

    /// Keeps triangles whose three vertices are all selected. Vertex
    /// indexing is preserved; unselected vertices simply become unreferenced.
    pub fn restricted_to(&self, mask: &[bool]) -> Result<TriangleMesh> {
        if mask.len() != self.vertices.len() {
            return Err(Error::invalid(format!(
                "vertex mask has {} entries, mesh has {} vertices",
                mask.len(),
                self.vertices.len()
            )));
        }
        let triangles = self
            .triangles
            .iter()
            .copied()
            .filter(|t| t.iter().all(|&i| mask[i]))
            .collect();
        Ok(self.with_geometry(self.vertices.clone(), triangles))
    }

    /// SHA-256 over the little-endian vertex coordinates and triangle indices.
    pub fn geometry_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.vertices {
            for c in p.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for t in &self.triangles {
            for &i in t {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Angle-weighted pseudonormals (Thürmer–Wüthrich). Vertices with no
/// incident area fall back to +z so that every normal has unit length.
fn angle_weighted_normals(vertices: &[Point3], triangles: &[[usize; 3]]) -> Vec<Vector3> {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for &[a, b, c] in triangles {
        let (pa, pb, pc) = (&vertices[a], &vertices[b], &vertices[c]);
        let n = face_cross(pa, pb, pc).normalize();
        acc[a] += n * geometry::corner_angle(pa, pb, pc);
        acc[b] += n * geometry::corner_angle(pb, pc, pa);
        acc[c] += n * geometry::corner_angle(pc, pa, pb);
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 1e-300 {
                n / len
            } else {
                Vector3::z()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn drops_degenerate_triangles() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.warnings().len(), 1);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriangleMesh::new(v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn normals_are_unit() {
        let m = synthetic::uv_sphere(Point3::origin(), 5.0, 16, 8);
        for n in m.vertex_normals() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cube_is_watertight_with_positive_volume() {
        let m = synthetic::unit_cube();
        assert!(m.is_watertight());
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        let open = m.restricted_to(&[true, true, true, true, true, true, true, false]).unwrap();
        assert!(!open.is_watertight());
    }

    #[test]
    fn affine_with_negative_det_keeps_orientation() {
        let m = synthetic::unit_cube();
        let mut l = crate::Matrix3::identity();
        l[(0, 0)] = -2.0;
        let t = AffineTransform::new(l, Vector3::zeros()).unwrap();
        let out = m.transformed(&t);
        assert!((out.signed_volume() - 2.0).abs() < 1e-12);
    }
}
