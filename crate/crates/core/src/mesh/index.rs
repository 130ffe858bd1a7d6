//! Bounding volume hierarchy over mesh triangles for closest-point queries.

use std::sync::Arc;

use crate::mesh::{closest_point_on_triangle, TriangleMesh};
use crate::{Error, Point3, Result, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point3,
    max: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    /// Squared distance from `p` to the box (zero inside).
    fn distance_squared(&self, p: &Point3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = p[k];
            let excess = if v < self.min[k] {
                self.min[k] - v
            } else if v > self.max[k] {
                v - self.max[k]
            } else {
                0.0
            };
            d2 += excess * excess;
        }
        d2
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Nearest surface point to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPointResult {
    pub point: Point3,
    pub triangle_id: usize,
    /// Weights of the triangle's three corners at `point`.
    pub barycentric: [f64; 3],
    pub distance: f64,
    /// `distance` carrying the side of the surface: positive along the
    /// interpolated vertex normal, negative against it, `+0` on the surface.
    pub signed_distance: f64,
}

/// Immutable, thread-safe BVH over the triangles of one mesh.
///
/// Closest-point queries are exact: they return the same triangle as an
/// exhaustive scan, with ties broken by the lowest triangle id.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    mesh: Arc<TriangleMesh>,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl SpatialIndex {
    pub fn build(mesh: TriangleMesh) -> Result<Self> {
        Self::from_shared(Arc::new(mesh))
    }

    pub fn from_shared(mesh: Arc<TriangleMesh>) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::invalid("cannot index a mesh without triangles"));
        }
        let n = mesh.triangle_count();
        let mut tri_bounds = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        for t in 0..n {
            let pts = mesh.triangle_points(t);
            let mut b = Aabb::empty();
            pts.iter().for_each(|p| b.grow(p));
            tri_bounds.push(b);
            centroids.push(Point3::from((pts[0].coords + pts[1].coords + pts[2].coords) / 3.0));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, n, &tri_bounds, &centroids);
        Ok(Self { mesh, nodes, order })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn shared_mesh(&self) -> Arc<TriangleMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn closest_point(&self, query: &Point3) -> ClosestPointResult {
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(usize, Point3, [f64; 3])> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            // Strict comparison keeps equidistant subtrees alive for the tie rule.
            if self.nodes[id].bounds().distance_squared(query) > best_d2 {
                continue;
            }
            match &self.nodes[id] {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[*start..*end] {
                        let [a, b, c] = self.mesh.triangle_points(t);
                        let (p, w) = closest_point_on_triangle(query, &a, &b, &c);
                        let d2 = (query - p).norm_squared();
                        let better = d2 < best_d2 || (d2 == best_d2 && best.is_some_and(|(bt, _, _)| t < bt));
                        if better || best.is_none() {
                            best_d2 = d2;
                            best = Some((t, p, w));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().distance_squared(query);
                    let dr = self.nodes[*right].bounds().distance_squared(query);
                    // Pop the nearer child first.
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        let (triangle_id, point, barycentric) = best.expect("index is non-empty");
        self.make_result(query, triangle_id, point, barycentric)
    }

    /// Exhaustive reference scan over every triangle, same tie rule.
    pub fn closest_point_exhaustive(&self, query: &Point3) -> ClosestPointResult {
        let mut best: Option<(f64, usize, Point3, [f64; 3])> = None;
        for t in 0..self.mesh.triangle_count() {
            let [a, b, c] = self.mesh.triangle_points(t);
            let (p, w) = closest_point_on_triangle(query, &a, &b, &c);
            let d2 = (query - p).norm_squared();
            if best.is_none_or(|(bd, _, _, _)| d2 < bd) {
                best = Some((d2, t, p, w));
            }
        }
        let (_, t, p, w) = best.expect("index is non-empty");
        self.make_result(query, t, p, w)
    }

    fn make_result(&self, query: &Point3, triangle_id: usize, point: Point3, barycentric: [f64; 3]) -> ClosestPointResult {
        let distance = (query - point).norm();
        let signed_distance = if distance == 0.0 {
            0.0
        } else {
            let normal = self.normal_at(triangle_id, &barycentric);
            let side = (query - point).dot(&normal);
            if side < 0.0 {
                -distance
            } else if side > 0.0 {
                distance
            } else {
                // Interpolated normal is tangent to the offset; fall back to the face.
                if (query - point).dot(&self.mesh.face_normal(triangle_id)) < 0.0 {
                    -distance
                } else {
                    distance
                }
            }
        };
        ClosestPointResult {
            point,
            triangle_id,
            barycentric,
            distance,
            signed_distance,
        }
    }

    /// Vertex normals of the triangle blended by `barycentric`.
    pub fn normal_at(&self, triangle_id: usize, barycentric: &[f64; 3]) -> Vector3 {
        let tri = self.mesh.triangles()[triangle_id];
        let normals = self.mesh.vertex_normals();
        normals[tri[0]] * barycentric[0] + normals[tri[1]] * barycentric[1] + normals[tri[2]] * barycentric[2]
    }

    pub fn signed_distance(&self, query: &Point3) -> f64 {
        self.closest_point(query).signed_distance
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    tri_bounds: &[Aabb],
    centroids: &[Point3],
) -> usize {
    let mut bounds = Aabb::empty();
    for &t in &order[start..end] {
        bounds.merge(&tri_bounds[t]);
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let mut cbox = Aabb::empty();
    for &t in &order[start..end] {
        cbox.grow(&centroids[t]);
    }
    let extent = cbox.max - cbox.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = start + (end - start) / 2;
    // Total order on (coordinate, id) keeps construction deterministic.
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bounds, start, end }); // placeholder
    let left = build_node(nodes, order, start, mid, tri_bounds, centroids);
    let right = build_node(nodes, order, mid, end, tri_bounds, centroids);
    nodes[id] = Node::Inner { bounds, left, right };
    id
}
