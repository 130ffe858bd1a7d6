//! Deterministic synthetic geometry: primitive solids, skull-like closed
//! surfaces, orbit floor patches and preformed-plate sheets.
//!
//! Everything here is a pure function of its arguments so fixtures can be
//! regenerated bit-for-bit.

use std::f64::consts::PI;

use crate::mesh::{LandmarkSet, Polyline, TriangleMesh};
use crate::plate::{EdgeCurveName, PlateModel};
use crate::{Point3, Vector3};

pub fn unit_cube() -> TriangleMesh {
    let v = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let t = vec![
        [0, 2, 3], [0, 3, 1], // z = 0
        [4, 5, 7], [4, 7, 6], // z = 1
        [0, 1, 5], [0, 5, 4], // y = 0
        [2, 6, 7], [2, 7, 3], // y = 1
        [0, 4, 6], [0, 6, 2], // x = 0
        [1, 3, 7], [1, 7, 5], // x = 1
    ];
    TriangleMesh::new(v, t).expect("cube")
}

/// Tetrahedron on four points, wound so that its normals face outward.
pub fn tetrahedron(p: [Point3; 4]) -> TriangleMesh {
    let mut faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    let vol = (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0]));
    if vol < 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    TriangleMesh::new(p.to_vec(), faces).expect("tetrahedron")
}

/// Closed latitude/longitude surface around `center` with poles on ±y and
/// radius given per unit direction.
///
/// Longitudes are symmetric under `x → −x` and quad diagonals are chosen
/// per side, so a symmetric `radius` yields a triangulation that is itself
/// mirror-symmetric about the plane `x = center.x`. `n_lon` must be a
/// multiple of 4.
pub fn uv_surface(center: Point3, n_lon: usize, n_lat: usize, radius: impl Fn(&Vector3) -> f64) -> TriangleMesh {
    assert!(n_lon >= 4 && n_lon % 4 == 0, "n_lon must be a positive multiple of 4");
    assert!(n_lat >= 2);
    let mut vertices = Vec::with_capacity(n_lon * (n_lat - 1) + 2);
    let dir_at = |theta: f64, phi: f64| Vector3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
    let north = Vector3::y();
    vertices.push(center + north * radius(&north));
    for j in 1..n_lat {
        let theta = PI * j as f64 / n_lat as f64;
        for k in 0..n_lon {
            let phi = 2.0 * PI * k as f64 / n_lon as f64;
            let mut d = dir_at(theta, phi);
            // Make mirror partners exact: k and n_lon/2 - k share |x|.
            let partner = (n_lon / 2 + n_lon - k) % n_lon;
            if partner < k {
                let pphi = 2.0 * PI * partner as f64 / n_lon as f64;
                let pd = dir_at(theta, pphi);
                d = Vector3::new(-pd.x, pd.y, pd.z);
            } else if partner == k {
                d.x = 0.0;
            }
            vertices.push(center + d * radius(&d));
        }
    }
    let south = -Vector3::y();
    vertices.push(center + south * radius(&south));
    let south_id = vertices.len() - 1;

    let ring = |j: usize, k: usize| 1 + (j - 1) * n_lon + (k % n_lon);
    let mut triangles = Vec::with_capacity(2 * n_lon * (n_lat - 1));
    for k in 0..n_lon {
        triangles.push([0, ring(1, k + 1), ring(1, k)]);
    }
    for j in 1..n_lat - 1 {
        for k in 0..n_lon {
            let (a, b, c, d) = (ring(j, k), ring(j, k + 1), ring(j + 1, k + 1), ring(j + 1, k));
            let center_phi = 2.0 * PI * (k as f64 + 0.5) / n_lon as f64;
            if center_phi.cos() > 0.0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    for k in 0..n_lon {
        triangles.push([south_id, ring(n_lat - 1, k), ring(n_lat - 1, k + 1)]);
    }
    TriangleMesh::new(vertices, triangles).expect("uv surface")
}

pub fn uv_sphere(center: Point3, radius: f64, n_lon: usize, n_lat: usize) -> TriangleMesh {
    uv_surface(center, n_lon, n_lat, |_| radius)
}

fn bump(d: &Vector3, axis: Vector3, width: f64) -> f64 {
    let c = d.dot(&axis.normalize());
    ((c - 1.0) / (width * width)).exp()
}

/// Closed, deliberately asymmetric skull-like surface (~2k vertices for the
/// default resolution 64×32). Used where registration must be well posed.
pub fn hemiskull(n_lon: usize, n_lat: usize) -> TriangleMesh {
    uv_surface(Point3::new(0.0, 0.0, 0.0), n_lon, n_lat, |d| {
        let ellipsoid = 1.0 / ((d.x / 70.0).powi(2) + (d.y / 85.0).powi(2) + (d.z / 60.0).powi(2)).sqrt();
        ellipsoid
            - 14.0 * bump(d, Vector3::new(0.45, 0.25, 0.85), 0.35)
            + 9.0 * bump(d, Vector3::new(-0.7, -0.4, 0.3), 0.4)
            + 6.0 * bump(d, Vector3::new(0.2, -0.9, -0.3), 0.3)
            - 5.0 * bump(d, Vector3::new(-0.3, 0.6, -0.7), 0.45)
    })
}

/// Closed skull-like surface symmetric about the plane `x = 0`, with two
/// orbit-like depressions at `x = ±30`.
pub fn symmetric_skull(n_lon: usize, n_lat: usize) -> TriangleMesh {
    uv_surface(Point3::origin(), n_lon, n_lat, |d| {
        let m = Vector3::new(d.x.abs(), d.y, d.z);
        let ellipsoid = 1.0 / ((m.x / 70.0).powi(2) + (m.y / 85.0).powi(2) + (m.z / 60.0).powi(2)).sqrt();
        ellipsoid - 12.0 * bump(&m, Vector3::new(0.45, 0.2, 0.87), 0.3)
            + 7.0 * bump(&m, Vector3::new(0.8, -0.5, 0.2), 0.4)
            + 4.0 * bump(&m, Vector3::new(0.1, 0.9, 0.3), 0.35)
    })
}

/// Moves every vertex by `offset(p, n)` (given position and vertex normal).
pub fn displace(mesh: &TriangleMesh, offset: impl Fn(&Point3, &Vector3) -> Vector3) -> TriangleMesh {
    let v = mesh
        .vertices()
        .iter()
        .zip(mesh.vertex_normals())
        .map(|(p, n)| p + offset(p, n))
        .collect();
    mesh.with_vertices(v).expect("same vertex count")
}

/// Smooth outward displacement of up to `amplitude` mm on the `x > 0` side,
/// ramping in over `ramp` mm from the midsagittal plane.
pub fn inflate_positive_side(mesh: &TriangleMesh, amplitude: f64, ramp: f64) -> TriangleMesh {
    displace(mesh, |p, n| {
        let s = (p.x / ramp).clamp(0.0, 1.0);
        let w = s * s * (3.0 - 2.0 * s);
        n * (amplitude * w)
    })
}

/// Smooth localized outward bump of `amplitude` mm centred at `center`.
pub fn local_warp(mesh: &TriangleMesh, center: Point3, amplitude: f64, sigma: f64) -> TriangleMesh {
    displace(mesh, |p, n| n * (amplitude * (-(p - center).norm_squared() / (2.0 * sigma * sigma)).exp()))
}

/// Height field `z = f(x, y)` on a regular grid, normals facing +z.
pub fn height_field(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
    f: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    let (vertices, triangles) = grid(x_range, y_range, nx, ny, &f, 0.0, 0);
    TriangleMesh::new(vertices, triangles).expect("height field")
}

fn grid(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
    f: &impl Fn(f64, f64) -> f64,
    dz: f64,
    base: usize,
) -> (Vec<Point3>, Vec<[usize; 3]>) {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / nx as f64;
            vertices.push(Point3::new(x, y, f(x, y) + dz));
        }
    }
    let id = |i: usize, j: usize| base + j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (vertices, triangles)
}

/// Flat square patch of side `w`×`h` centred on the origin at height `z`.
pub fn flat_patch(w: f64, h: f64, n: usize, z: f64) -> TriangleMesh {
    height_field((-w / 2.0, w / 2.0), (-h / 2.0, h / 2.0), n, n, |_, _| z)
}

/// Watertight slab whose top face is the height field `f` and whose bottom
/// is `thickness` mm below it. Outward normals.
pub fn height_slab(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
    f: impl Fn(f64, f64) -> f64,
    thickness: f64,
) -> TriangleMesh {
    let (mut vertices, mut triangles) = grid(x_range, y_range, nx, ny, &f, 0.0, 0);
    let base = vertices.len();
    let (bottom_v, bottom_t) = grid(x_range, y_range, nx, ny, &f, -thickness, base);
    vertices.extend(bottom_v);
    triangles.extend(bottom_t.into_iter().map(|[a, b, c]| [a, c, b]));

    let top = |i: usize, j: usize| j * (nx + 1) + i;
    let bot = |i: usize, j: usize| base + j * (nx + 1) + i;
    // Walk the boundary counter-clockwise seen from +z.
    let mut ring = Vec::new();
    ring.extend((0..nx).map(|i| (i, 0)));
    ring.extend((0..ny).map(|j| (nx, j)));
    ring.extend((0..nx).map(|i| (nx - i, ny)));
    ring.extend((0..ny).map(|j| (0, ny - j)));
    for k in 0..ring.len() {
        let (i0, j0) = ring[k];
        let (i1, j1) = ring[(k + 1) % ring.len()];
        triangles.push([top(i0, j0), bot(i0, j0), bot(i1, j1)]);
        triangles.push([top(i0, j0), bot(i1, j1), top(i1, j1)]);
    }
    TriangleMesh::new(vertices, triangles).expect("slab")
}

/// Shape of a synthetic preformed plate in its own frame: a sheet over the
/// footprint `[-half_width, half_width] × [0, depth]` whose height is
/// `floor_curvature·(x² + (y − depth/2)²) + rim_lift·s(y)` where `s` ramps
/// up toward the anterior edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateShape {
    pub half_width: f64,
    pub depth: f64,
    pub floor_curvature: f64,
    pub rim_lift: f64,
    /// Upward curl along the lateral (+x) margin.
    pub lateral_curl: f64,
}

impl PlateShape {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let c = self.depth / 2.0;
        let rim = (y / self.depth).clamp(0.0, 1.0).powi(3);
        let lat = ((x - 0.6 * self.half_width) / (0.4 * self.half_width)).clamp(0.0, 1.0).powi(2);
        self.floor_curvature * (x * x + (y - c) * (y - c)) + self.rim_lift * rim + self.lateral_curl * lat
    }

    fn on_surface(&self, x: f64, y: f64) -> Point3 {
        Point3::new(x, y, self.height(x, y))
    }

    pub fn mesh(&self, nx: usize, ny: usize) -> TriangleMesh {
        height_field((-self.half_width, self.half_width), (0.0, self.depth), nx, ny, |x, y| self.height(x, y))
    }

    /// Curve through `(x, y)` waypoints, densified and lifted onto the sheet.
    pub fn curve(&self, name: &str, waypoints: &[(f64, f64)], per_segment: usize) -> Polyline {
        let mut pts = Vec::new();
        for w in waypoints.windows(2) {
            for s in 0..per_segment {
                let t = s as f64 / per_segment as f64;
                pts.push(self.on_surface(w[0].0 + (w[1].0 - w[0].0) * t, w[0].1 + (w[1].1 - w[0].1) * t));
            }
        }
        let last = waypoints[waypoints.len() - 1];
        pts.push(self.on_surface(last.0, last.1));
        Polyline::new(name, pts).expect("curve")
    }

    /// Default positions of the five edge curves, inset `inset` mm from the margins.
    pub fn edge_curves(&self, inset: f64) -> Vec<Polyline> {
        let (w, d) = (self.half_width - inset, self.depth - inset);
        let y0 = inset;
        vec![
            self.curve(EdgeCurveName::AnteriorFloor.as_str(), &[(-w, d), (w, d)], 12),
            self.curve(EdgeCurveName::AnteriorMedialWall.as_str(), &[(-w, d), (-w, 0.6 * d)], 12),
            self.curve(EdgeCurveName::LateralFloor.as_str(), &[(w, y0 + 2.0), (w, d)], 12),
            self.curve(EdgeCurveName::SuperiorMedialWall.as_str(), &[(-w, 0.55 * d), (-w, y0 + 2.0)], 12),
            self.curve(EdgeCurveName::FloorWallJunction.as_str(), &[(-0.5 * w, y0), (-0.5 * w, d)], 12),
        ]
    }

    /// Stop point at the posterior edge midline plus three rim landmarks.
    pub fn landmarks(&self) -> LandmarkSet {
        let (w, d) = (self.half_width, self.depth);
        LandmarkSet::from_pairs([
            ("stop", self.on_surface(0.0, 0.0)),
            ("anterior_lateral", self.on_surface(0.8 * w, 0.9 * d)),
            ("anterior_medial", self.on_surface(-0.8 * w, 0.9 * d)),
            ("mid_lateral", self.on_surface(0.9 * w, 0.4 * d)),
        ])
        .expect("unique labels")
    }

    pub fn plate_model(&self, id: &str, vendor: &str, size_class: &str, resolution: (usize, usize)) -> PlateModel {
        PlateModel::new(
            id,
            self.mesh(resolution.0, resolution.1),
            "stop",
            self.landmarks(),
            self.edge_curves(0.5),
            vendor,
            size_class,
        )
        .expect("synthetic plate is valid")
    }
}

/// Orbit floor used by the synthetic case: a shallow bowl, rising toward
/// the anterior rim (+y) and the lateral wall (+x).
pub fn orbit_floor_height(x: f64, y: f64) -> f64 {
    0.012 * x * x + 0.008 * (y - 10.0) * (y - 10.0) + 0.04 * (y / 30.0).clamp(0.0, 1.0).powi(3) * 30.0
}

/// Open orbit floor surface (normals up, into the cavity).
pub fn orbit_floor(nx: usize, ny: usize) -> TriangleMesh {
    height_field((-25.0, 25.0), (-10.0, 35.0), nx, ny, orbit_floor_height)
}

/// Closed bone slab under the orbit floor.
pub fn orbit_bone(nx: usize, ny: usize) -> TriangleMesh {
    height_slab((-25.0, 25.0), (-10.0, 35.0), nx, ny, orbit_floor_height, 4.0)
}

/// The three plates of the bundled sample case.
pub fn sample_plates() -> Vec<PlateModel> {
    let a_small = PlateShape { half_width: 11.0, depth: 22.0, floor_curvature: 0.010, rim_lift: 0.8, lateral_curl: 0.0 };
    let b_small = PlateShape { half_width: 11.0, depth: 22.0, floor_curvature: 0.018, rim_lift: 2.2, lateral_curl: 0.6 };
    let a_large = PlateShape { half_width: 14.0, depth: 27.0, floor_curvature: 0.008, rim_lift: 1.0, lateral_curl: 0.0 };
    vec![
        a_small.plate_model("vendorA-small", "Vendor A", "small", (22, 22)),
        b_small.plate_model("vendorB-small", "Vendor B", "small", (22, 22)),
        a_large.plate_model("vendorA-large", "Vendor A", "large", (28, 27)),
    ]
}

/// Orbit landmarks matching [`PlateShape::landmarks`] labels for a plate
/// footprint resting on the synthetic floor with its stop at `stop_xy`.
pub fn sample_orbit_landmarks() -> LandmarkSet {
    let on = |x: f64, y: f64| Point3::new(x, y, orbit_floor_height(x, y));
    LandmarkSet::from_pairs([
        ("stop", on(0.0, 0.0)),
        ("anterior_lateral", on(9.6, 20.0) + Vector3::new(0.0, 0.0, 0.8)),
        ("anterior_medial", on(-9.6, 20.0) + Vector3::new(0.0, 0.0, 0.8)),
        ("mid_lateral", on(10.0, 9.0) + Vector3::new(0.0, 0.0, 0.3)),
        ("up", on(0.0, 10.0) + Vector3::new(0.0, 0.0, 15.0)),
    ])
    .expect("unique labels")
}
