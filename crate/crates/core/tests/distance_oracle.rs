//! Closest-point and signed-distance queries against exhaustive scans.
//!
//! The oracle here does not share code with the index: it projects onto the
//! triangle plane, solves the 2×2 barycentric system and falls back to the
//! three clamped edge segments. Signs come from ray casting.

use orbitfit_core::plate::plate_wide_distances;
use orbitfit_core::{synthetic, Point3, SpatialIndex, TriangleMesh, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn closest_on_segment(p: &Point3, a: &Point3, b: &Point3) -> Point3 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}

fn closest_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let (e0, e1) = (b - a, c - a);
    let n = e0.cross(&e1);
    let q = p - n * ((p - a).dot(&n) / n.norm_squared());
    let (d00, d01, d11) = (e0.dot(&e0), e0.dot(&e1), e1.dot(&e1));
    let w = q - a;
    let (d20, d21) = (w.dot(&e0), w.dot(&e1));
    let det = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / det;
    let u = (d00 * d21 - d01 * d20) / det;
    if v >= 0.0 && u >= 0.0 && u + v <= 1.0 {
        return q;
    }
    [closest_on_segment(p, a, b), closest_on_segment(p, b, c), closest_on_segment(p, c, a)]
        .into_iter()
        .min_by(|x, y| (x - p).norm().total_cmp(&(y - p).norm()))
        .unwrap()
}

fn brute_distance(mesh: &TriangleMesh, p: &Point3) -> f64 {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            (closest_on_triangle(p, &a, &b, &c) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Möller–Trumbore; returns the ray parameter of the hit.
fn ray_hit(o: &Point3, d: &Vector3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let (e1, e2) = (b - a, c - a);
    let h = d.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let s = o - a;
    let u = s.dot(&h) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    if !(0.0..=1.0).contains(&u) || v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) / det;
    (t > 0.0).then_some(t)
}

fn inside_by_parity(mesh: &TriangleMesh, p: &Point3) -> bool {
    let dir = Vector3::new(0.5773, 0.6123, 0.5402).normalize();
    let hits = (0..mesh.triangle_count())
        .filter(|&t| {
            let [a, b, c] = mesh.triangle_points(t);
            ray_hit(p, &dir, &a, &b, &c).is_some()
        })
        .count();
    hits % 2 == 1
}

/// Height of a height-field mesh under `(x, y)`, by casting a vertical ray.
fn surface_z(mesh: &TriangleMesh, x: f64, y: f64) -> f64 {
    let o = Point3::new(x, y, -1e3);
    (0..mesh.triangle_count())
        .find_map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            ray_hit(&o, &Vector3::z(), &a, &b, &c)
        })
        .map(|t| o.z + t)
        .expect("query inside footprint")
}

#[test]
fn closest_point_matches_exhaustive_scan_on_orbit() {
    let orbit = synthetic::orbit_floor(40, 40);
    assert!(orbit.triangle_count() <= 5000);
    let index = SpatialIndex::build(orbit.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let q = Point3::new(rng.random_range(-35.0..35.0), rng.random_range(-20.0..45.0), rng.random_range(-10.0..20.0));
        let got = index.closest_point(&q);
        let want = brute_distance(&orbit, &q);
        assert!((got.distance - want).abs() < TOL, "{q:?}: {} vs {want}", got.distance);
        assert!(((got.point - q).norm() - got.distance).abs() < TOL);
        let exhaustive = index.closest_point_exhaustive(&q);
        assert_eq!(got.triangle_id, exhaustive.triangle_id);
    }
}

#[test]
fn plate_wide_distances_match_oracle_sign_and_magnitude() {
    let orbit = synthetic::orbit_floor(40, 40);
    let index = SpatialIndex::build(orbit.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut queries = Vec::new();
    while queries.len() < 1000 {
        let (x, y) = (rng.random_range(-20.0..20.0), rng.random_range(-5.0..30.0));
        let q = Point3::new(x, y, synthetic::orbit_floor_height(x, y) + rng.random_range(-4.0..4.0));
        let margin = (x + 25.0).min(25.0 - x).min(y + 10.0).min(35.0 - y);
        let d = brute_distance(&orbit, &q);
        if d < margin && d > 1e-6 {
            queries.push((q, d));
        }
    }
    let pts: Vec<Point3> = queries.iter().map(|(q, _)| *q).collect();
    let got = plate_wide_distances(&pts, &index);
    for ((q, d), s) in queries.iter().zip(&got) {
        let above = q.z > surface_z(&orbit, q.x, q.y);
        let want = if above { *d } else { -*d };
        assert!((s - want).abs() < TOL, "{q:?}: {s} vs {want}");
    }
}

#[test]
fn signed_distance_sign_matches_parity_on_closed_skull() {
    let skull = synthetic::hemiskull(32, 16);
    let index = SpatialIndex::build(skull.clone()).unwrap();
    let (lo, hi) = skull.bounds().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 300 {
        let q = Point3::new(
            rng.random_range(lo.x - 5.0..hi.x + 5.0),
            rng.random_range(lo.y - 5.0..hi.y + 5.0),
            rng.random_range(lo.z - 5.0..hi.z + 5.0),
        );
        let r = index.closest_point(&q);
        if r.distance < 1e-3 {
            continue;
        }
        assert_eq!(r.signed_distance < 0.0, inside_by_parity(&skull, &q), "{q:?}");
        assert!((r.distance - brute_distance(&skull, &q)).abs() < TOL);
        checked += 1;
    }
}

fn soup() -> impl Strategy<Value = TriangleMesh> {
    let coord = -10.0..10.0f64;
    prop::collection::vec([coord.clone(), coord.clone(), coord], 3..40).prop_filter_map("degenerate", |pts| {
        let vertices: Vec<Point3> = pts.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect();
        let triangles = (0..vertices.len() / 3).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
        TriangleMesh::new(vertices, triangles).ok().filter(|m| !m.is_empty())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_soup_queries_match_brute_force(mesh in soup(), q in [-15.0..15.0f64, -15.0..15.0f64, -15.0..15.0f64]) {
        let q = Point3::new(q[0], q[1], q[2]);
        let index = SpatialIndex::build(mesh.clone()).unwrap();
        let got = index.closest_point(&q);
        prop_assert!((got.distance - brute_distance(&mesh, &q)).abs() < TOL);
    }
}
