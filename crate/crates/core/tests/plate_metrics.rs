//! Collision, edge-distance and heatmap contracts on constructed geometry
//! whose answers are known in closed form.

use orbitfit_core::mesh::Transform;
use orbitfit_core::plate::{
    compute_fit_report, detect_collisions, distance_color, generate_heatmap, EdgeCurveName, FitParams, HeatmapRange,
    PlateModel, HISTOGRAM_BIN_WIDTH,
};
use orbitfit_core::{synthetic, LandmarkSet, Point3, Polyline, RigidTransform, SpatialIndex, Vector3};

fn line(name: EdgeCurveName, a: (f64, f64), b: (f64, f64), z: f64) -> Polyline {
    let pts = (0..=7)
        .map(|k| {
            let t = k as f64 / 7.0;
            Point3::new(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t, z)
        })
        .collect();
    Polyline::new(name.as_str(), pts).unwrap()
}

fn flat_plate(z: f64) -> PlateModel {
    let curves = vec![
        line(EdgeCurveName::AnteriorFloor, (-9.0, 9.0), (9.0, 9.0), z),
        line(EdgeCurveName::AnteriorMedialWall, (-9.0, 9.0), (-9.0, 2.0), z),
        line(EdgeCurveName::LateralFloor, (9.0, -8.0), (9.0, 9.0), z),
        line(EdgeCurveName::SuperiorMedialWall, (-9.0, 1.0), (-9.0, -8.0), z),
        line(EdgeCurveName::FloorWallJunction, (-4.0, -9.0), (-4.0, 9.0), z),
    ];
    let landmarks = LandmarkSet::from_pairs([
        ("stop", Point3::new(0.0, -10.0, z)),
        ("a", Point3::new(8.0, 8.0, z)),
        ("b", Point3::new(-8.0, 8.0, z)),
    ])
    .unwrap();
    PlateModel::new("flat", synthetic::flat_patch(20.0, 20.0, 10, z), "stop", landmarks, curves, "test", "small").unwrap()
}

fn far_bone() -> SpatialIndex {
    SpatialIndex::build(synthetic::unit_cube().transformed(&RigidTransform::from_translation(Vector3::new(0.0, 0.0, -100.0))))
        .unwrap()
}

#[test]
fn flat_offset_gives_exact_edge_means() {
    let orbit = SpatialIndex::build(synthetic::flat_patch(60.0, 60.0, 6, 0.0)).unwrap();
    let plate = flat_plate(2.0);
    let r = compute_fit_report(&plate, &RigidTransform::identity(), &orbit, &far_bone(), &FitParams::default()).unwrap();
    assert_eq!(r.edge_reports.len(), 5);
    let all = r.all_edge_distances();
    assert_eq!(all.len(), 50);
    for e in &r.edge_reports {
        assert_eq!(e.point_distances.len(), 10);
        assert_eq!(format!("{:.6}", e.mean), "2.000000");
        for (d, (s, p)) in e.point_distances.iter().zip(e.sample_points.iter().zip(&e.projected_points)) {
            assert!((d - 2.0).abs() < 1e-12);
            assert!((p - Point3::new(s.x, s.y, 0.0)).norm() < 1e-12);
        }
    }
    let mean = all.iter().sum::<f64>() / 50.0;
    assert!((r.overall_edge_mean - mean).abs() < 1e-12);
    assert!(r.plate_wide.iter().all(|d| (d - 2.0).abs() < 1e-12));
    assert_eq!(r.collision.collision_count, 0);
}

#[test]
fn edge_means_follow_the_placement() {
    let orbit = SpatialIndex::build(synthetic::flat_patch(60.0, 60.0, 6, 0.0)).unwrap();
    let plate = flat_plate(2.0);
    let lift = RigidTransform::from_translation(Vector3::new(0.3, -0.2, 1.5));
    let r = compute_fit_report(&plate, &lift, &orbit, &far_bone(), &FitParams::default()).unwrap();
    for e in &r.edge_reports {
        assert!((e.mean - 3.5).abs() < 1e-12);
    }
}

/// 100×100 grid where the vertices selected by `inside` dip into a slab.
fn dented_grid(inside: impl Fn(usize, usize) -> bool) -> Vec<Point3> {
    let mut pts = Vec::with_capacity(10_000);
    for j in 0..100 {
        for i in 0..100 {
            let z = if inside(i, j) { -0.5 } else { 0.5 };
            pts.push(Point3::new(i as f64 - 49.5, j as f64 - 49.5, z));
        }
    }
    pts
}

#[test]
fn collision_report_matches_reference_format() {
    let bone = SpatialIndex::build(synthetic::height_slab((-60.0, 60.0), (-60.0, 60.0), 12, 12, |_, _| 0.0, 4.0)).unwrap();
    let pts = dented_grid(|i, j| j < 9 || (j == 9 && i < 88));
    let r = detect_collisions(&pts, &bone, 0.0);
    assert_eq!((r.collision_count, r.total_points), (988, 10_000));
    assert_eq!(r.percent_text(), "9.88");
    assert_eq!(r.message(), "There are 988 collision points. This is approximately 9.88 % of points in the plate.");
    let expected: Vec<usize> = (0..10_000).filter(|k| k / 100 < 9 || (k / 100 == 9 && k % 100 < 88)).collect();
    assert_eq!(r.collision_points, expected);
    // A tolerance deeper than the dent forgives it.
    assert_eq!(detect_collisions(&pts, &bone, 0.6).collision_count, 0);
}

#[test]
fn collisions_grow_with_penetration_depth() {
    let bone = SpatialIndex::build(synthetic::uv_sphere(Point3::origin(), 20.0, 64, 32)).unwrap();
    let grid = synthetic::flat_patch(30.0, 30.0, 40, 0.0);
    let mut prev = 0;
    let mut counts = Vec::new();
    for k in 1..=20 {
        let depth = 0.25 * k as f64;
        let placed = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 20.0 - depth)).apply_points(grid.vertices());
        let n = detect_collisions(&placed, &bone, 0.0).collision_count;
        assert!(n >= prev, "depth {depth}: {n} < {prev}");
        prev = n;
        counts.push(n);
    }
    assert!(counts[19] > counts[0]);
}

#[test]
fn heatmap_anchor_colours_and_histogram_totals() {
    let range = HeatmapRange::default();
    assert_eq!(distance_color(-5.0, &range), [255, 0, 0]);
    assert_eq!(distance_color(0.0, &range), [0, 255, 0]);
    assert_eq!(distance_color(5.0, &range), [0, 0, 255]);
    assert_eq!(distance_color(-9.0, &range), [255, 0, 0]);
    assert_eq!(distance_color(9.0, &range), [0, 0, 255]);
    assert!(HeatmapRange::new(1.0, 1.0).is_err());

    let mesh = synthetic::flat_patch(10.0, 10.0, 9, 0.0);
    let d: Vec<f64> = (0..mesh.vertex_count()).map(|i| -7.0 + 0.14 * i as f64).collect();
    let h = generate_heatmap(&mesh, &d, range).unwrap();
    assert_eq!(h.histogram.total(), mesh.vertex_count() as u64);
    assert_eq!(h.colors.len(), mesh.vertex_count());
    assert_eq!(HISTOGRAM_BIN_WIDTH, 0.25);
    let rows = h.histogram.to_csv().lines().count();
    assert_eq!(rows, 1 + 40 + 2);
}
