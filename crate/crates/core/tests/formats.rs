//! Mesh, landmark and transform files written then read back.

use orbitfit_core::mesh::io::{save_ply, save_stl_ascii, save_stl_binary};
use orbitfit_core::mesh::{load_landmarks, load_mesh, save_landmarks, LandmarkFormat, Transform};
use orbitfit_core::registration::{ReconstructionMethod, TransformRecord};
use orbitfit_core::{synthetic, Error, Point3, RigidTransform, Vector3};

#[test]
fn ply_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let m = synthetic::orbit_floor(20, 20).transformed(&RigidTransform::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.3).unwrap());
    let p = dir.path().join("m.ply");
    save_ply(&m, &p).unwrap();
    let back = load_mesh(&p, None).unwrap();
    assert_eq!(back.vertices(), m.vertices());
    assert_eq!(back.triangles(), m.triangles());
}

#[test]
fn stl_encodings_agree_and_weld_to_the_same_topology() {
    let dir = tempfile::tempdir().unwrap();
    let m = synthetic::hemiskull(32, 16);
    let (a, b) = (dir.path().join("a.stl"), dir.path().join("b.stl"));
    save_stl_binary(&m, &a).unwrap();
    save_stl_ascii(&m, &b).unwrap();
    let (ma, mb) = (load_mesh(&a, None).unwrap(), load_mesh(&b, None).unwrap());
    assert_eq!(ma.vertices(), mb.vertices());
    assert_eq!(ma.triangles(), mb.triangles());
    assert_eq!(ma.vertex_count(), m.vertex_count());
    assert!(ma.is_watertight());
    // Welding renumbers vertices in first-use order; positions survive in f32.
    for p in ma.vertices() {
        let near = m.vertices().iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
        assert!(near < 1e-4, "{p:?}");
    }
}

#[test]
fn garbage_reports_a_parse_error_and_empty_mesh_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ply");
    std::fs::write(&p, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 nope\n").unwrap();
    assert!(matches!(load_mesh(&p, None), Err(Error::Parse { .. })));
    let e = dir.path().join("empty.stl");
    std::fs::write(&e, "solid x\nendsolid x\n").unwrap();
    assert!(matches!(load_mesh(&e, None), Err(Error::InvalidInput(_))));
    assert!(matches!(load_mesh(dir.path().join("missing.stl"), None), Err(Error::Io { .. })));
}

#[test]
fn landmarks_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let set = synthetic::sample_orbit_landmarks();
    for (name, fmt) in [("l.fcsv", LandmarkFormat::Fcsv), ("l.mrk.json", LandmarkFormat::MarkupsJson)] {
        let p = dir.path().join(name);
        save_landmarks(&set, &p, fmt).unwrap();
        assert_eq!(load_landmarks(&p, None).unwrap(), set);
    }
}

#[test]
fn transform_record_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = RigidTransform::from_axis_angle(&Vector3::new(0.0, 1.0, 0.2), 0.7)
        .unwrap()
        .then(&RigidTransform::from_translation(Vector3::new(1.0, -2.0, 3.5)));
    let rec = TransformRecord { name: "m".into(), method: ReconstructionMethod::Rigid, matrix: t.to_rows(), deformation_file: None };
    let p = dir.path().join("t.json");
    rec.save(&p).unwrap();
    let back = TransformRecord::load(&p).unwrap();
    assert_eq!(back, rec);
    let q = Point3::new(3.0, 4.0, 5.0);
    assert_eq!(back.transform().unwrap().apply_point(&q), t.apply_point(&q));
}
