//! Closed-form least-squares fits between corresponding point sets.

use nalgebra::SymmetricEigen;

use crate::mesh::LandmarkSet;
use crate::{AffineTransform, Error, Matrix3, Point3, Result, RigidTransform, Vector3};

/// Relative eigenvalue floor below which a point cloud counts as flat.
const SPREAD_RATIO: f64 = 1e-12;

fn centroid(points: &[Point3]) -> Vector3 {
    points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / points.len() as f64
}

fn scatter(points: &[Point3], c: &Vector3) -> Matrix3 {
    points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - c;
        acc + d * d.transpose()
    })
}

/// Sorted (descending) eigenvalues of the point scatter matrix.
fn spread(points: &[Point3], c: &Vector3) -> [f64; 3] {
    let eig = SymmetricEigen::new(scatter(points, c)).eigenvalues;
    let mut v = [eig[0], eig[1], eig[2]];
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn check_pairs(src: &[Point3], dst: &[Point3], required: usize) -> Result<()> {
    if src.len() != dst.len() {
        return Err(Error::invalid(format!(
            "{} source points but {} target points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < required {
        return Err(Error::InsufficientLandmarks {
            found: src.len(),
            required,
        });
    }
    Ok(())
}

/// Rigid transform minimizing `Σ‖R·sᵢ + t − dᵢ‖²` (Kabsch). Reflections are
/// excluded by flipping the smallest singular direction when needed.
pub fn fit_rigid(src: &[Point3], dst: &[Point3]) -> Result<RigidTransform> {
    check_pairs(src, dst, 3)?;
    let cs = centroid(src);
    let cd = centroid(dst);
    for (name, pts, c) in [("source", src, &cs), ("target", dst, &cd)] {
        let s = spread(pts, c);
        if s[1] <= SPREAD_RATIO * s[0].max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateConfiguration(format!("{name} points are collinear or coincident")));
        }
    }
    let h = src.iter().zip(dst).fold(Matrix3::zeros(), |acc, (s, d)| {
        acc + (s.coords - cs) * (d.coords - cd).transpose()
    });
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateConfiguration("SVD did not converge".into())),
    };
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // nalgebra orders singular values descending; the last is the smallest.
        d[(2, 2)] = -1.0;
    }
    let r = v * d * u.transpose();
    Ok(RigidTransform::from_parts_unchecked(r, cd - r * cs))
}

/// Unconstrained affine map minimizing `Σ‖L·sᵢ + t − dᵢ‖²`.
pub fn fit_affine(src: &[Point3], dst: &[Point3]) -> Result<AffineTransform> {
    check_pairs(src, dst, 4)?;
    let cs = centroid(src);
    let cd = centroid(dst);
    let sp = scatter(src, &cs);
    let eig = SymmetricEigen::new(sp).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 1e-10 * hi.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateConfiguration(
            "source points are coplanar; affine least squares is singular".into(),
        ));
    }
    let cross = src.iter().zip(dst).fold(Matrix3::zeros(), |acc, (s, d)| {
        acc + (d.coords - cd) * (s.coords - cs).transpose()
    });
    let inv = sp
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfiguration("singular normal equations".into()))?;
    let l = cross * inv;
    let det = l.determinant();
    if det <= 0.0 {
        return Err(Error::ReflectionCollapse { det });
    }
    AffineTransform::new(l, cd - l * cs)
}

/// Rigid alignment of `source` onto `target` using label-matched landmarks.
pub fn landmark_rigid_align(source: &LandmarkSet, target: &LandmarkSet) -> Result<RigidTransform> {
    let pairs = source.matched_with(target);
    if pairs.len() < 3 {
        return Err(Error::InsufficientLandmarks {
            found: pairs.len(),
            required: 3,
        });
    }
    let src: Vec<Point3> = pairs.iter().map(|p| p.1).collect();
    let dst: Vec<Point3> = pairs.iter().map(|p| p.2).collect();
    fit_rigid(&src, &dst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Transform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::FRAC_PI_2;

    fn set(points: &[(&str, Point3)]) -> LandmarkSet {
        LandmarkSet::from_pairs(points.iter().map(|(l, p)| (*l, *p))).unwrap()
    }

    #[test]
    fn identical_sets_give_identity() {
        let s = set(&[
            ("a", Point3::new(1.0, 2.0, 3.0)),
            ("b", Point3::new(-4.0, 0.5, 2.0)),
            ("c", Point3::new(0.3, -7.0, 1.0)),
            ("d", Point3::new(2.0, 2.0, -5.0)),
        ]);
        let t = landmark_rigid_align(&s, &s).unwrap();
        assert!((t.rotation() - Matrix3::identity()).amax() < 1e-12);
        assert!(t.translation_vector().amax() < 1e-12);
    }

    #[test]
    fn recovers_quarter_turn_and_shift() {
        let src = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let truth = RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2)
            .unwrap()
            .then(&RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0)));
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply_point(p)).collect();
        let s = set(&[("a", src[0]), ("b", src[1]), ("c", src[2])]);
        // Target listed in a different order: correspondence is by label.
        let t = set(&[("c", dst[2]), ("a", dst[0]), ("b", dst[1])]);
        let fit = landmark_rigid_align(&s, &t).unwrap();
        for (p, q) in src.iter().zip(&dst) {
            assert!((fit.apply_point(p) - q).norm() < 1e-9);
        }
    }

    #[test]
    fn noisy_landmarks_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.1).unwrap();
        for _ in 0..50 {
            let src: Vec<Point3> = (0..6)
                .map(|_| Point3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)))
                .collect();
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let truth = RigidTransform::from_axis_angle(&axis, rng.random_range(-1.0..1.0))
                .unwrap()
                .then(&RigidTransform::from_translation(Vector3::new(5.0, -3.0, 12.0)));
            let dst: Vec<Point3> = src
                .iter()
                .map(|p| truth.apply_point(p) + Vector3::from_fn(|_, _| noise.sample(&mut rng)))
                .collect();
            let fit = fit_rigid(&src, &dst).unwrap();
            let err = fit.then(&truth.inverse());
            assert!(err.rotation_angle().to_degrees() < 1.0);
            // Translation error measured at the landmark centroid, where it is not coupled to rotation error.
            let c = Point3::from(centroid(&src));
            assert!((fit.apply_point(&c) - truth.apply_point(&c)).norm() < 0.2);
        }
    }

    #[test]
    fn mirrored_target_still_proper_rotation() {
        let src = [
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
            Point3::new(0.0, 0.0, 3.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let dst: Vec<Point3> = src.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        assert!((fit.rotation().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_and_collinear_rejected() {
        let a = set(&[("a", Point3::origin()), ("b", Point3::new(1.0, 0.0, 0.0))]);
        assert!(matches!(landmark_rigid_align(&a, &a), Err(Error::InsufficientLandmarks { found: 2, .. })));
        let line = set(&[
            ("a", Point3::origin()),
            ("b", Point3::new(1.0, 1.0, 1.0)),
            ("c", Point3::new(2.0, 2.0, 2.0)),
        ]);
        assert!(matches!(landmark_rigid_align(&line, &line), Err(Error::DegenerateConfiguration(_))));
    }

    #[test]
    fn affine_recovers_shear() {
        let l = Matrix3::new(1.1, 0.2, 0.0, 0.0, 0.9, 0.1, 0.05, 0.0, 1.2);
        let truth = AffineTransform::new(l, Vector3::new(1.0, -2.0, 0.5)).unwrap();
        let src: Vec<Point3> = (0..20)
            .map(|i| Point3::new((i as f64 * 1.3).sin() * 10.0, (i as f64 * 0.7).cos() * 8.0, i as f64 * 0.5))
            .collect();
        let dst = truth.apply_points(&src);
        let fit = fit_affine(&src, &dst).unwrap();
        assert!((fit.linear_part() - l).amax() < 1e-9);
    }

    #[test]
    fn affine_rejects_coplanar_and_reflection() {
        let flat: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(fit_affine(&flat, &flat), Err(Error::DegenerateConfiguration(_))));
        let src: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, (i * i % 7) as f64, (i % 3) as f64)).collect();
        let dst: Vec<Point3> = src.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
        assert!(matches!(fit_affine(&src, &dst), Err(Error::ReflectionCollapse { .. })));
    }
}
