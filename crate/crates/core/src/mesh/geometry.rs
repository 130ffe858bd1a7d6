//! Low-level triangle geometry.

use crate::{Point3, Vector3};

/// Closest point on triangle `abc` to `p`, with barycentric weights `(wa, wb, wc)`.
///
/// Region classification after Ericson, *Real-Time Collision Detection* 5.1.5.
/// The weights are exact for vertex and edge regions (one or two of them are
/// zero) and sum to one within rounding for the face region.
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> (Point3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Unnormalized face normal (twice the area vector), following right-hand winding.
#[inline]
pub fn face_cross(a: &Point3, b: &Point3, c: &Point3) -> Vector3 {
    (b - a).cross(&(c - a))
}

#[inline]
pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * face_cross(a, b, c).norm()
}

/// Angle at `corner` between the edges towards `u` and `v`.
pub(crate) fn corner_angle(corner: &Point3, u: &Point3, v: &Point3) -> f64 {
    let e1 = u - corner;
    let e2 = v - corner;
    // atan2 stays accurate for angles near 0 and pi.
    e1.cross(&e2).norm().atan2(e1.dot(&e2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> (Point3, Point3, Point3) {
        (
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
        )
    }

    #[test]
    fn interior_projection() {
        let (a, b, c) = tri();
        let (q, w) = closest_point_on_triangle(&Point3::new(0.5, 0.5, 3.0), &a, &b, &c);
        assert!((q - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w[1] - 0.25).abs() < 1e-12 && (w[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn vertex_and_edge_regions() {
        let (a, b, c) = tri();
        let (q, w) = closest_point_on_triangle(&Point3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(q, a);
        assert_eq!(w, [1.0, 0.0, 0.0]);
        let (q, w) = closest_point_on_triangle(&Point3::new(1.0, -3.0, 1.0), &a, &b, &c);
        assert!((q - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(w[2], 0.0);
        let (q, _) = closest_point_on_triangle(&Point3::new(2.0, 2.0, 0.0), &a, &b, &c);
        assert!((q - Point3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn corner_angles_sum_to_pi() {
        let (a, b, c) = tri();
        let s = corner_angle(&a, &b, &c) + corner_angle(&b, &c, &a) + corner_angle(&c, &a, &b);
        assert!((s - std::f64::consts::PI).abs() < 1e-12);
    }
}
