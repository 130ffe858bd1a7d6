//! Open polylines and arc-length resampling.

use serde::{Deserialize, Serialize};

use crate::{Error, Point3, Result};

/// Minimum separation between consecutive points.
pub const MIN_SEGMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolylineRecord")]
pub struct Polyline {
    name: String,
    points: Vec<Point3>,
}

#[derive(Deserialize)]
struct PolylineRecord {
    name: String,
    points: Vec<Point3>,
}

impl TryFrom<PolylineRecord> for Polyline {
    type Error = Error;

    fn try_from(r: PolylineRecord) -> Result<Self> {
        Polyline::new(r.name, r.points)
    }
}

impl Polyline {
    pub fn new(name: impl Into<String>, points: Vec<Point3>) -> Result<Self> {
        let name = name.into();
        if points.len() < 2 {
            return Err(Error::invalid(format!("polyline '{name}' needs at least 2 points")));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("polyline '{name}' point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| (w[1] - w[0]).norm() <= MIN_SEGMENT) {
            return Err(Error::invalid(format!(
                "polyline '{name}' points {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Self { name, points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// `n` points at equal arc-length spacing, starting and ending on the
/// curve's endpoints.
pub fn resample_polyline(curve: &Polyline, n: usize) -> Result<Polyline> {
    if n < 2 {
        return Err(Error::invalid(format!("cannot resample to {n} points; need at least 2")));
    }
    let pts = curve.points();
    let mut cumulative = Vec::with_capacity(pts.len());
    cumulative.push(0.0);
    for w in pts.windows(2) {
        let last = *cumulative.last().expect("non-empty");
        cumulative.push(last + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().expect("non-empty");

    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0;
    for i in 1..n - 1 {
        let s = total * i as f64 / (n - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let t = ((s - cumulative[seg]) / span).clamp(0.0, 1.0);
        out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * t);
    }
    out.push(*pts.last().expect("non-empty"));
    Polyline::new(curve.name.clone(), out)
}
