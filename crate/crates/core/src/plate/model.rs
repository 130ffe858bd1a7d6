use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::mesh::{LandmarkSet, Polyline, SpatialIndex, TriangleMesh};
use crate::{Error, Point3, Result};

/// Maximum distance (mm) between an edge-curve point and the plate surface.
pub const CURVE_SURFACE_TOLERANCE: f64 = 1.0;

/// The five plate edges along which edge-specific distances are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeCurveName {
    AnteriorFloor,
    AnteriorMedialWall,
    LateralFloor,
    SuperiorMedialWall,
    FloorWallJunction,
}

impl EdgeCurveName {
    /// Canonical order, used for storage, reports and exports.
    pub const ALL: [EdgeCurveName; 5] = [
        EdgeCurveName::AnteriorFloor,
        EdgeCurveName::AnteriorMedialWall,
        EdgeCurveName::LateralFloor,
        EdgeCurveName::SuperiorMedialWall,
        EdgeCurveName::FloorWallJunction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeCurveName::AnteriorFloor => "anterior_floor",
            EdgeCurveName::AnteriorMedialWall => "anterior_medial_wall",
            EdgeCurveName::LateralFloor => "lateral_floor",
            EdgeCurveName::SuperiorMedialWall => "superior_medial_wall",
            EdgeCurveName::FloorWallJunction => "floor_wall_junction",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for EdgeCurveName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeCurveName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeCurveName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown edge curve '{s}'")))
    }
}

impl Serialize for EdgeCurveName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EdgeCurveName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A preformed plate: mesh, posterior-stop point, registration landmarks
/// and the five edge curves, all in the plate's own frame.
#[derive(Debug, Clone)]
pub struct PlateModel {
    id: String,
    index: Arc<SpatialIndex>,
    stop_label: String,
    stop_point: Point3,
    landmarks: LandmarkSet,
    curves: Vec<Polyline>,
    vendor: String,
    size_class: String,
    curve_history: Vec<Polyline>,
}

impl PlateModel {
    /// Validates and assembles a plate. `curves` may come in any order but
    /// must hold each canonical name exactly once.
    pub fn new(
        id: &str,
        mesh: TriangleMesh,
        stop_label: &str,
        landmarks: LandmarkSet,
        curves: Vec<Polyline>,
        vendor: &str,
        size_class: &str,
    ) -> Result<Self> {
        let bad = |message: String| Error::InvalidPlate {
            plate: id.to_string(),
            message,
        };
        if id.is_empty() {
            return Err(Error::invalid("plate id must not be empty"));
        }
        let stop_point = *landmarks
            .get(stop_label)
            .ok_or_else(|| bad(format!("stop point label '{stop_label}' not among landmarks")))?;
        let index = Arc::new(SpatialIndex::build(mesh).map_err(|e| bad(e.to_string()))?);

        let mut slots: Vec<Option<Polyline>> = vec![None; 5];
        for c in curves {
            let name: EdgeCurveName = c.name().parse().map_err(|_| bad(format!("unknown edge curve '{}'", c.name())))?;
            if slots[name.index()].is_some() {
                return Err(bad(format!("edge curve '{name}' given more than once")));
            }
            check_on_surface(&index, &c).map_err(bad)?;
            slots[name.index()] = Some(c);
        }
        let mut ordered = Vec::with_capacity(5);
        for (name, slot) in EdgeCurveName::ALL.iter().zip(slots) {
            ordered.push(slot.ok_or_else(|| bad(format!("missing edge curve '{name}'")))?);
        }
        Ok(PlateModel {
            id: id.to_string(),
            index,
            stop_label: stop_label.to_string(),
            stop_point,
            landmarks,
            curves: ordered,
            vendor: vendor.to_string(),
            size_class: size_class.to_string(),
            curve_history: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.index.mesh()
    }

    /// Index over the plate mesh in its own frame.
    pub fn mesh_index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn stop_label(&self) -> &str {
        &self.stop_label
    }

    pub fn stop_point(&self) -> Point3 {
        self.stop_point
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    pub fn curve(&self, name: EdgeCurveName) -> &Polyline {
        &self.curves[name.index()]
    }

    /// Curves in canonical order.
    pub fn curves(&self) -> &[Polyline] {
        &self.curves
    }

    pub fn vendor(&self) -> &str {
        &self.vendor
    }

    pub fn size_class(&self) -> &str {
        &self.size_class
    }

    /// Curves that were replaced, oldest first.
    pub fn curve_history(&self) -> &[Polyline] {
        &self.curve_history
    }

    /// Replaces one edge curve, keeping the old one in the curve history.
    /// The new polyline is renamed to the canonical name.
    pub fn update_edge_curve(&self, name: &str, polyline: &Polyline) -> Result<PlateModel> {
        let which: EdgeCurveName = name.parse()?;
        let curve = Polyline::new(which.as_str(), polyline.points().to_vec())?;
        check_on_surface(&self.index, &curve).map_err(Error::InvalidInput)?;
        let mut next = self.clone();
        let old = std::mem::replace(&mut next.curves[which.index()], curve);
        next.curve_history.push(old);
        Ok(next)
    }
}

fn check_on_surface(index: &SpatialIndex, curve: &Polyline) -> std::result::Result<(), String> {
    for (i, p) in curve.points().iter().enumerate() {
        let d = index.closest_point(p).distance;
        if d > CURVE_SURFACE_TOLERANCE {
            return Err(format!(
                "edge curve '{}' point {i} is {d:.3} mm from the plate surface (limit {CURVE_SURFACE_TOLERANCE} mm)",
                curve.name()
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, PlateShape};

    fn shape() -> PlateShape {
        PlateShape { half_width: 10.0, depth: 20.0, floor_curvature: 0.01, rim_lift: 1.0, lateral_curl: 0.0 }
    }

    #[test]
    fn curves_are_stored_in_canonical_order() {
        let s = shape();
        let mut curves = s.edge_curves(0.5);
        curves.reverse();
        let p = PlateModel::new("p", s.mesh(10, 10), "stop", s.landmarks(), curves, "v", "m").unwrap();
        let names: Vec<&str> = p.curves().iter().map(|c| c.name()).collect();
        let canon: Vec<&str> = EdgeCurveName::ALL.iter().map(|c| c.as_str()).collect();
        assert_eq!(names, canon);
    }

    #[test]
    fn missing_curve_is_named() {
        let s = shape();
        let curves: Vec<_> = s.edge_curves(0.5).into_iter().filter(|c| c.name() != "floor_wall_junction").collect();
        let err = PlateModel::new("p", s.mesh(10, 10), "stop", s.landmarks(), curves, "v", "m").unwrap_err();
        assert!(matches!(&err, Error::InvalidPlate { message, .. } if message.contains("floor_wall_junction")), "{err}");
    }

    #[test]
    fn off_surface_curve_and_missing_stop_are_rejected() {
        let s = shape();
        let mut curves = s.edge_curves(0.5);
        let lifted: Vec<Point3> = curves[0].points().iter().map(|p| p + crate::Vector3::new(0.0, 0.0, 1.5)).collect();
        curves[0] = Polyline::new(curves[0].name(), lifted).unwrap();
        assert!(PlateModel::new("p", s.mesh(10, 10), "stop", s.landmarks(), curves, "v", "m").is_err());
        assert!(PlateModel::new("p", s.mesh(10, 10), "nope", s.landmarks(), s.edge_curves(0.5), "v", "m").is_err());
    }

    #[test]
    fn update_keeps_history_and_rejects_unknown_names() {
        let p = synthetic::sample_plates().remove(0);
        let c = p.curve(EdgeCurveName::LateralFloor).clone();
        let q = p.update_edge_curve("lateral_floor", &c).unwrap();
        assert_eq!(q.curve(EdgeCurveName::LateralFloor), &c);
        assert_eq!(q.curve_history().len(), 1);
        assert!(matches!(p.update_edge_curve("medial_rim", &c), Err(Error::InvalidInput(_))));
        assert_eq!("superior_medial_wall".parse::<EdgeCurveName>().unwrap(), EdgeCurveName::SuperiorMedialWall);
    }
}
