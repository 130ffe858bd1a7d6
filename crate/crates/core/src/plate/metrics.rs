use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{resample_polyline, Polyline, SpatialIndex, Transform};
use crate::plate::{detect_collisions, CollisionReport, EdgeCurveName, PlateModel};
use crate::{Error, Point3, Result, RigidTransform};

/// Points resampled along each edge curve.
pub const DEFAULT_SAMPLES_PER_CURVE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    pub samples_per_curve: usize,
    /// Depth (mm) a vertex may sit below the bone surface before it collides.
    pub penetration_tol: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            samples_per_curve: DEFAULT_SAMPLES_PER_CURVE,
            penetration_tol: 0.0,
        }
    }
}

/// Signed distance of every (placed) plate vertex to the orbit surface.
/// Negative values lie beneath the orbit.
pub fn plate_wide_distances(plate_vertices: &[Point3], orbit: &SpatialIndex) -> Vec<f64> {
    plate_vertices.par_iter().map(|p| orbit.signed_distance(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub curve_name: EdgeCurveName,
    /// Resampled curve points in patient space.
    pub sample_points: Vec<Point3>,
    /// Closest orbit point for each sample.
    pub projected_points: Vec<Point3>,
    /// Unsigned sample-to-projection distances (mm).
    pub point_distances: Vec<f64>,
    pub mean: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn edge_report(name: EdgeCurveName, curve: &Polyline, transform: &RigidTransform, orbit: &SpatialIndex, samples: usize) -> Result<EdgeReport> {
    let placed = Polyline::new(name.as_str(), transform.apply_points(curve.points()))?;
    let resampled = resample_polyline(&placed, samples)?;
    let hits: Vec<_> = resampled.points().iter().map(|p| orbit.closest_point(p)).collect();
    let point_distances: Vec<f64> = hits.iter().map(|h| h.distance).collect();
    Ok(EdgeReport {
        curve_name: name,
        sample_points: resampled.points().to_vec(),
        projected_points: hits.iter().map(|h| h.point).collect(),
        mean: mean(&point_distances),
        point_distances,
    })
}

/// Edge-specific distances for all five curves, in canonical order.
pub fn edge_distances(plate: &PlateModel, transform: &RigidTransform, orbit: &SpatialIndex, samples_per_curve: usize) -> Result<Vec<EdgeReport>> {
    if samples_per_curve < 2 {
        return Err(Error::invalid(format!("samples_per_curve must be at least 2, got {samples_per_curve}")));
    }
    EdgeCurveName::ALL
        .iter()
        .map(|&name| edge_report(name, plate.curve(name), transform, orbit, samples_per_curve))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub plate_id: String,
    /// Signed distance per plate vertex (mm).
    pub plate_wide: Vec<f64>,
    pub edge_reports: Vec<EdgeReport>,
    /// Mean of all edge sample distances pooled together.
    pub overall_edge_mean: f64,
    pub collision: CollisionReport,
}

impl FitReport {
    pub fn edge(&self, name: EdgeCurveName) -> Option<&EdgeReport> {
        self.edge_reports.iter().find(|e| e.curve_name == name)
    }

    /// All edge sample distances in canonical curve order.
    pub fn all_edge_distances(&self) -> Vec<f64> {
        self.edge_reports.iter().flat_map(|e| e.point_distances.iter().copied()).collect()
    }
}

pub fn compute_fit_report(
    plate: &PlateModel,
    transform: &RigidTransform,
    orbit: &SpatialIndex,
    bone: &SpatialIndex,
    params: &FitParams,
) -> Result<FitReport> {
    let placed = transform.apply_points(plate.mesh().vertices());
    let edge_reports = edge_distances(plate, transform, orbit, params.samples_per_curve)?;
    let pooled: Vec<f64> = edge_reports.iter().flat_map(|e| e.point_distances.iter().copied()).collect();
    Ok(FitReport {
        plate_id: plate.id().to_string(),
        plate_wide: plate_wide_distances(&placed, orbit),
        overall_edge_mean: mean(&pooled),
        edge_reports,
        collision: detect_collisions(&placed, bone, params.penetration_tol),
    })
}

/// The cheap metrics returned on every interactive pose update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveSummary {
    pub plate_id: String,
    pub collision: CollisionReport,
    pub curve_means: Vec<(EdgeCurveName, f64)>,
}

pub fn live_summary(
    plate: &PlateModel,
    transform: &RigidTransform,
    orbit: &SpatialIndex,
    bone: &SpatialIndex,
    params: &FitParams,
) -> Result<LiveSummary> {
    let placed = transform.apply_points(plate.mesh().vertices());
    let edges = edge_distances(plate, transform, orbit, params.samples_per_curve)?;
    Ok(LiveSummary {
        plate_id: plate.id().to_string(),
        collision: detect_collisions(&placed, bone, params.penetration_tol),
        curve_means: edges.iter().map(|e| (e.curve_name, e.mean)).collect(),
    })
}
