use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::SpatialIndex;
use crate::{Error, Point3, Result};

/// What a "point in the plate" is: one mesh vertex.
pub const SAMPLING_BASIS: &str = "vertices";

/// Plate vertices found inside the bone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub collision_count: usize,
    pub total_points: usize,
    /// `100·count/total` in hundredths, rounded half up.
    percent_hundredths: u64,
    pub collision_points: Vec<usize>,
    pub sampling_basis: String,
}

impl CollisionReport {
    /// Report for `collision_points` (vertex ids) out of `total_points`.
    pub fn new(total_points: usize, mut collision_points: Vec<usize>) -> Result<Self> {
        collision_points.sort_unstable();
        collision_points.dedup();
        if collision_points.last().is_some_and(|&i| i >= total_points) {
            return Err(Error::invalid("collision vertex id out of range"));
        }
        let count = collision_points.len() as u64;
        let total = total_points as u64;
        let percent_hundredths = if total == 0 { 0 } else { (20_000 * count + total) / (2 * total) };
        Ok(CollisionReport {
            collision_count: collision_points.len(),
            total_points,
            percent_hundredths,
            collision_points,
            sampling_basis: SAMPLING_BASIS.to_string(),
        })
    }

    /// Percentage rounded to two decimals.
    pub fn percent(&self) -> f64 {
        self.percent_hundredths as f64 / 100.0
    }

    /// Percentage with exactly two decimals, e.g. `"9.88"`.
    pub fn percent_text(&self) -> String {
        format!("{}.{:02}", self.percent_hundredths / 100, self.percent_hundredths % 100)
    }

    pub fn message(&self) -> String {
        format!(
            "There are {} collision points. This is approximately {} % of points in the plate.",
            self.collision_count,
            self.percent_text()
        )
    }
}

/// Flags plate vertices (already in patient space) whose signed distance to
/// the bone surface is below `-penetration_tol`.
pub fn detect_collisions(plate_vertices: &[Point3], bone: &SpatialIndex, penetration_tol: f64) -> CollisionReport {
    let ids: Vec<usize> = plate_vertices
        .par_iter()
        .enumerate()
        .filter(|(_, p)| bone.signed_distance(p) < -penetration_tol)
        .map(|(i, _)| i)
        .collect();
    CollisionReport::new(plate_vertices.len(), ids).expect("ids come from the vertex range")
}
