//! Trimmed point-to-point ICP, rigid and affine.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{SpatialIndex, Transform, TriangleMesh};
use crate::registration::kabsch::{fit_affine, fit_rigid};
use crate::registration::{sample_indices, DEFAULT_SEED};
use crate::{AffineTransform, Error, Point3, Result, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once the trimmed RMS changes by less than this (mm).
    pub convergence_tol: f64,
    /// Fraction of the worst surviving correspondences discarded per iteration.
    pub trim_fraction: f64,
    /// Correspondences farther apart than this are ignored (mm).
    pub max_correspondence_distance: f64,
    /// Source vertices sampled per run.
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            convergence_tol: 1e-4,
            trim_fraction: 0.1,
            max_correspondence_distance: 10.0,
            sample_count: 5000,
            seed: DEFAULT_SEED,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::invalid(format!("trim_fraction {} must be in [0, 1)", self.trim_fraction)));
        }
        if !(self.convergence_tol > 0.0) || !(self.max_correspondence_distance > 0.0) {
            return Err(Error::invalid("ICP tolerances must be positive"));
        }
        if self.max_iterations == 0 || self.sample_count == 0 {
            return Err(Error::invalid("ICP needs at least one iteration and one sample"));
        }
        Ok(())
    }
}

/// Result of an ICP run.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpOutcome<T> {
    /// Cumulative source-to-target transform.
    pub transform: T,
    /// Trimmed RMS of the final correspondences (mm).
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Trimmed RMS at the start of each iteration.
    pub rms_history: Vec<f64>,
}

struct Correspondences {
    source: Vec<Point3>,
    target: Vec<Point3>,
    rms: f64,
}

/// Closest points for `moved`, filtered by distance and trimmed. `original`
/// holds the untransformed points so the solve can be done directly.
fn correspond(original: &[Point3], moved: &[Point3], target: &SpatialIndex, params: &IcpParams) -> Option<Correspondences> {
    let hits: Vec<(usize, f64, Point3)> = moved
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let r = target.closest_point(p);
            (i, r.distance, r.point)
        })
        .collect();
    let mut kept: Vec<(usize, f64, Point3)> = hits
        .into_iter()
        .filter(|(_, d, _)| *d <= params.max_correspondence_distance)
        .collect();
    if kept.is_empty() {
        return None;
    }
    let drop = (kept.len() as f64 * params.trim_fraction).floor() as usize;
    let keep = (kept.len() - drop).max(1);
    kept.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    kept.truncate(keep);
    kept.sort_by_key(|k| k.0);
    let rms = (kept.iter().map(|k| k.1 * k.1).sum::<f64>() / kept.len() as f64).sqrt();
    Some(Correspondences {
        source: kept.iter().map(|k| original[k.0]).collect(),
        target: kept.iter().map(|k| k.2).collect(),
        rms,
    })
}

fn run<T: Transform + Copy>(
    points: &[Point3],
    target: &SpatialIndex,
    init: T,
    params: &IcpParams,
    solve: impl Fn(&[Point3], &[Point3]) -> Result<T>,
) -> Result<IcpOutcome<T>> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::invalid("ICP source has no points"));
    }
    let idx = sample_indices(points.len(), params.sample_count, params.seed);
    let sample: Vec<Point3> = idx.iter().map(|&i| points[i]).collect();

    let no_overlap = |iteration: usize| {
        Error::RegistrationFailed(format!(
            "no correspondences within {} mm at iteration {iteration}",
            params.max_correspondence_distance
        ))
    };

    let mut current = init;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..params.max_iterations {
        let moved = current.apply_points(&sample);
        let c = correspond(&sample, &moved, target, params).ok_or_else(|| no_overlap(it))?;
        let previous = history.last().copied();
        history.push(c.rms);
        iterations = it + 1;
        if previous.is_some_and(|p: f64| (p - c.rms).abs() < params.convergence_tol) {
            converged = true;
            break;
        }
        current = solve(&c.source, &c.target)?;
    }
    let moved = current.apply_points(&sample);
    let last = correspond(&sample, &moved, target, params).ok_or_else(|| no_overlap(iterations))?;
    Ok(IcpOutcome {
        transform: current,
        residual_rms: last.rms,
        iterations,
        converged,
        rms_history: history,
    })
}

/// Rigid ICP of `source` vertices onto the indexed target surface.
pub fn icp_rigid(source: &TriangleMesh, target: &SpatialIndex, init: RigidTransform, params: &IcpParams) -> Result<IcpOutcome<RigidTransform>> {
    icp_rigid_points(source.vertices(), target, init, params)
}

pub fn icp_rigid_points(points: &[Point3], target: &SpatialIndex, init: RigidTransform, params: &IcpParams) -> Result<IcpOutcome<RigidTransform>> {
    run(points, target, init, params, fit_rigid)
}

/// Affine ICP: same loop, unconstrained 3×4 least-squares solve per iteration.
pub fn icp_affine(source: &TriangleMesh, target: &SpatialIndex, init: RigidTransform, params: &IcpParams) -> Result<IcpOutcome<AffineTransform>> {
    icp_affine_points(source.vertices(), target, init, params)
}

pub fn icp_affine_points(points: &[Point3], target: &SpatialIndex, init: RigidTransform, params: &IcpParams) -> Result<IcpOutcome<AffineTransform>> {
    run(points, target, AffineTransform::from(init), params, fit_affine)
}
