//! Mirrored-orbit reconstruction: reflect the skull across the midsagittal
//! plane and register the reflection back onto the intact bone.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::io::write_file;
use crate::mesh::{mirror_mesh, MirrorPlane, SpatialIndex, Transform, TriangleMesh};
use crate::registration::cpd::{cpd_nonrigid, CpdParams, DeformationField};
use crate::registration::icp::{icp_affine_points, icp_rigid_points, IcpParams};
use crate::registration::sampling::farthest_point_sampling;
use crate::{AffineTransform, Error, Point3, Result, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructionMethod {
    Rigid,
    Affine,
    Cpd,
}

impl ReconstructionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReconstructionMethod::Rigid => "rigid",
            ReconstructionMethod::Affine => "affine",
            ReconstructionMethod::Cpd => "cpd",
        }
    }
}

impl fmt::Display for ReconstructionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReconstructionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rigid" => Ok(ReconstructionMethod::Rigid),
            "affine" => Ok(ReconstructionMethod::Affine),
            "cpd" => Ok(ReconstructionMethod::Cpd),
            other => Err(Error::invalid(format!("unknown reconstruction method '{other}' (rigid, affine, cpd)"))),
        }
    }
}

/// Global part of a registration result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegistrationTransform {
    Rigid(RigidTransform),
    Affine(AffineTransform),
}

impl RegistrationTransform {
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        match self {
            RegistrationTransform::Rigid(t) => t.to_rows(),
            RegistrationTransform::Affine(t) => t.to_rows(),
        }
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        match self {
            RegistrationTransform::Rigid(t) => t.apply_point(p),
            RegistrationTransform::Affine(t) => t.apply_point(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub method: ReconstructionMethod,
    pub transform: RegistrationTransform,
    /// Present exactly when `method` is [`ReconstructionMethod::Cpd`].
    pub deformation: Option<DeformationField>,
    pub reconstructed_orbit: TriangleMesh,
    /// RMS distance (mm) from reconstructed ROI vertices to the intact bone.
    pub residual_rms: f64,
    pub icp_iterations: usize,
}

impl ReconstructionResult {
    pub fn record(&self, name: &str) -> TransformRecord {
        TransformRecord {
            name: name.to_string(),
            method: self.method,
            matrix: self.transform.to_rows(),
            deformation_file: None,
        }
    }
}

/// Serialized registration result: a named 4×4 row-major matrix plus, for
/// CPD, the file name of the text deformation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRecord {
    pub name: String,
    pub method: ReconstructionMethod,
    pub matrix: [[f64; 4]; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation_file: Option<String>,
}

impl TransformRecord {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        write_file(path.as_ref(), format!("{text}\n").as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(0, format!("{}: {e}", path.display())))
    }

    pub fn transform(&self) -> Result<RegistrationTransform> {
        match self.method {
            ReconstructionMethod::Affine => Ok(RegistrationTransform::Affine(AffineTransform::from_rows(&self.matrix)?)),
            _ => Ok(RegistrationTransform::Rigid(RigidTransform::from_rows(&self.matrix)?)),
        }
    }
}

fn residual(points: &[Point3], mask: &[bool], target: &SpatialIndex) -> f64 {
    let d2: Vec<f64> = points
        .par_iter()
        .zip(mask)
        .filter(|(_, keep)| **keep)
        .map(|(p, _)| target.closest_point(p).distance.powi(2))
        .collect();
    (d2.iter().sum::<f64>() / d2.len() as f64).sqrt()
}

fn masked(points: &[Point3], mask: &[bool]) -> Vec<Point3> {
    points.iter().zip(mask).filter(|(_, k)| **k).map(|(p, _)| *p).collect()
}

/// Mirrors `skull` across `plane` and registers the reflection onto the
/// original. `roi` marks intact vertices; it selects both the target
/// surface and the mirrored source vertices used for correspondence.
pub fn reconstruct_orbit(
    skull: &TriangleMesh,
    plane: &MirrorPlane,
    roi: Option<&[bool]>,
    method: ReconstructionMethod,
    icp: &IcpParams,
    cpd: &CpdParams,
) -> Result<ReconstructionResult> {
    let all;
    let mask = match roi {
        Some(m) if m.len() != skull.vertex_count() => {
            return Err(Error::invalid(format!(
                "roi mask has {} entries for {} vertices",
                m.len(),
                skull.vertex_count()
            )))
        }
        Some(m) => m,
        None => {
            all = vec![true; skull.vertex_count()];
            &all
        }
    };
    let target = SpatialIndex::build(skull.restricted_to(mask)?)?;
    let mirrored = mirror_mesh(skull, plane);
    let source = masked(mirrored.vertices(), mask);

    let rigid = icp_rigid_points(&source, &target, RigidTransform::identity(), icp)?;
    let mut iterations = rigid.iterations;
    let (transform, deformation, orbit) = match method {
        ReconstructionMethod::Rigid => {
            (RegistrationTransform::Rigid(rigid.transform), None, mirrored.transformed(&rigid.transform))
        }
        ReconstructionMethod::Affine => {
            let affine = icp_affine_points(&source, &target, rigid.transform, icp)?;
            iterations += affine.iterations;
            (RegistrationTransform::Affine(affine.transform), None, mirrored.transformed(&affine.transform))
        }
        ReconstructionMethod::Cpd => {
            cpd.validate()?;
            let aligned = mirrored.transformed(&rigid.transform);
            let moving = masked(aligned.vertices(), mask);
            let fixed = masked(skull.vertices(), mask);
            let ms = farthest_point_sampling(&moving, cpd.max_points, cpd.seed);
            let fs = farthest_point_sampling(&fixed, cpd.max_points, cpd.seed);
            let moving: Vec<Point3> = ms.iter().map(|&i| moving[i]).collect();
            let fixed: Vec<Point3> = fs.iter().map(|&i| fixed[i]).collect();
            let field = cpd_nonrigid(&moving, &fixed, cpd)?;
            let deformed = aligned.with_vertices(field.apply_all(aligned.vertices()))?;
            (RegistrationTransform::Rigid(rigid.transform), Some(field), deformed)
        }
    };
    let residual_rms = residual(orbit.vertices(), mask, &target);
    log::info!("reconstruction ({method}): residual {residual_rms:.6} mm after {iterations} ICP iterations");
    Ok(ReconstructionResult {
        method,
        transform,
        deformation,
        reconstructed_orbit: orbit,
        residual_rms,
        icp_iterations: iterations,
    })
}
