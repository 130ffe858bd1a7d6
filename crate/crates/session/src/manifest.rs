//! Case and plate manifests. Paths inside a manifest are relative to the
//! manifest's own directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use orbitfit_core::mesh::{load_landmarks, load_mesh, LandmarkSet};
use orbitfit_core::plate::{EdgeCurveName, PlateModel};
use orbitfit_core::Polyline;

use crate::error::{Result, SessionError};
use crate::json::read_json;

/// Version written into every manifest and state file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub schema_version: u32,
    pub case_id: String,
    /// Closed bone surface used for collision checks.
    pub bone_mesh: String,
    /// Reconstructed orbit surface, normals pointing into the cavity.
    pub reconstructed_orbit: String,
    pub orbit_landmarks: String,
    pub orbit_stop_label: String,
    /// Landmark inside the orbital cavity used to check orbit orientation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_label: Option<String>,
    /// Plate manifest paths, in display order.
    pub plates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateManifest {
    pub schema_version: u32,
    pub plate_id: String,
    pub vendor: String,
    pub size_class: String,
    pub mesh: String,
    pub stop_label: String,
    pub landmarks: String,
    /// Curve name to curve file (JSON polyline).
    pub curves: BTreeMap<String, String>,
}

/// Reads a versioned JSON document, refusing versions newer than ours.
pub fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let value: serde_json::Value = read_json(path)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| SessionError::manifest(path, "missing integer schema_version"))?;
    if found > SCHEMA_VERSION as u64 {
        return Err(SessionError::SchemaVersion {
            path: path.to_path_buf(),
            found: found.min(u32::MAX as u64) as u32,
            supported: SCHEMA_VERSION,
        });
    }
    if found == 0 {
        return Err(SessionError::manifest(path, "schema_version 0 is not a valid version"));
    }
    serde_json::from_value(value).map_err(|e| SessionError::manifest(path, e.to_string()))
}

pub fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads a plate manifest and everything it references.
pub fn load_plate(path: &Path) -> Result<(PlateManifest, PlateModel, Vec<PathBuf>)> {
    let m: PlateManifest = read_versioned(path)?;
    let base = base_dir(path);
    let invalid = |message: String| SessionError::Core(orbitfit_core::Error::InvalidPlate {
        plate: m.plate_id.clone(),
        message,
    });
    for name in m.curves.keys() {
        if name.parse::<EdgeCurveName>().is_err() {
            return Err(invalid(format!("unknown edge curve '{name}'")));
        }
    }
    for name in EdgeCurveName::ALL {
        if !m.curves.contains_key(name.as_str()) {
            return Err(invalid(format!("missing edge curve '{name}'")));
        }
    }
    let mesh_path = resolve(&base, &m.mesh);
    let lm_path = resolve(&base, &m.landmarks);
    let mut files = vec![mesh_path.clone(), lm_path.clone()];
    let mesh = load_mesh(&mesh_path, None)?;
    let landmarks: LandmarkSet = load_landmarks(&lm_path, None)?;
    let mut curves = Vec::new();
    for name in EdgeCurveName::ALL {
        let p = resolve(&base, &m.curves[name.as_str()]);
        let c: Polyline = read_json(&p)?;
        if c.name() != name.as_str() {
            return Err(invalid(format!("curve file {} holds '{}', expected '{name}'", p.display(), c.name())));
        }
        curves.push(c);
        files.push(p);
    }
    let plate = PlateModel::new(&m.plate_id, mesh, &m.stop_label, landmarks, curves, &m.vendor, &m.size_class)?;
    Ok((m, plate, files))
}
