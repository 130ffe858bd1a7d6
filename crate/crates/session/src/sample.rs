//! Writes the bundled synthetic case: an orbit floor, the bone slab below
//! it and three preformed plates.

use std::collections::BTreeMap;
use std::path::Path;

use orbitfit_core::mesh::io::{save_ply, save_stl_ascii, save_stl_binary};
use orbitfit_core::mesh::{save_landmarks, LandmarkFormat};
use orbitfit_core::synthetic;

use crate::error::Result;
use crate::json::{to_exact_pretty, write_text};
use crate::manifest::{CaseManifest, PlateManifest, SCHEMA_VERSION};

pub const SAMPLE_CASE_ID: &str = "synthetic-orbit-01";

/// Writes the sample case into `dir` and returns the manifest path.
pub fn write_sample_case(dir: &Path) -> Result<std::path::PathBuf> {
    save_stl_binary(&synthetic::orbit_bone(40, 40), dir.join("bone.stl"))?;
    save_ply(&synthetic::orbit_floor(40, 40), dir.join("orbit_reconstructed.ply"))?;
    save_landmarks(&synthetic::sample_orbit_landmarks(), dir.join("orbit_landmarks.mrk.json"), LandmarkFormat::MarkupsJson)?;

    let mut plate_paths = Vec::new();
    for (i, plate) in synthetic::sample_plates().iter().enumerate() {
        let id = plate.id();
        let pdir = dir.join("plates").join(id);
        // One plate ships as ASCII STL so both encodings are exercised.
        if i == 1 {
            save_stl_ascii(plate.mesh(), pdir.join("plate.stl"))?;
        } else {
            save_stl_binary(plate.mesh(), pdir.join("plate.stl"))?;
        }
        save_landmarks(plate.landmarks(), pdir.join("landmarks.fcsv"), LandmarkFormat::Fcsv)?;
        let mut curves = BTreeMap::new();
        for c in plate.curves() {
            let rel = format!("curves/{}.json", c.name());
            write_text(&pdir.join(&rel), &to_exact_pretty(c))?;
            curves.insert(c.name().to_string(), rel);
        }
        let m = PlateManifest {
            schema_version: SCHEMA_VERSION,
            plate_id: id.to_string(),
            vendor: plate.vendor().to_string(),
            size_class: plate.size_class().to_string(),
            mesh: "plate.stl".into(),
            stop_label: plate.stop_label().to_string(),
            landmarks: "landmarks.fcsv".into(),
            curves,
        };
        write_text(&pdir.join("plate.json"), &to_exact_pretty(&m))?;
        plate_paths.push(format!("plates/{id}/plate.json"));
    }

    let manifest = CaseManifest {
        schema_version: SCHEMA_VERSION,
        case_id: SAMPLE_CASE_ID.into(),
        bone_mesh: "bone.stl".into(),
        reconstructed_orbit: "orbit_reconstructed.ply".into(),
        orbit_landmarks: "orbit_landmarks.mrk.json".into(),
        orbit_stop_label: "stop".into(),
        up_label: Some("up".into()),
        plates: plate_paths,
    };
    let path = dir.join(crate::case::MANIFEST_FILE);
    write_text(&path, &to_exact_pretty(&manifest))?;
    Ok(path)
}
