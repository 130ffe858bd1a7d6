//! A case: bone and orbit surfaces, orbit landmarks, plates, their
//! placements and the event log that produced them.
//!
//! On disk a case is a directory holding `case.json` (the manifest),
//! `state.json` (placements and curve edits) and `events.ndjson`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use orbitfit_core::mesh::{load_landmarks, load_mesh, LandmarkSet, Transform};
use orbitfit_core::plate::{
    compute_fit_report, export_fit_outputs, initial_landmark_placement, live_summary, rank_plates, ExportItem,
    FitParams, FitReport, HeatmapRange, LiveSummary, Placement, PlateModel, PlateRanking,
};
use orbitfit_core::{Point3, Polyline, RigidTransform, SpatialIndex, Vector3};

use crate::error::{Result, SessionError};
use crate::events::{read_events, write_events, Action, SessionEvent};
use crate::json::to_exact_pretty;
use crate::manifest::{load_plate, read_versioned, resolve, CaseManifest, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "case.json";
pub const STATE_FILE: &str = "state.json";
pub const EVENTS_FILE: &str = "events.ndjson";

/// Largest orthonormality drift repaired by polar correction.
pub const MAX_ROTATION_DRIFT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEdit {
    pub plate_id: String,
    pub curve: String,
    pub polyline: Polyline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseState {
    schema_version: u32,
    case_id: String,
    placements: BTreeMap<String, Placement>,
    curve_edits: Vec<CurveEdit>,
}

#[derive(Debug, Clone)]
pub struct Case {
    dir: PathBuf,
    manifest: CaseManifest,
    bone: Arc<SpatialIndex>,
    orbit: Arc<SpatialIndex>,
    orbit_landmarks: LandmarkSet,
    orbit_stop: Point3,
    plates: Vec<PlateModel>,
    placements: BTreeMap<String, Placement>,
    curve_edits: Vec<CurveEdit>,
    events: Vec<SessionEvent>,
    input_hashes: BTreeMap<String, String>,
    warnings: Vec<String>,
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| SessionError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Checks that most orbit normals point toward the `up` landmark.
fn check_orientation(orbit: &orbitfit_core::TriangleMesh, up: &Point3) -> std::result::Result<(), String> {
    let (mut toward, mut away) = (0usize, 0usize);
    for (v, n) in orbit.vertices().iter().zip(orbit.vertex_normals()) {
        let d = (up - v).dot(n);
        if d > 0.0 {
            toward += 1;
        } else if d < 0.0 {
            away += 1;
        }
    }
    if toward > away {
        Ok(())
    } else {
        Err(format!(
            "orbit normals must point into the cavity: {toward} vertices face the 'up' landmark, {away} face away"
        ))
    }
}

impl Case {
    /// Builds a fresh case from a manifest: every placement starts at identity
    /// with an empty log.
    pub fn create(manifest_path: &Path) -> Result<Case> {
        let manifest: CaseManifest = read_versioned(manifest_path)?;
        let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut hashes = BTreeMap::new();
        let mut warnings = Vec::new();
        let rel = |p: &Path| p.strip_prefix(&dir).unwrap_or(p).to_string_lossy().replace('\\', "/");

        let bone_path = resolve(&dir, &manifest.bone_mesh);
        let bone_mesh = load_mesh(&bone_path, None)?;
        if !bone_mesh.is_watertight() {
            warnings.push(format!(
                "bone mesh {} is not watertight; collision inside/outside relies on the normal sign",
                manifest.bone_mesh
            ));
        }
        warnings.extend(bone_mesh.warnings().iter().map(|w| format!("{}: {w}", manifest.bone_mesh)));
        hashes.insert(rel(&bone_path), file_hash(&bone_path)?);

        let orbit_path = resolve(&dir, &manifest.reconstructed_orbit);
        let orbit_mesh = load_mesh(&orbit_path, None)?;
        warnings.extend(orbit_mesh.warnings().iter().map(|w| format!("{}: {w}", manifest.reconstructed_orbit)));
        hashes.insert(rel(&orbit_path), file_hash(&orbit_path)?);

        let lm_path = resolve(&dir, &manifest.orbit_landmarks);
        let orbit_landmarks = load_landmarks(&lm_path, None)?;
        hashes.insert(rel(&lm_path), file_hash(&lm_path)?);
        let orbit_stop = *orbit_landmarks.get(&manifest.orbit_stop_label).ok_or_else(|| {
            SessionError::manifest(
                &lm_path,
                format!("orbit stop label '{}' not found", manifest.orbit_stop_label),
            )
        })?;
        if let Some(up_label) = &manifest.up_label {
            let up = orbit_landmarks
                .get(up_label)
                .ok_or_else(|| SessionError::manifest(&lm_path, format!("up label '{up_label}' not found")))?;
            check_orientation(&orbit_mesh, up).map_err(|m| SessionError::manifest(&orbit_path, m))?;
        }

        let mut plates: Vec<PlateModel> = Vec::new();
        for p in &manifest.plates {
            let path = resolve(&dir, p);
            let (_, plate, files) = load_plate(&path)?;
            if plates.iter().any(|q| q.id() == plate.id()) {
                return Err(SessionError::DuplicatePlate(plate.id().to_string()));
            }
            hashes.insert(rel(&path), file_hash(&path)?);
            for f in files {
                hashes.insert(rel(&f), file_hash(&f)?);
            }
            warnings.extend(plate.mesh().warnings().iter().map(|w| format!("{}: {w}", plate.id())));
            plates.push(plate);
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        let placements = plates.iter().map(|p| (p.id().to_string(), Placement::new(p.id()))).collect();
        Ok(Case {
            dir,
            manifest,
            bone: Arc::new(SpatialIndex::build(bone_mesh)?),
            orbit: Arc::new(SpatialIndex::build(orbit_mesh)?),
            orbit_landmarks,
            orbit_stop,
            plates,
            placements,
            curve_edits: Vec::new(),
            events: Vec::new(),
            input_hashes: hashes,
            warnings,
        })
    }

    /// Loads a case directory with its saved state and event log.
    pub fn open(dir: &Path) -> Result<Case> {
        let mut case = Case::create(&dir.join(MANIFEST_FILE))?;
        let state_path = dir.join(STATE_FILE);
        if state_path.exists() {
            let state: CaseState = read_versioned(&state_path)?;
            if state.case_id != case.manifest.case_id {
                return Err(SessionError::manifest(
                    &state_path,
                    format!("state belongs to case '{}', manifest is '{}'", state.case_id, case.manifest.case_id),
                ));
            }
            for edit in &state.curve_edits {
                case.apply_curve_edit(edit)?;
            }
            for (id, p) in &state.placements {
                if case.plate(id).is_none() || p.plate_id() != id {
                    return Err(SessionError::manifest(&state_path, format!("placement for unknown plate '{id}'")));
                }
            }
            case.placements.extend(state.placements);
        }
        case.events = read_events(&dir.join(EVENTS_FILE))?;
        Ok(case)
    }

    /// Rebuilds a case by re-executing `events` on the manifest's initial state.
    pub fn replay(manifest_path: &Path, events: &[SessionEvent]) -> Result<Case> {
        let mut case = Case::create(manifest_path)?;
        for e in events {
            case.apply(&e.action)?;
            case.events.push(e.clone());
        }
        Ok(case)
    }

    pub fn save(&self) -> Result<()> {
        self.save_to(&self.dir)
    }

    /// Writes `state.json` and `events.ndjson` into `dir`.
    pub fn save_to(&self, dir: &Path) -> Result<()> {
        let state = CaseState {
            schema_version: SCHEMA_VERSION,
            case_id: self.manifest.case_id.clone(),
            placements: self.placements.clone(),
            curve_edits: self.curve_edits.clone(),
        };
        crate::json::write_text(&dir.join(STATE_FILE), &to_exact_pretty(&state))?;
        write_events(&dir.join(EVENTS_FILE), &self.events)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn case_id(&self) -> &str {
        &self.manifest.case_id
    }

    pub fn manifest(&self) -> &CaseManifest {
        &self.manifest
    }

    pub fn bone(&self) -> &SpatialIndex {
        &self.bone
    }

    pub fn orbit(&self) -> &SpatialIndex {
        &self.orbit
    }

    pub fn orbit_stop(&self) -> Point3 {
        self.orbit_stop
    }

    pub fn orbit_landmarks(&self) -> &LandmarkSet {
        &self.orbit_landmarks
    }

    pub fn plates(&self) -> &[PlateModel] {
        &self.plates
    }

    pub fn plate(&self, id: &str) -> Option<&PlateModel> {
        self.plates.iter().find(|p| p.id() == id)
    }

    pub fn placements(&self) -> &BTreeMap<String, Placement> {
        &self.placements
    }

    pub fn placement(&self, id: &str) -> Option<&Placement> {
        self.placements.get(id)
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// Sequence number of the last logged event (0 for none).
    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Content hashes of every input file, keyed by case-relative path.
    pub fn input_hashes(&self) -> &BTreeMap<String, String> {
        &self.input_hashes
    }

    fn plate_index(&self, id: &str) -> Result<usize> {
        self.plates
            .iter()
            .position(|p| p.id() == id)
            .ok_or_else(|| SessionError::UnknownPlate(id.to_string()))
    }

    fn apply_curve_edit(&mut self, edit: &CurveEdit) -> Result<()> {
        let i = self.plate_index(&edit.plate_id)?;
        self.plates[i] = self.plates[i].update_edge_curve(&edit.curve, &edit.polyline)?;
        self.curve_edits.push(edit.clone());
        Ok(())
    }

    /// Applies one action to the in-memory state without logging it.
    fn apply(&mut self, action: &Action) -> Result<()> {
        let i = self.plate_index(action.plate_id())?;
        let plate_stop = self.plates[i].stop_point();
        match action {
            Action::LandmarkInit { plate_id } => {
                let t = initial_landmark_placement(&self.plates[i], &self.orbit_landmarks)?;
                self.placement_mut(plate_id).apply_landmark_init(t);
            }
            Action::StopAlign { plate_id } => {
                let stop = self.orbit_stop;
                self.placement_mut(plate_id).posterior_stop_align(&plate_stop, &stop);
            }
            Action::PivotRotate { plate_id, axis, angle } => {
                self.placement_mut(plate_id).pivot_rotate(&Vector3::from(*axis), *angle)?;
            }
            Action::Nudge { plate_id, delta, move_pivot } => {
                self.placement_mut(plate_id).nudge_translate(&Vector3::from(*delta), *move_pivot)?;
            }
            Action::SetTransform { plate_id, matrix } => {
                let (t, corrected) = RigidTransform::from_rows_corrected(matrix, MAX_ROTATION_DRIFT)
                    .map_err(|e| SessionError::RejectedTransform(e.to_string()))?;
                if corrected {
                    log::info!("{plate_id}: rotation re-orthonormalized");
                }
                self.placement_mut(plate_id).set_transform(t);
            }
            Action::Reset { plate_id } => {
                self.placement_mut(plate_id).reset_to_posterior_stop()?;
            }
            Action::UpdateCurve { plate_id, curve, points } => {
                let polyline = Polyline::new(curve.clone(), points.iter().map(|p| Point3::from(*p)).collect())?;
                self.apply_curve_edit(&CurveEdit {
                    plate_id: plate_id.clone(),
                    curve: curve.clone(),
                    polyline,
                })?;
            }
        }
        Ok(())
    }

    fn placement_mut(&mut self, id: &str) -> &mut Placement {
        self.placements
            .entry(id.to_string())
            .or_insert_with(|| Placement::new(id))
    }

    /// Applies and logs `action`. On error nothing changes.
    pub fn execute(&mut self, actor: &str, action: Action) -> Result<&SessionEvent> {
        let snapshot = (self.placements.clone(), self.plates.clone(), self.curve_edits.len());
        if let Err(e) = self.apply(&action) {
            self.placements = snapshot.0;
            self.plates = snapshot.1;
            self.curve_edits.truncate(snapshot.2);
            return Err(e);
        }
        let seq = self.last_seq() + 1;
        self.events.push(SessionEvent {
            seq,
            timestamp: seq,
            actor: actor.to_string(),
            action,
        });
        Ok(self.events.last().expect("just pushed"))
    }

    /// Interactive pose update: validates, logs and returns the live metrics.
    pub fn set_plate_transform(&mut self, actor: &str, plate_id: &str, matrix: [[f64; 4]; 4], fit: &FitParams) -> Result<LiveSummary> {
        self.execute(
            actor,
            Action::SetTransform {
                plate_id: plate_id.to_string(),
                matrix,
            },
        )?;
        self.live_summary(plate_id, fit)
    }

    pub fn transform_of(&self, plate_id: &str) -> Result<RigidTransform> {
        self.plate_index(plate_id)?;
        Ok(self.placements.get(plate_id).map(|p| *p.transform()).unwrap_or_default())
    }

    pub fn live_summary(&self, plate_id: &str, fit: &FitParams) -> Result<LiveSummary> {
        let plate = &self.plates[self.plate_index(plate_id)?];
        Ok(live_summary(plate, &self.transform_of(plate_id)?, &self.orbit, &self.bone, fit)?)
    }

    pub fn fit_report(&self, plate_id: &str, fit: &FitParams) -> Result<FitReport> {
        let plate = &self.plates[self.plate_index(plate_id)?];
        Ok(compute_fit_report(plate, &self.transform_of(plate_id)?, &self.orbit, &self.bone, fit)?)
    }

    /// Fit reports for every plate in manifest order.
    pub fn fit_all(&self, fit: &FitParams) -> Result<Vec<FitReport>> {
        self.plates.iter().map(|p| self.fit_report(p.id(), fit)).collect()
    }

    pub fn rank(&self, reports: &[FitReport]) -> Result<PlateRanking> {
        Ok(rank_plates(reports)?)
    }

    /// Hash of every placement transform, for the export manifest.
    fn placement_hash(&self, reports: &[FitReport]) -> Result<String> {
        let mut h = Sha256::new();
        for r in reports {
            let rows = self.transform_of(&r.plate_id)?.to_rows();
            h.update(r.plate_id.as_bytes());
            for v in rows.iter().flatten() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Writes the fit-metrics tree for `reports` under `out_dir`.
    pub fn export(&self, reports: &[FitReport], range: HeatmapRange, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let ranking = self.rank(reports)?;
        let transforms: Vec<RigidTransform> = reports
            .iter()
            .map(|r| self.transform_of(&r.plate_id))
            .collect::<Result<_>>()?;
        let items: Vec<ExportItem> = reports
            .iter()
            .zip(&transforms)
            .map(|(r, t)| -> Result<ExportItem> {
                Ok(ExportItem {
                    plate: &self.plates[self.plate_index(&r.plate_id)?],
                    transform: t,
                    report: r,
                })
            })
            .collect::<Result<_>>()?;
        let mut inputs = self.input_hashes.clone();
        inputs.insert("placements".into(), self.placement_hash(reports)?);
        let curves: Vec<&Polyline> = self.plates.iter().flat_map(|p| p.curves()).collect();
        inputs.insert("edge_curves".into(), hex::encode(Sha256::digest(crate::json::to_exact_line(&curves))));
        Ok(export_fit_outputs(self.case_id(), &items, &ranking, range, &inputs, out_dir)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::write_sample_case;

    fn sample() -> (tempfile::TempDir, Case) {
        let dir = tempfile::tempdir().unwrap();
        write_sample_case(dir.path()).unwrap();
        let case = Case::open(dir.path()).unwrap();
        (dir, case)
    }

    #[test]
    fn sample_case_loads_with_empty_placements() {
        let (_d, case) = sample();
        assert_eq!(case.plates().len(), 3);
        assert_eq!(case.placements().len(), 3);
        assert!(case.placements().values().all(|p| p.history().len() == 1));
        assert!(case.events().is_empty());
        assert!(case.warnings().is_empty(), "{:?}", case.warnings());
    }

    #[test]
    fn failed_action_leaves_state_untouched() {
        let (_d, mut case) = sample();
        let before = case.placements().clone();
        let err = case
            .execute("t", Action::PivotRotate { plate_id: "vendorA-small".into(), axis: [0.0, 0.0, 1.0], angle: 0.1 })
            .unwrap_err();
        assert!(matches!(err, SessionError::Core(orbitfit_core::Error::MissingPivot)));
        assert_eq!(case.placements(), &before);
        assert!(case.events().is_empty());
        assert!(matches!(
            case.execute("t", Action::Reset { plate_id: "nope".into() }),
            Err(SessionError::UnknownPlate(_))
        ));
    }

    #[test]
    fn set_transform_rules() {
        let (_d, mut case) = sample();
        let fit = FitParams::default();
        let base = case.live_summary("vendorB-small", &fit).unwrap();
        let same = case
            .set_plate_transform("t", "vendorB-small", RigidTransform::identity().to_rows(), &fit)
            .unwrap();
        assert_eq!(base, same);
        let mut squashed = RigidTransform::identity().to_rows();
        squashed[2][2] = 0.9;
        assert!(matches!(
            case.set_plate_transform("t", "vendorB-small", squashed, &fit),
            Err(SessionError::RejectedTransform(_))
        ));
        assert_eq!(case.events().len(), 1);
    }

    #[test]
    fn save_and_open_round_trip_bitwise() {
        let (d, mut case) = sample();
        for id in ["vendorA-small", "vendorA-large"] {
            case.execute("t", Action::LandmarkInit { plate_id: id.into() }).unwrap();
            case.execute("t", Action::StopAlign { plate_id: id.into() }).unwrap();
            case.execute("t", Action::PivotRotate { plate_id: id.into(), axis: [0.3, 1.0, 0.1], angle: 0.0123 })
                .unwrap();
        }
        let c = case.plate("vendorA-small").unwrap().curve(orbitfit_core::plate::EdgeCurveName::LateralFloor).clone();
        let shorter: Vec<[f64; 3]> = c.points()[..c.points().len() - 3].iter().map(|p| [p.x, p.y, p.z]).collect();
        case.execute("t", Action::UpdateCurve { plate_id: "vendorA-small".into(), curve: "lateral_floor".into(), points: shorter })
            .unwrap();
        case.save().unwrap();
        let back = Case::open(d.path()).unwrap();
        assert_eq!(back.placements(), case.placements());
        assert_eq!(back.events(), case.events());
        assert_eq!(back.plates()[0].curves(), case.plates()[0].curves());
        assert_eq!(back.plates()[0].curve_history().len(), 1);
        let replayed = Case::replay(&d.path().join(MANIFEST_FILE), case.events()).unwrap();
        assert_eq!(replayed.placements(), case.placements());
    }

    #[test]
    fn newer_state_version_is_refused() {
        let (d, case) = sample();
        case.save().unwrap();
        let p = d.path().join(STATE_FILE);
        let text = std::fs::read_to_string(&p).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(Case::open(d.path()), Err(SessionError::SchemaVersion { found: 2, supported: 1, .. })));
    }

    #[test]
    fn duplicate_and_broken_plates_are_rejected() {
        let (d, _) = sample();
        let mpath = d.path().join(MANIFEST_FILE);
        let mut m: CaseManifest = crate::json::read_json(&mpath).unwrap();
        let first = m.plates[0].clone();
        m.plates.push(first);
        std::fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(Case::create(&mpath), Err(SessionError::DuplicatePlate(_))));
        m.plates.pop();
        std::fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();

        let ppath = d.path().join(&m.plates[1]);
        let mut pm: crate::manifest::PlateManifest = crate::json::read_json(&ppath).unwrap();
        pm.curves.remove("floor_wall_junction");
        std::fs::write(&ppath, serde_json::to_string(&pm).unwrap()).unwrap();
        let err = Case::create(&mpath).unwrap_err();
        assert!(err.to_string().contains("floor_wall_junction"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}
