use serde::{Deserialize, Serialize};

use crate::mesh::{LandmarkSet, Transform};
use crate::plate::PlateModel;
use crate::registration::landmark_rigid_align;
use crate::{Error, Point3, Result, RigidTransform, Vector3};

/// Plate-to-patient transform from label-matched landmarks.
pub fn initial_landmark_placement(plate: &PlateModel, orbit_landmarks: &LandmarkSet) -> Result<RigidTransform> {
    landmark_rigid_align(plate.landmarks(), orbit_landmarks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementAction {
    Created,
    LandmarkInit,
    SetTransform,
    StopAlign,
    PivotRotate,
    Nudge,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Logical timestamp, strictly increasing within a placement.
    pub step: u64,
    pub action: PlacementAction,
    pub transform: RigidTransform,
    pub pivot: Option<Point3>,
    /// Plate-frame point held at the pivot by rotations.
    pub anchor: Option<Point3>,
}

/// Pose of one plate in patient space with its audit history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    plate_id: String,
    transform: RigidTransform,
    pivot: Option<Point3>,
    anchor: Option<Point3>,
    history: Vec<HistoryEntry>,
}

impl Placement {
    pub fn new(plate_id: &str) -> Self {
        let mut p = Placement {
            plate_id: plate_id.to_string(),
            transform: RigidTransform::identity(),
            pivot: None,
            anchor: None,
            history: Vec::new(),
        };
        p.record(PlacementAction::Created);
        p
    }

    pub fn plate_id(&self) -> &str {
        &self.plate_id
    }

    pub fn transform(&self) -> &RigidTransform {
        &self.transform
    }

    /// Orbital posterior stop, set by [`Self::posterior_stop_align`].
    pub fn pivot(&self) -> Option<Point3> {
        self.pivot
    }

    pub fn anchor(&self) -> Option<Point3> {
        self.anchor
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    fn record(&mut self, action: PlacementAction) {
        let step = self.history.last().map_or(0, |h| h.step + 1);
        self.history.push(HistoryEntry {
            step,
            action,
            transform: self.transform,
            pivot: self.pivot,
            anchor: self.anchor,
        });
    }

    fn reanchor(&mut self) {
        if let Some(p) = self.pivot {
            self.anchor = Some(self.transform.inverse().apply_point(&p));
        }
    }

    /// Replaces the transform from landmark registration. Pivot state is cleared.
    pub fn apply_landmark_init(&mut self, transform: RigidTransform) {
        self.transform = transform;
        self.pivot = None;
        self.anchor = None;
        self.record(PlacementAction::LandmarkInit);
    }

    /// Replaces the transform wholesale (interactive handle). The pivot stays
    /// fixed in patient space.
    pub fn set_transform(&mut self, transform: RigidTransform) {
        self.transform = transform;
        self.reanchor();
        self.record(PlacementAction::SetTransform);
    }

    /// Translates the plate so that `plate_stop` lands on `orbit_stop` and
    /// fixes the pivot there.
    pub fn posterior_stop_align(&mut self, plate_stop: &Point3, orbit_stop: &Point3) {
        let r = *self.transform.rotation();
        let t = orbit_stop.coords - r * plate_stop.coords;
        self.transform = RigidTransform::from_parts_unchecked(r, t);
        self.pivot = Some(*orbit_stop);
        self.anchor = Some(*plate_stop);
        self.record(PlacementAction::StopAlign);
    }

    /// Rotates by `angle` radians about `axis` through the pivot.
    pub fn pivot_rotate(&mut self, axis: &Vector3, angle: f64) -> Result<()> {
        let (pivot, anchor) = match (self.pivot, self.anchor) {
            (Some(p), Some(a)) => (p, a),
            _ => return Err(Error::MissingPivot),
        };
        if !angle.is_finite() {
            return Err(Error::invalid("rotation angle must be finite"));
        }
        let rot = RigidTransform::from_axis_angle(axis, angle)?;
        if angle != 0.0 {
            let r = rot.rotation() * self.transform.rotation();
            // Solving for t from the anchor keeps the stop exact however
            // many rotations are composed.
            self.transform = RigidTransform::from_parts_unchecked(r, pivot.coords - r * anchor.coords);
        }
        self.record(PlacementAction::PivotRotate);
        Ok(())
    }

    /// Translates by `delta`. The pivot follows the plate only when
    /// `move_pivot` is set.
    pub fn nudge_translate(&mut self, delta: &Vector3, move_pivot: bool) -> Result<()> {
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        let t = self.transform.translation_vector() + delta;
        self.transform = RigidTransform::from_parts_unchecked(*self.transform.rotation(), t);
        if move_pivot {
            self.pivot = self.pivot.map(|p| p + delta);
        } else {
            self.reanchor();
        }
        self.record(PlacementAction::Nudge);
        Ok(())
    }

    /// Restores the state saved by the most recent posterior-stop alignment.
    pub fn reset_to_posterior_stop(&mut self) -> Result<()> {
        let snap = self
            .history
            .iter()
            .rev()
            .find(|h| h.action == PlacementAction::StopAlign)
            .ok_or(Error::MissingHistory)?
            .clone();
        self.transform = snap.transform;
        self.pivot = snap.pivot;
        self.anchor = snap.anchor;
        self.record(PlacementAction::Reset);
        Ok(())
    }

    /// Plate stop in patient space under the current transform.
    pub fn placed_point(&self, plate_point: &Point3) -> Point3 {
        self.transform.apply_point(plate_point)
    }
}
