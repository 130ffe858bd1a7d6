//! Append-only session log. Each record is one line of JSON in
//! `events.ndjson`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SessionError};
use crate::json::{to_exact_line, write_text};

/// A mutating operation on a case. Payload fields are the operation's
/// parameters; angles are in radians, lengths in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", rename_all = "snake_case")]
pub enum Action {
    LandmarkInit {
        plate_id: String,
    },
    StopAlign {
        plate_id: String,
    },
    PivotRotate {
        plate_id: String,
        axis: [f64; 3],
        angle: f64,
    },
    Nudge {
        plate_id: String,
        delta: [f64; 3],
        #[serde(default)]
        move_pivot: bool,
    },
    SetTransform {
        plate_id: String,
        /// Row-major 4×4 as submitted, before any polar correction.
        matrix: [[f64; 4]; 4],
    },
    Reset {
        plate_id: String,
    },
    UpdateCurve {
        plate_id: String,
        curve: String,
        points: Vec<[f64; 3]>,
    },
}

impl Action {
    pub fn plate_id(&self) -> &str {
        match self {
            Action::LandmarkInit { plate_id }
            | Action::StopAlign { plate_id }
            | Action::PivotRotate { plate_id, .. }
            | Action::Nudge { plate_id, .. }
            | Action::SetTransform { plate_id, .. }
            | Action::Reset { plate_id }
            | Action::UpdateCurve { plate_id, .. } => plate_id,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Action::LandmarkInit { .. } => "landmark_init",
            Action::StopAlign { .. } => "stop_align",
            Action::PivotRotate { .. } => "pivot_rotate",
            Action::Nudge { .. } => "nudge",
            Action::SetTransform { .. } => "set_transform",
            Action::Reset { .. } => "reset",
            Action::UpdateCurve { .. } => "update_curve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// 1-based position in the log.
    pub seq: u64,
    /// Logical clock; equals `seq`.
    pub timestamp: u64,
    pub actor: String,
    #[serde(flatten)]
    pub action: Action,
}

pub fn write_events(path: &Path, events: &[SessionEvent]) -> Result<()> {
    let mut text = String::new();
    for e in events {
        text.push_str(&to_exact_line(e));
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(SessionError::io(path, e)),
    };
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: SessionEvent = serde_json::from_str(line)
            .map_err(|err| SessionError::manifest(path, format!("line {}: {err}", i + 1)))?;
        if e.seq != events.len() as u64 + 1 {
            return Err(SessionError::manifest(
                path,
                format!("line {}: expected seq {}, found {}", i + 1, events.len() + 1, e.seq),
            ));
        }
        events.push(e);
    }
    Ok(events)
}
