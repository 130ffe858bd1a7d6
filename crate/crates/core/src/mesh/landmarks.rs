//! Labeled landmark sets in Slicer markups JSON and FCSV form.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::mesh::io::write_file;
use crate::{Error, Point3, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkFormat {
    MarkupsJson,
    Fcsv,
}

impl LandmarkFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_ascii_lowercase();
        if name.ends_with(".fcsv") {
            Ok(LandmarkFormat::Fcsv)
        } else if name.ends_with(".json") {
            Ok(LandmarkFormat::MarkupsJson)
        } else {
            Err(Error::invalid(format!("cannot determine landmark format of {}", path.display())))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub label: String,
    pub position: Point3,
}

/// Ordered landmarks with unique labels. Correspondence between two sets is
/// by label, never by position in the list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    entries: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn new(entries: Vec<Landmark>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.label.as_str()) {
                return Err(Error::invalid(format!("duplicate landmark label '{}'", e.label)));
            }
            if !e.position.iter().all(|c| c.is_finite()) {
                return Err(Error::invalid(format!("landmark '{}' has non-finite position", e.label)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Point3)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, position)| Landmark {
                    label: label.to_string(),
                    position,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[Landmark] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Point3> {
        self.entries.iter().find(|e| e.label == label).map(|e| &e.position)
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.entries.iter().map(|e| e.position).collect()
    }

    /// Label-matched pairs `(self, other)` in `self`'s order.
    pub fn matched_with(&self, other: &LandmarkSet) -> Vec<(String, Point3, Point3)> {
        self.entries
            .iter()
            .filter_map(|e| other.get(&e.label).map(|q| (e.label.clone(), e.position, *q)))
            .collect()
    }
}

pub fn load_landmarks(path: impl AsRef<Path>, format: Option<LandmarkFormat>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => LandmarkFormat::from_path(path)?,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        LandmarkFormat::MarkupsJson => parse_markups_json(&text),
        LandmarkFormat::Fcsv => parse_fcsv(&text),
    }
}

fn parse_markups_json(text: &str) -> Result<LandmarkSet> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        // serde_json reports line/column; convert to a byte offset.
        let offset = text
            .split_inclusive('\n')
            .take(e.line().saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + e.column().saturating_sub(1);
        Error::parse(offset, e.to_string())
    })?;
    let markups = doc
        .get("markups")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(0, "markups JSON has no 'markups' array"))?;
    let mut entries = Vec::new();
    for (m, markup) in markups.iter().enumerate() {
        let points = markup
            .get("controlPoints")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(0, format!("markup {m} has no 'controlPoints' array")))?;
        for (i, cp) in points.iter().enumerate() {
            let label = cp
                .get("label")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("F-{}", i + 1));
            let pos = cp
                .get("position")
                .and_then(Value::as_array)
                .filter(|a| a.len() == 3)
                .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                .ok_or_else(|| Error::parse(0, format!("control point '{label}' has no 3-element position")))?;
            entries.push(Landmark {
                label,
                position: Point3::new(pos[0], pos[1], pos[2]),
            });
        }
    }
    LandmarkSet::new(entries)
}

fn parse_fcsv(text: &str) -> Result<LandmarkSet> {
    let mut entries = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 4 {
            return Err(Error::parse(start, format!("fcsv row needs id,x,y,z,…: '{line}'")));
        }
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            let c = cols[k + 1].trim();
            let col_off = start + cols[..=k].iter().map(|s| s.len() + 1).sum::<usize>();
            xyz[k] = c
                .parse()
                .map_err(|_| Error::parse(col_off, format!("missing or bad coordinate '{c}'")))?;
        }
        // Slicer's column layout puts the label at index 11; shorter rows use the last column.
        let label = if cols.len() >= 12 { cols[11] } else { cols[cols.len() - 1] }.trim();
        let label = if label.is_empty() || cols.len() == 4 { cols[0].trim() } else { label };
        entries.push(Landmark {
            label: label.to_string(),
            position: Point3::new(xyz[0], xyz[1], xyz[2]),
        });
    }
    LandmarkSet::new(entries)
}

/// Writes a set in either format, positions in shortest round-trip form.
pub fn save_landmarks(set: &LandmarkSet, path: impl AsRef<Path>, format: LandmarkFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        LandmarkFormat::Fcsv => {
            let mut out = String::from(
                "# Markups fiducial file version = 4.11\n# CoordinateSystem = LPS\n\
                 # columns = id,x,y,z,ow,ox,oy,oz,vis,sel,lock,label,desc,associatedNodeID\n",
            );
            for (i, e) in set.entries.iter().enumerate() {
                let p = e.position;
                let _ = writeln!(out, "{},{:?},{:?},{:?},0,0,0,1,1,1,0,{},,", i + 1, p.x, p.y, p.z, e.label);
            }
            out
        }
        LandmarkFormat::MarkupsJson => {
            let points: Vec<Value> = set
                .entries
                .iter()
                .map(|e| serde_json::json!({"label": e.label, "position": [e.position.x, e.position.y, e.position.z]}))
                .collect();
            let doc = serde_json::json!({
                "@schema": "https://raw.githubusercontent.com/slicer/slicer/master/Modules/Loadable/Markups/Resources/Schema/markups-schema-v1.0.3.json#",
                "markups": [{"type": "Fiducial", "coordinateSystem": "LPS", "controlPoints": points}]
            });
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
    };
    write_file(path, text)
}
