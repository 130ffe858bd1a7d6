use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::mesh::io::{fmt6, write_file};
use crate::mesh::Transform;
use crate::plate::{generate_heatmap, FitReport, HeatmapRange, PlateModel, PlateRanking, RankEntry};
use crate::{Error, Result, RigidTransform};

/// Output folder, relative to the export root.
pub const FIT_METRICS_DIR: &str = "fit_output/fit_metrics";

/// One plate to export: its model, final pose and computed report.
#[derive(Debug, Clone, Copy)]
pub struct ExportItem<'a> {
    pub plate: &'a PlateModel,
    pub transform: &'a RigidTransform,
    pub report: &'a FitReport,
}

fn raw(v: f64) -> Box<RawValue> {
    RawValue::from_string(fmt6(v)).expect("fixed-point numbers are valid JSON")
}

#[derive(Serialize)]
struct RankJson<'a> {
    rank: usize,
    plate_id: &'a str,
    mean_mm: Box<RawValue>,
}

#[derive(Serialize)]
struct EdgeRankJson<'a> {
    curve: &'a str,
    ranking: Vec<RankJson<'a>>,
}

#[derive(Serialize)]
struct RankingJson<'a> {
    case_id: &'a str,
    basis: &'static str,
    ranking: Vec<RankJson<'a>>,
    per_edge: Vec<EdgeRankJson<'a>>,
}

fn rank_rows(entries: &[RankEntry]) -> Vec<RankJson<'_>> {
    entries
        .iter()
        .map(|e| RankJson {
            rank: e.rank,
            plate_id: &e.plate_id,
            mean_mm: raw(e.mean),
        })
        .collect()
}

/// Canonical `ranking.json` text: entries in rank order, numbers with six
/// decimals, trailing newline.
pub fn ranking_json(case_id: &str, ranking: &PlateRanking) -> String {
    let doc = RankingJson {
        case_id,
        basis: "overall_edge_mean",
        ranking: rank_rows(&ranking.entries),
        per_edge: ranking
            .per_edge
            .iter()
            .map(|e| EdgeRankJson {
                curve: e.curve.as_str(),
                ranking: rank_rows(&e.entries),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("ranking serializes");
    s.push('\n');
    s
}

fn plate_wide_csv(report: &FitReport) -> String {
    let mut s = String::from("vertex_id,signed_mm\n");
    for (i, d) in report.plate_wide.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt6(*d));
    }
    s
}

fn edge_csv(report: &FitReport) -> String {
    let mut s = String::from("curve,sample_index,distance_mm,projected_x,projected_y,projected_z\n");
    for e in &report.edge_reports {
        for (i, (d, p)) in e.point_distances.iter().zip(&e.projected_points).enumerate() {
            let _ = writeln!(s, "{},{i},{},{},{},{}", e.curve_name, fmt6(*d), fmt6(p.x), fmt6(p.y), fmt6(p.z));
        }
    }
    s
}

#[derive(Serialize)]
struct CurveJson<'a> {
    curve: &'a str,
    mean_mm: Box<RawValue>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    plate_id: &'a str,
    vendor: &'a str,
    size_class: &'a str,
    overall_edge_mean_mm: Box<RawValue>,
    edges: Vec<CurveJson<'a>>,
    collision_count: usize,
    total_points: usize,
    collision_percent: String,
    collision_message: String,
    sampling_basis: &'a str,
    transform: Vec<Vec<Box<RawValue>>>,
}

fn summary_json(item: &ExportItem<'_>) -> String {
    let r = item.report;
    let doc = SummaryJson {
        plate_id: &r.plate_id,
        vendor: item.plate.vendor(),
        size_class: item.plate.size_class(),
        overall_edge_mean_mm: raw(r.overall_edge_mean),
        edges: r
            .edge_reports
            .iter()
            .map(|e| CurveJson {
                curve: e.curve_name.as_str(),
                mean_mm: raw(e.mean),
            })
            .collect(),
        collision_count: r.collision.collision_count,
        total_points: r.collision.total_points,
        collision_percent: r.collision.percent_text(),
        collision_message: r.collision.message(),
        sampling_basis: &r.collision.sampling_basis,
        transform: item.transform.to_rows().iter().map(|row| row.iter().map(|v| raw(*v)).collect()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
    s.push('\n');
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) || id.starts_with('.') {
        return Err(Error::invalid(format!("plate id '{id}' is not usable as a directory name")));
    }
    Ok(())
}

/// Writes the fit-metrics tree under `out_dir` and returns the written
/// paths. Any previous tree at that location is replaced, so repeated
/// exports of identical inputs are byte-identical.
///
/// `inputs` maps input names to content hashes and is recorded verbatim in
/// `manifest.json`.
pub fn export_fit_outputs(
    case_id: &str,
    items: &[ExportItem<'_>],
    ranking: &PlateRanking,
    range: HeatmapRange,
    inputs: &BTreeMap<String, String>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let root = out_dir.join(FIT_METRICS_DIR);
    for item in items {
        check_id(&item.report.plate_id)?;
        if item.report.plate_id != item.plate.id() {
            return Err(Error::invalid(format!(
                "report for '{}' paired with plate '{}'",
                item.report.plate_id,
                item.plate.id()
            )));
        }
    }
    if root.exists() {
        fs::remove_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    }

    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for item in items {
        let r = item.report;
        let placed = item.plate.mesh().transformed(item.transform);
        let heat = generate_heatmap(&placed, &r.plate_wide, range)?;
        let id = &r.plate_id;
        files.insert(format!("{id}/plate_wide_distances.csv"), plate_wide_csv(r).into_bytes());
        files.insert(format!("{id}/edge_distances.csv"), edge_csv(r).into_bytes());
        files.insert(format!("{id}/heatmap.ply"), heat.ply_text(&placed, &r.plate_wide).into_bytes());
        files.insert(format!("{id}/histogram.csv"), heat.histogram.to_csv().into_bytes());
        files.insert(format!("{id}/summary.json"), summary_json(item).into_bytes());
    }
    files.insert("ranking.json".into(), ranking_json(case_id, ranking).into_bytes());

    let mut manifest = serde_json::Map::new();
    manifest.insert("schema_version".into(), 1.into());
    manifest.insert("case_id".into(), case_id.into());
    manifest.insert(
        "heatmap_range_mm".into(),
        serde_json::Value::Array(vec![fmt6(range.lo).into(), fmt6(range.hi).into()]),
    );
    manifest.insert("inputs".into(), serde_json::to_value(inputs).expect("string map"));
    let hashes: BTreeMap<&String, String> = files.iter().map(|(k, v)| (k, sha256_hex(v))).collect();
    manifest.insert("files".into(), serde_json::to_value(hashes).expect("string map"));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    files.insert("manifest.json".into(), text.into_bytes());

    let mut written = Vec::with_capacity(files.len());
    for (rel, bytes) in files {
        let path = root.join(rel);
        write_file(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}
