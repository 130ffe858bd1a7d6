//! Plate placement, collision checking, fit metrics, heatmaps, ranking and
//! export.

mod collision;
mod export;
mod heatmap;
mod metrics;
mod model;
mod placement;
mod ranking;

pub use collision::{detect_collisions, CollisionReport, SAMPLING_BASIS};
pub use export::{export_fit_outputs, ranking_json, ExportItem, FIT_METRICS_DIR};
pub use heatmap::{distance_color, generate_heatmap, Heatmap, HeatmapRange, Histogram, HISTOGRAM_BIN_WIDTH};
pub use metrics::{
    compute_fit_report, edge_distances, live_summary, plate_wide_distances, EdgeReport, FitParams, FitReport,
    LiveSummary, DEFAULT_SAMPLES_PER_CURVE,
};
pub use model::{EdgeCurveName, PlateModel, CURVE_SURFACE_TOLERANCE};
pub use placement::{initial_landmark_placement, HistoryEntry, Placement, PlacementAction};
pub use ranking::{rank_plates, EdgeRanking, PlateRanking, RankEntry};
