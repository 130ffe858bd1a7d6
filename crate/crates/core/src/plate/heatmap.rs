use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mesh::io::{fmt6, ply_text, write_file};
use crate::mesh::TriangleMesh;
use crate::{Error, Result};

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.25;

/// Display range of the colour map (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for HeatmapRange {
    fn default() -> Self {
        Self { lo: -5.0, hi: 5.0 }
    }
}

impl HeatmapRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("heatmap range needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }
}

/// Red at `lo`, green at the midpoint, blue at `hi`; clamped outside.
pub fn distance_color(d: f64, range: &HeatmapRange) -> [u8; 3] {
    let t = ((d - range.lo) / (range.hi - range.lo)).clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        (1.0 - 2.0 * t, 2.0 * t, 0.0)
    } else {
        (0.0, 2.0 - 2.0 * t, 2.0 * t - 1.0)
    };
    let q = |c: f64| (255.0 * c).round() as u8;
    [q(r), q(g), q(b)]
}

/// Fixed-width histogram over `[lo, hi]` with under/overflow bins. A value
/// equal to `hi` falls in the last regular bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub underflow: u64,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram {
    pub fn build(values: &[f64], range: &HeatmapRange, bin_width: f64) -> Histogram {
        let bins = (((range.hi - range.lo) / bin_width) - 1e-9).ceil().max(1.0) as usize;
        let mut h = Histogram {
            lo: range.lo,
            hi: range.hi,
            bin_width,
            underflow: 0,
            counts: vec![0; bins],
            overflow: 0,
        };
        for &v in values {
            if v < range.lo {
                h.underflow += 1;
            } else if v > range.hi || v.is_nan() {
                h.overflow += 1;
            } else {
                let i = (((v - range.lo) / bin_width).floor() as usize).min(bins - 1);
                h.counts[i] += 1;
            }
        }
        h
    }

    pub fn total(&self) -> u64 {
        self.underflow + self.overflow + self.counts.iter().sum::<u64>()
    }

    fn bin_edges(&self, i: usize) -> (f64, f64) {
        let lo = self.lo + self.bin_width * i as f64;
        (lo, (lo + self.bin_width).min(self.hi))
    }

    /// `bin,lower_mm,upper_mm,count`; the open ends of the outer bins are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,lower_mm,upper_mm,count\n");
        let _ = writeln!(s, "underflow,,{},{}", fmt6(self.lo), self.underflow);
        for (i, c) in self.counts.iter().enumerate() {
            let (a, b) = self.bin_edges(i);
            let _ = writeln!(s, "{i},{},{},{c}", fmt6(a), fmt6(b));
        }
        let _ = writeln!(s, "overflow,{},,{}", fmt6(self.hi), self.overflow);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub range: HeatmapRange,
    pub colors: Vec<[u8; 3]>,
    pub histogram: Histogram,
}

impl Heatmap {
    /// PLY with the per-vertex `distance` scalar and `red/green/blue` colours.
    pub fn ply_text(&self, mesh: &TriangleMesh, distances: &[f64]) -> String {
        ply_text(mesh, Some(distances), Some(&self.colors))
    }

    pub fn write(&self, mesh: &TriangleMesh, distances: &[f64], ply: &Path, histogram_csv: &Path) -> Result<()> {
        write_file(ply, self.ply_text(mesh, distances))?;
        write_file(histogram_csv, self.histogram.to_csv())
    }
}

pub fn generate_heatmap(mesh: &TriangleMesh, distances: &[f64], range: HeatmapRange) -> Result<Heatmap> {
    let range = HeatmapRange::new(range.lo, range.hi)?;
    if distances.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "{} distances for {} vertices",
            distances.len(),
            mesh.vertex_count()
        )));
    }
    Ok(Heatmap {
        range,
        colors: distances.iter().map(|d| distance_color(*d, &range)).collect(),
        histogram: Histogram::build(distances, &range, HISTOGRAM_BIN_WIDTH),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::load_ply_with_scalars;
    use crate::synthetic;

    #[test]
    fn colour_anchors() {
        let r = HeatmapRange::default();
        assert_eq!(distance_color(-5.0, &r), [255, 0, 0]);
        assert_eq!(distance_color(0.0, &r), [0, 255, 0]);
        assert_eq!(distance_color(5.0, &r), [0, 0, 255]);
        assert_eq!(distance_color(-50.0, &r), [255, 0, 0]);
        assert_eq!(distance_color(7.0, &r), [0, 0, 255]);
        assert_eq!(distance_color(-2.5, &r), [128, 128, 0]);
    }

    #[test]
    fn histogram_bins() {
        let r = HeatmapRange::default();
        let h = Histogram::build(&[-5.0, -4.75, -4.9, 0.0, 4.99, 5.0, 5.01, -5.01], &r, 0.25);
        assert_eq!(h.counts.len(), 40);
        assert_eq!((h.underflow, h.overflow), (1, 1));
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[20], 1);
        assert_eq!(h.counts[39], 2);
        assert_eq!(h.total(), 8);
        let csv = h.to_csv();
        assert!(csv.starts_with("bin,lower_mm,upper_mm,count\nunderflow,,-5.000000,1\n0,-5.000000,-4.750000,2\n"));
        assert!(csv.ends_with("39,4.750000,5.000000,2\noverflow,5.000000,,1\n"));
    }

    #[test]
    fn heatmap_file_round_trips_scalars() {
        let m = synthetic::unit_cube();
        let d: Vec<f64> = m.vertices().iter().map(|p| p.z * 3.0 - 1.5).collect();
        let h = generate_heatmap(&m, &d, HeatmapRange::default()).unwrap();
        assert_eq!(h.histogram.total(), 8);
        let dir = tempfile::tempdir().unwrap();
        h.write(&m, &d, &dir.path().join("h.ply"), &dir.path().join("h.csv")).unwrap();
        let (_, s) = load_ply_with_scalars(dir.path().join("h.ply")).unwrap();
        for (a, b) in s.unwrap().iter().zip(&d) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(generate_heatmap(&m, &d, HeatmapRange { lo: 1.0, hi: 1.0 }).is_err());
        assert!(generate_heatmap(&m, &d[..3], HeatmapRange::default()).is_err());
    }
}
