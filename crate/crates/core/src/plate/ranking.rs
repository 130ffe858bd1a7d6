use serde::{Deserialize, Serialize};

use crate::plate::{EdgeCurveName, FitReport};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub plate_id: String,
    pub mean: f64,
    /// 1-based; tied means share the lower rank.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRanking {
    pub curve: EdgeCurveName,
    pub entries: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateRanking {
    /// Ascending by overall edge mean.
    pub entries: Vec<RankEntry>,
    /// One ranking per curve, canonical curve order.
    pub per_edge: Vec<EdgeRanking>,
}

fn rank(items: Vec<(String, f64)>) -> Vec<RankEntry> {
    let mut items: Vec<(usize, String, f64)> = items.into_iter().enumerate().map(|(i, (id, m))| (i, id, m)).collect();
    // Stable sort: equal means keep input order.
    items.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut out: Vec<RankEntry> = Vec::with_capacity(items.len());
    for (pos, (_, id, m)) in items.into_iter().enumerate() {
        let rank = match out.last() {
            Some(prev) if prev.mean == m => prev.rank,
            _ => pos + 1,
        };
        out.push(RankEntry { plate_id: id, mean: m, rank });
    }
    out
}

/// Ranks plates by overall mean edge distance and each curve by its mean.
pub fn rank_plates(reports: &[FitReport]) -> Result<PlateRanking> {
    if reports.is_empty() {
        return Err(Error::invalid("cannot rank an empty list of fit reports"));
    }
    let entries = rank(reports.iter().map(|r| (r.plate_id.clone(), r.overall_edge_mean)).collect());
    let per_edge = EdgeCurveName::ALL
        .iter()
        .map(|&curve| -> Result<EdgeRanking> {
            let items = reports
                .iter()
                .map(|r| {
                    r.edge(curve)
                        .map(|e| (r.plate_id.clone(), e.mean))
                        .ok_or_else(|| Error::invalid(format!("report for {} lacks curve {curve}", r.plate_id)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EdgeRanking { curve, entries: rank(items) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlateRanking { entries, per_edge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plate::{CollisionReport, EdgeReport};

    fn report(id: &str, means: [f64; 5]) -> FitReport {
        let edge_reports: Vec<EdgeReport> = EdgeCurveName::ALL
            .iter()
            .zip(means)
            .map(|(&c, m)| EdgeReport {
                curve_name: c,
                sample_points: vec![],
                projected_points: vec![],
                point_distances: vec![m; 10],
                mean: m,
            })
            .collect();
        FitReport {
            plate_id: id.into(),
            plate_wide: vec![],
            overall_edge_mean: means.iter().sum::<f64>() / 5.0,
            edge_reports,
            collision: CollisionReport::new(1, vec![]).unwrap(),
        }
    }

    fn with_overall(id: &str, overall: f64) -> FitReport {
        let mut r = report(id, [overall; 5]);
        r.overall_edge_mean = overall;
        r
    }

    #[test]
    fn close_means_rank_in_order() {
        let r = rank_plates(&[with_overall("b", 0.761), with_overall("a", 0.736)]).unwrap();
        let got: Vec<(&str, usize)> = r.entries.iter().map(|e| (e.plate_id.as_str(), e.rank)).collect();
        assert_eq!(got, vec![("a", 1), ("b", 2)]);
    }

    #[test]
    fn ties_share_rank_and_keep_input_order() {
        let r = rank_plates(&[with_overall("x", 1.0), with_overall("y", 0.5), with_overall("z", 1.0), with_overall("w", 2.0)]).unwrap();
        let got: Vec<(&str, usize)> = r.entries.iter().map(|e| (e.plate_id.as_str(), e.rank)).collect();
        assert_eq!(got, vec![("y", 1), ("x", 2), ("z", 2), ("w", 4)]);
    }

    #[test]
    fn per_edge_and_contract() {
        let r = rank_plates(&[report("p", [1.0, 0.2, 3.0, 1.0, 1.0]), report("q", [0.5, 0.4, 3.0, 1.0, 1.0])]).unwrap();
        assert_eq!(r.per_edge.len(), 5);
        assert_eq!(r.per_edge[0].entries[0].plate_id, "q");
        assert_eq!(r.per_edge[1].entries[0].plate_id, "p");
        assert_eq!(r.per_edge[2].entries.iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 1]);
        assert_eq!(rank_plates(&[with_overall("solo", 3.0)]).unwrap().entries[0].rank, 1);
        assert!(rank_plates(&[]).is_err());
    }
}
