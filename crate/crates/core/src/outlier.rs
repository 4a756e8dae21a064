//! Local Outlier Factor scoring (Breunig et al.) and filtering.
//!
//! Neighborhoods follow the original definition: every point within the
//! k-distance belongs to the neighborhood, so ties enlarge it beyond `k`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::{distance_matrix, DistanceMatrix, PointCloud};

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 1.5;

/// Floor applied to reachability distances so duplicate points keep a finite density.
pub const MIN_REACH_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LofReport {
    pub scores: Vec<f64>,
    /// Indices with `score > threshold`, ascending.
    pub flagged: Vec<usize>,
    pub k: usize,
    pub threshold: f64,
}

impl LofReport {
    /// Re-flags the scores against a new cutoff.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.flagged = self
            .scores
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > threshold)
            .map(|(i, _)| i)
            .collect();
        self.threshold = threshold;
        self
    }

    pub fn kept(&self) -> Vec<usize> {
        let mut flagged = self.flagged.iter().peekable();
        (0..self.scores.len())
            .filter(|i| {
                if flagged.peek() == Some(&i) {
                    flagged.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// `index,score,flagged` with one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,score,flagged\n");
        let mut flagged = self.flagged.iter().peekable();
        for (i, s) in self.scores.iter().enumerate() {
            let f = if flagged.peek() == Some(&&i) {
                flagged.next();
                1
            } else {
                0
            };
            out.push_str(&format!("{i},{s},{f}\n"));
        }
        out
    }
}

struct Neighborhood {
    k_distance: f64,
    members: Vec<usize>,
}

fn neighborhood(dm: &DistanceMatrix, i: usize, k: usize) -> Neighborhood {
    let row = dm.row(i);
    let mut others: Vec<f64> = row
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, d)| *d)
        .collect();
    let (_, kth, _) = others.select_nth_unstable_by(k - 1, f64::total_cmp);
    let k_distance = *kth;
    let members = row
        .iter()
        .enumerate()
        .filter(|(j, d)| *j != i && **d <= k_distance)
        .map(|(j, _)| j)
        .collect();
    Neighborhood {
        k_distance,
        members,
    }
}

/// LOF score of every point; the report carries no flags (threshold = +inf).
pub fn lof_scores(dm: &DistanceMatrix, k: usize) -> Result<LofReport> {
    let n = dm.len();
    if k == 0 {
        return Err(Error::InvalidArgument("LOF needs k >= 1".into()));
    }
    if n <= k {
        return Err(Error::TooFewPoints { k, n });
    }
    let hoods: Vec<Neighborhood> = (0..n).into_par_iter().map(|i| neighborhood(dm, i, k)).collect();
    let lrd: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let h = &hoods[i];
            let total: f64 = h
                .members
                .iter()
                .map(|&o| hoods[o].k_distance.max(dm.get(i, o)).max(MIN_REACH_DISTANCE))
                .sum();
            h.members.len() as f64 / total
        })
        .collect();
    let scores = (0..n)
        .into_par_iter()
        .map(|i| {
            let h = &hoods[i];
            let sum: f64 = h.members.iter().map(|&o| lrd[o]).sum();
            sum / (h.members.len() as f64 * lrd[i])
        })
        .collect();
    Ok(LofReport {
        scores,
        flagged: Vec::new(),
        k,
        threshold: f64::INFINITY,
    })
}

/// Drops every point whose LOF score exceeds `threshold`, preserving row order.
pub fn filter_outliers(cloud: &PointCloud, k: usize, threshold: f64) -> Result<(PointCloud, LofReport)> {
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("LOF threshold is NaN".into()));
    }
    let report = lof_scores(&distance_matrix(cloud), k)?.with_threshold(threshold);
    if report.flagged.len() == cloud.len() {
        return Err(Error::AllFlagged);
    }
    if report.flagged.is_empty() {
        return Ok((cloud.clone(), report));
    }
    let kept = cloud.select(&report.kept())?;
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(side: usize) -> PointCloud {
        let rows: Vec<[f64; 2]> = (0..side * side)
            .map(|i| [(i % side) as f64, (i / side) as f64])
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn grid_interior_scores_near_one() {
        let c = grid(5);
        let r = lof_scores(&distance_matrix(&c), 4).unwrap();
        for y in 1..4 {
            for x in 1..4 {
                let s = r.scores[y * 5 + x];
                assert!((0.9..=1.1).contains(&s), "({x},{y}) scored {s}");
            }
        }
    }

    #[test]
    fn colinear_end_points_are_symmetric() {
        let c = PointCloud::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let r = lof_scores(&distance_matrix(&c), 2).unwrap();
        assert_eq!(r.scores[0], r.scores[2]);
    }

    #[test]
    fn too_few_points() {
        let c = PointCloud::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let err = lof_scores(&distance_matrix(&c), 3).unwrap_err();
        assert!(err.to_string().contains("need at least k+1 points"));
    }

    #[test]
    fn ties_enlarge_the_neighborhood() {
        // the center has four neighbors at distance 1
        let c = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
            .unwrap();
        let h = neighborhood(&distance_matrix(&c), 0, 2);
        assert_eq!(h.k_distance, 1.0);
        assert_eq!(h.members, vec![1, 2, 3, 4]);
    }

    #[test]
    fn duplicates_stay_finite() {
        let c = PointCloud::from_rows(&[[0.0], [0.0], [0.0], [5.0]]).unwrap();
        let r = lof_scores(&distance_matrix(&c), 2).unwrap();
        assert!(r.scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn infinite_threshold_keeps_everything() {
        let c = grid(4);
        let (kept, rep) = filter_outliers(&c, 3, f64::INFINITY).unwrap();
        assert_eq!(kept, c);
        assert!(rep.flagged.is_empty());
    }

    #[test]
    fn zero_threshold_can_flag_everything() {
        let c = PointCloud::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        assert!(matches!(filter_outliers(&c, 2, 0.0), Err(Error::AllFlagged)));
    }

    #[test]
    fn kept_and_flagged_partition() {
        let rep = LofReport {
            scores: vec![1.0, 3.0, 1.0, 2.0],
            flagged: vec![],
            k: 1,
            threshold: f64::INFINITY,
        }
        .with_threshold(1.5);
        assert_eq!(rep.flagged, vec![1, 3]);
        assert_eq!(rep.kept(), vec![0, 2]);
        assert_eq!(rep.to_csv(), "index,score,flagged\n0,1,0\n1,3,1\n2,1,0\n3,2,1\n");
    }
}
