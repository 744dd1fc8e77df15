//! DBSCAN over point clouds, plus k-distance diagnostics for choosing `eps`.
//!
//! Conventions:
//! - a point's neighbourhood includes the point itself, so `min_pts = 2`
//!   makes any pair closer than `eps` a cluster;
//! - distances equal to `eps` count as neighbours;
//! - a border point reachable from several clusters joins the one discovered
//!   first, i.e. the cluster whose lowest-index core point is smallest.
//!
//! Cluster ids are assigned in discovery order (ascending lowest core index)
//! and noise is labelled [`NOISE`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::RadarPoint;

pub const NOISE: i64 = -1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("invalid DBSCAN parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("k = {k} needs more than {k} points, got {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("knee detection needs at least 3 distances, got {0}")]
    TooFewDistances(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSearch {
    /// Pairwise distances, O(n²).
    #[default]
    BruteForce,
    /// Uniform grid with `eps`-sized cells.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
    /// Per-axis multipliers applied before measuring distance.
    #[serde(default)]
    pub axis_scales: Option<Vec<f64>>,
    #[serde(default)]
    pub search: NeighborSearch,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Self {
        Self {
            eps,
            min_pts,
            axis_scales: None,
            search: NeighborSearch::BruteForce,
        }
    }

    pub fn validate(&self, dims: usize) -> Result<(), ClusterError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ClusterError::InvalidParams {
                field: "eps",
                reason: format!("must be > 0, got {}", self.eps),
            });
        }
        if self.min_pts < 1 {
            return Err(ClusterError::InvalidParams {
                field: "min_pts",
                reason: "must be >= 1".into(),
            });
        }
        if let Some(scales) = &self.axis_scales {
            if scales.len() != dims {
                return Err(ClusterError::InvalidParams {
                    field: "axis_scales",
                    reason: format!("expected {dims} entries, got {}", scales.len()),
                });
            }
            if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                return Err(ClusterError::InvalidParams {
                    field: "axis_scales",
                    reason: format!("entries must be > 0, got {s}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<i64>,
    pub core: Vec<bool>,
}

impl Labeling {
    pub fn num_clusters(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| l >= 0)
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn is_noise(&self, i: usize) -> bool {
        self.labels[i] == NOISE
    }

    /// Point indices of each cluster, in cluster id order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn scaled<const D: usize>(points: &[[f64; D]], scales: Option<&[f64]>) -> Vec<[f64; D]> {
    match scales {
        None => points.to_vec(),
        Some(s) => points.iter().map(|p| std::array::from_fn(|d| p[d] * s[d])).collect(),
    }
}

fn brute_force_neighbors<const D: usize>(points: &[[f64; D]], eps2: f64) -> Vec<Vec<usize>> {
    points
        .iter()
        .map(|p| {
            points
                .iter()
                .enumerate()
                .filter(|(_, q)| dist2(p, q) <= eps2)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

fn grid_neighbors<const D: usize>(points: &[[f64; D]], eps: f64) -> Vec<Vec<usize>> {
    let cell_of = |p: &[f64; D]| -> [i64; D] { std::array::from_fn(|d| (p[d] / eps).floor() as i64) };
    let mut cells: HashMap<[i64; D], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    let offsets: Vec<[i64; D]> = (0..3_usize.pow(D as u32))
        .map(|mut code| {
            std::array::from_fn(|_| {
                let o = (code % 3) as i64 - 1;
                code /= 3;
                o
            })
        })
        .collect();
    let eps2 = eps * eps;
    points
        .iter()
        .map(|p| {
            let home = cell_of(p);
            let mut found: Vec<usize> = offsets
                .iter()
                .filter_map(|o| cells.get(&std::array::from_fn(|d| home[d] + o[d])))
                .flatten()
                .copied()
                .filter(|&j| dist2(p, &points[j]) <= eps2)
                .collect();
            found.sort_unstable();
            found
        })
        .collect()
}

/// Density-based clustering of `D`-dimensional points.
pub fn dbscan<const D: usize>(points: &[[f64; D]], params: &DbscanParams) -> Result<Labeling, ClusterError> {
    params.validate(D)?;
    let pts = scaled(points, params.axis_scales.as_deref());
    let neighbors = match params.search {
        NeighborSearch::BruteForce => brute_force_neighbors(&pts, params.eps * params.eps),
        NeighborSearch::Grid => grid_neighbors(&pts, params.eps),
    };
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= params.min_pts).collect();
    let mut labels = vec![NOISE; pts.len()];
    let mut next_id = 0_i64;
    let mut queue = Vec::new();
    for seed in 0..pts.len() {
        if !core[seed] || labels[seed] != NOISE {
            continue;
        }
        labels[seed] = next_id;
        queue.push(seed);
        while let Some(p) = queue.pop() {
            for &q in &neighbors[p] {
                if labels[q] == NOISE {
                    labels[q] = next_id;
                    if core[q] {
                        queue.push(q);
                    }
                }
            }
        }
        next_id += 1;
    }
    Ok(Labeling { labels, core })
}

/// [`dbscan`] over the `(x, y, v)` coordinates of radar points.
pub fn dbscan_points(points: &[RadarPoint], params: &DbscanParams) -> Result<Labeling, ClusterError> {
    let coords: Vec<[f64; 3]> = points.iter().map(RadarPoint::xyz).collect();
    dbscan(&coords, params)
}

/// Distance from every point to its `k`-th nearest other point, sorted ascending.
pub fn k_distance<const D: usize>(points: &[[f64; D]], k: usize) -> Result<Vec<f64>, ClusterError> {
    let n = points.len();
    if k == 0 {
        return Err(ClusterError::InvalidParams {
            field: "k",
            reason: "must be >= 1".into(),
        });
    }
    if k >= n {
        return Err(ClusterError::KTooLarge { k, n });
    }
    let mut out: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| dist2(p, q))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KneeEstimate {
    pub eps: f64,
    pub index: usize,
    /// The curve has no deviation from its chord; `eps` is the last value.
    pub degenerate: bool,
}

/// Picks the point of a k-distance curve farthest from the chord joining
/// its endpoints. Ties go to the larger index.
pub fn suggest_eps(kdist: &[f64]) -> Result<KneeEstimate, ClusterError> {
    let n = kdist.len();
    if n < 3 {
        return Err(ClusterError::TooFewDistances(n));
    }
    let (first, last) = (kdist[0], kdist[n - 1]);
    let slope = (last - first) / (n - 1) as f64;
    // Perpendicular distance to a fixed chord is proportional to the vertical gap.
    let mut best = (0, 0.0_f64);
    for (i, &d) in kdist.iter().enumerate() {
        let gap = (d - (first + slope * i as f64)).abs();
        if gap >= best.1 {
            best = (i, gap);
        }
    }
    let scale = kdist.iter().fold(0.0_f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
    if best.1 <= 1e-12 * scale {
        return Ok(KneeEstimate {
            eps: last,
            index: n - 1,
            degenerate: true,
        });
    }
    Ok(KneeEstimate {
        eps: kdist[best.0],
        index: best.0,
        degenerate: false,
    })
}

/// `2 · dimensions`.
pub fn default_min_pts(dimensions: usize) -> usize {
    2 * dimensions
}
