//! Peak picking on range-Doppler maps and radar cubes, and the conversion of
//! picked cells into a Cartesian point cloud.
//!
//! NOTE: a [`RadarPoint`]'s `z` coordinate is the radial velocity in m/s,
//! not a height. Clustering and tracking treat the cloud as `(x, y, v)`.

use ndarray::{ArrayView3, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{centered_bin, RadarCube, RangeDopplerMap};

/// Scale factor that makes the MAD a consistent estimator of a Gaussian sigma.
pub const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("angle bin {angle_bin} maps outside the visible region (|sin θ| > 1)")]
    InvalidAngleBin { angle_bin: usize },
    #[error("detection at ({range_bin}, {doppler_bin}, {angle_bin}) is outside the {shape:?} grid")]
    OutOfGrid {
        range_bin: usize,
        doppler_bin: usize,
        angle_bin: usize,
        shape: (usize, usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectPolicy {
    /// Multiples of the (Gaussian-scaled) MAD above the median.
    pub threshold_factor: f64,
    pub max_peaks: usize,
    /// Peaks more than this many dB below the strongest cell are dropped.
    /// `None` keeps everything above the robust threshold.
    pub dynamic_range_db: Option<f64>,
}

impl Default for DetectPolicy {
    fn default() -> Self {
        Self {
            threshold_factor: 8.0,
            max_peaks: 64,
            dynamic_range_db: Some(30.0),
        }
    }
}

/// A picked cell. For 2-D maps `angle_bin` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub angle_bin: usize,
    pub magnitude: f64,
}

/// Anything peak picking can run over, viewed as `[range][doppler][angle]`.
pub trait PeakSource {
    fn grid(&self) -> ArrayView3<'_, f64>;
}

impl PeakSource for RangeDopplerMap {
    fn grid(&self) -> ArrayView3<'_, f64> {
        self.magnitudes.view().insert_axis(Axis(2))
    }
}

impl PeakSource for RadarCube {
    fn grid(&self) -> ArrayView3<'_, f64> {
        self.magnitudes.view()
    }
}

impl PeakSource for ndarray::Array3<f64> {
    fn grid(&self) -> ArrayView3<'_, f64> {
        self.view()
    }
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// `median + factor · 1.4826 · MAD` over all values.
pub fn detection_threshold<'a>(values: impl IntoIterator<Item = &'a f64>, factor: f64) -> f64 {
    let mut v: Vec<f64> = values.into_iter().copied().collect();
    let med = median(&mut v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    let mad = median(&mut dev);
    med + factor * MAD_TO_SIGMA * mad
}

fn is_strict_local_max(grid: &ArrayView3<f64>, idx: [usize; 3]) -> bool {
    let dims = grid.dim();
    let dims = [dims.0, dims.1, dims.2];
    let center = grid[idx];
    let range = |axis: usize| {
        let lo = idx[axis].saturating_sub(1);
        let hi = (idx[axis] + 1).min(dims[axis] - 1);
        lo..=hi
    };
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                if [i, j, k] != idx && grid[[i, j, k]] >= center {
                    return false;
                }
            }
        }
    }
    true
}

/// Strict local maxima (8- or 26-neighbourhood, no wrap-around at the
/// edges) that exceed the robust threshold and the dynamic-range floor,
/// strongest first, ties broken by
/// ascending `(range, doppler, angle)` index.
pub fn detect_peaks<S: PeakSource + ?Sized>(source: &S, policy: &DetectPolicy) -> Vec<Detection> {
    let grid = source.grid();
    if grid.is_empty() || policy.max_peaks == 0 {
        return Vec::new();
    }
    let mut threshold = detection_threshold(grid.iter(), policy.threshold_factor);
    if let Some(db) = policy.dynamic_range_db {
        let peak = grid.iter().copied().fold(0.0, f64::max);
        threshold = threshold.max(peak * 10f64.powf(-db / 20.0));
    }
    let mut found: Vec<Detection> = grid
        .indexed_iter()
        .filter(|(_, &v)| v > threshold)
        .filter(|((r, d, a), _)| is_strict_local_max(&grid, [*r, *d, *a]))
        .map(|((r, d, a), &v)| Detection {
            range_bin: r,
            doppler_bin: d,
            angle_bin: a,
            magnitude: v,
        })
        .collect();
    found.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then((a.range_bin, a.doppler_bin, a.angle_bin).cmp(&(b.range_bin, b.doppler_bin, b.angle_bin)))
    });
    found.truncate(policy.max_peaks);
    found
}

/// Fills in `angle_bin` for range-Doppler detections with the strongest
/// visible angle bin of the radar cube at the same cell.
pub fn assign_angles(detections: &[Detection], cube: &RadarCube) -> Vec<Detection> {
    detections
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for a in 0..cube.angle_fft_size {
                if cube.angle_sine(a).is_none() {
                    continue;
                }
                let v = cube.magnitudes[[d.range_bin, d.doppler_bin, a]];
                if best.is_none_or(|(_, m)| v > m) {
                    best = Some((a, v));
                }
            }
            Detection {
                angle_bin: best.map_or(cube.angle_fft_size / 2, |(a, _)| a),
                ..*d
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleAxis {
    pub fft_size: usize,
    pub spacing_wavelengths: f64,
}

/// Bin-to-unit conversions for a detection grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub range_bin_m: f64,
    pub velocity_bin_mps: f64,
    /// Without an angle axis every detection is placed at broadside.
    pub angle: Option<AngleAxis>,
}

impl GridAxes {
    pub fn from_map(map: &RangeDopplerMap, cube: Option<&RadarCube>) -> Self {
        Self {
            range_bins: map.range_bins(),
            doppler_bins: map.doppler_bins(),
            range_bin_m: map.range_bin_m,
            velocity_bin_mps: map.doppler_velocity_resolution,
            angle: cube.map(|c| AngleAxis {
                fft_size: c.angle_fft_size,
                spacing_wavelengths: c.spacing_wavelengths,
            }),
        }
    }

    fn angle_bins(&self) -> usize {
        self.angle.map_or(1, |a| a.fft_size)
    }

    pub fn range(&self, bin: usize) -> f64 {
        bin as f64 * self.range_bin_m
    }

    pub fn velocity(&self, shifted_bin: usize) -> f64 {
        centered_bin(shifted_bin, self.doppler_bins) as f64 * self.velocity_bin_mps
    }

    /// Azimuth in degrees.
    pub fn angle(&self, angle_bin: usize) -> Result<f64, DetectError> {
        let Some(axis) = self.angle else {
            return Ok(0.0);
        };
        let u = centered_bin(angle_bin, axis.fft_size) as f64 / axis.fft_size as f64;
        let s = u / axis.spacing_wavelengths;
        if (-1.0..=1.0).contains(&s) {
            Ok(s.asin().to_degrees())
        } else {
            Err(DetectError::InvalidAngleBin { angle_bin })
        }
    }
}

/// Cartesian point; `z` is radial velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub magnitude: f64,
}

impl RadarPoint {
    /// `x = R cos θ`, `y = R sin θ`, `z = v`, with θ in degrees from the x-axis.
    pub fn from_polar(range: f64, azimuth_deg: f64, velocity: f64, magnitude: f64) -> Self {
        let theta = azimuth_deg.to_radians();
        Self {
            x: range * theta.cos(),
            y: range * theta.sin(),
            z: velocity,
            magnitude,
        }
    }

    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

pub fn to_point_cloud(detections: &[Detection], axes: &GridAxes) -> Result<Vec<RadarPoint>, DetectError> {
    let shape = (axes.range_bins, axes.doppler_bins, axes.angle_bins());
    detections
        .iter()
        .map(|d| {
            if d.range_bin >= shape.0 || d.doppler_bin >= shape.1 || d.angle_bin >= shape.2 {
                return Err(DetectError::OutOfGrid {
                    range_bin: d.range_bin,
                    doppler_bin: d.doppler_bin,
                    angle_bin: d.angle_bin,
                    shape,
                });
            }
            let theta = axes.angle(d.angle_bin)?;
            Ok(RadarPoint::from_polar(
                axes.range(d.range_bin),
                theta,
                axes.velocity(d.doppler_bin),
                d.magnitude,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;

    fn policy(k: f64, n: usize) -> DetectPolicy {
        DetectPolicy {
            threshold_factor: k,
            max_peaks: n,
            dynamic_range_db: None,
        }
    }

    #[test]
    fn dynamic_range_floor_drops_weak_peaks() {
        let mut g = Array3::zeros((9, 9, 1));
        g[[2, 2, 0]] = 1000.0;
        g[[6, 6, 0]] = 20.0;
        assert_eq!(detect_peaks(&g, &policy(8.0, 10)).len(), 2);
        let floored = DetectPolicy {
            dynamic_range_db: Some(30.0),
            ..policy(8.0, 10)
        };
        let kept = detect_peaks(&g, &floored);
        assert_eq!(kept.len(), 1);
        assert_eq!((kept[0].range_bin, kept[0].doppler_bin), (2, 2));
    }

    #[test]
    fn median_and_threshold() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        // median 2, deviations {1,0,1,2} -> MAD 1
        let t = detection_threshold(&[1.0, 2.0, 3.0, 4.0, 2.0], 2.0);
        assert!((t - (2.0 + 2.0 * MAD_TO_SIGMA)).abs() < 1e-12);
    }

    #[test]
    fn constant_map_has_no_peaks() {
        let g = Array3::from_elem((8, 8, 1), 3.0);
        assert!(detect_peaks(&g, &policy(0.0, 10)).is_empty());
    }

    #[test]
    fn equal_peaks_break_ties_by_index() {
        let mut g = Array3::zeros((10, 10, 1));
        g[[7, 2, 0]] = 5.0;
        g[[2, 7, 0]] = 5.0;
        let found = detect_peaks(&g, &policy(8.0, 1));
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].range_bin, found[0].doppler_bin), (2, 7));
        let both = detect_peaks(&g, &policy(8.0, 5));
        assert_eq!(both.len(), 2);
    }

    #[test]
    fn plateau_is_not_a_strict_maximum() {
        let mut g = Array3::zeros((6, 6, 1));
        g[[2, 2, 0]] = 4.0;
        g[[2, 3, 0]] = 4.0;
        g[[5, 5, 0]] = 1.0;
        let found = detect_peaks(&g, &policy(1.0, 5));
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].range_bin, found[0].doppler_bin), (5, 5));
    }

    #[test]
    fn three_d_neighbourhood() {
        let mut g = Array3::zeros((5, 5, 5));
        g[[2, 2, 2]] = 3.0;
        g[[3, 3, 3]] = 2.0; // diagonal neighbour, suppressed
        g[[0, 4, 0]] = 1.0;
        let found = detect_peaks(&g, &policy(1.0, 10));
        let cells: Vec<_> = found
            .iter()
            .map(|d| (d.range_bin, d.doppler_bin, d.angle_bin))
            .collect();
        assert_eq!(cells, vec![(2, 2, 2), (0, 4, 0)]);
    }

    #[test]
    fn point_cloud_examples() {
        let p = RadarPoint::from_polar(15.0, 30.0, 2.0, 1.0);
        assert!((p.x - 12.990_381_056_766_58).abs() < 1e-9);
        assert!((p.y - 7.5).abs() < 1e-12);
        assert_eq!(p.z, 2.0);
        let q = RadarPoint::from_polar(35.0, 60.0, 3.0, 1.0);
        assert!((q.x - 17.5).abs() < 1e-12);
        assert!((q.y - 30.310_889_132_455_35).abs() < 1e-9);
        let r = RadarPoint::from_polar(9.0, 0.0, -1.0, 1.0);
        assert_eq!((r.x, r.y), (9.0, 0.0));
    }

    #[test]
    fn point_cloud_from_bins() {
        let axes = GridAxes {
            range_bins: 100,
            doppler_bins: 32,
            range_bin_m: 0.5,
            velocity_bin_mps: 0.25,
            angle: Some(AngleAxis {
                fft_size: 16,
                spacing_wavelengths: 0.25,
            }),
        };
        let det = |r, d, a| Detection {
            range_bin: r,
            doppler_bin: d,
            angle_bin: a,
            magnitude: 1.0,
        };
        let pts = to_point_cloud(&[det(20, 20, 8)], &axes).unwrap();
        assert_eq!(pts[0].xyz(), [10.0, 0.0, 1.0]);
        assert!(matches!(
            to_point_cloud(&[det(20, 20, 0)], &axes),
            Err(DetectError::InvalidAngleBin { angle_bin: 0 })
        ));
        assert!(matches!(
            to_point_cloud(&[det(100, 0, 8)], &axes),
            Err(DetectError::OutOfGrid { .. })
        ));
        let flat = GridAxes { angle: None, ..axes };
        assert_eq!(
            to_point_cloud(&[det(4, 16, 0)], &flat).unwrap()[0].xyz(),
            [2.0, 0.0, 0.0]
        );
    }

    proptest! {
        #[test]
        fn polar_round_trip(r in 1e-3f64..1e4, theta in -89.9f64..89.9) {
            let p = RadarPoint::from_polar(r, theta, 0.0, 1.0);
            prop_assert!((p.range() - r).abs() <= 1e-9 * r);
            prop_assert!((p.azimuth_deg() - theta).abs() <= 1e-9 * theta.abs().max(1.0));
        }

        #[test]
        fn raising_threshold_never_adds(
            cells in proptest::collection::vec(0.0f64..10.0, 64),
            k1 in 0.0f64..6.0,
            dk in 0.0f64..6.0,
            max_peaks in 1usize..20,
        ) {
            let g = Array3::from_shape_vec((8, 8, 1), cells).unwrap();
            let low = detect_peaks(&g, &policy(k1, max_peaks));
            let high = detect_peaks(&g, &policy(k1 + dk, max_peaks));
            prop_assert!(high.len() <= low.len());
            for d in &high {
                prop_assert!(low.contains(d));
            }
            let threshold = detection_threshold(g.iter(), k1);
            prop_assert!(low.len() <= max_peaks);
            prop_assert!(low.iter().all(|d| d.magnitude >= threshold));
        }
    }
}
