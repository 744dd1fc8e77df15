//! FMCW radar simulation and processing.
//!
//! The crate follows the usual chain:
//!
//! ```text
//! ChirpParams ─► simulate_frame ─► range_fft ─► doppler_fft ─► RangeDopplerMap / RadarCube
//!                                                                  │
//!                 Tracker ◄─ cluster centroids ◄─ dbscan ◄─ point cloud ◄─ detect_peaks
//! ```
//!
//! Each stage lives in its own module and is a pure function of its inputs,
//! except the [`track::Tracker`], which owns track state across frames.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod detect;
pub mod dsp;
pub mod scene;
pub mod track;
pub mod waveform;

/// Speed of light in vacuum, m/s. Functions that need `c` take it as an
/// argument so callers can reproduce textbook numbers computed with `3e8`.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cluster::{dbscan, default_min_pts, k_distance, suggest_eps, DbscanParams, Labeling};
pub use detect::{detect_peaks, to_point_cloud, DetectPolicy, Detection, RadarPoint};
pub use dsp::{
    angle_fft, doppler_fft, normalize_heatmap, process_frame, range_fft, DspOptions, Heatmap, RadarCube,
    RangeDopplerMap,
};
pub use scene::{simulate_frame, RawFrameCube, SceneConfig, Target};
pub use track::{Track, TrackStatus, Tracker, TrackerConfig};
pub use waveform::{ChirpParams, Representation};
