//! simulate → process → detect → cluster → track, frame by frame.
//!
//! Frames are simulated, processed, detected and clustered in parallel;
//! tracking then walks the frames in order. Output files depend only on the
//! config and seed, so two runs produce identical trees.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fmcw_core::cluster::{dbscan_points, Labeling};
use fmcw_core::detect::{assign_angles, GridAxes};
use fmcw_core::scene::{frame_seed, RawFrameCube};
use fmcw_core::track::{Track, TrackStatus};
use fmcw_core::{
    detect_peaks, normalize_heatmap, process_frame, simulate_frame, to_point_cloud, DbscanParams, DetectPolicy,
    DspOptions, RadarPoint, RangeDopplerMap, Tracker,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::io::{self, PointRow, TrackRow};

/// Raw cube for `frame`; noise uses a per-frame seed derived from `seed`.
pub fn simulate(config: &PipelineConfig, seed: u64, frame: usize) -> Result<RawFrameCube> {
    let scene = config.scene_at(frame, frame_seed(seed, frame as u64));
    simulate_frame(&scene, &config.chirp).map_err(|e| CliError::stage("simulate", format!("frame {frame}: {e}")))
}

/// Range-Doppler map and point cloud of one cube. Without a multi-channel
/// radar cube every point sits at broadside.
pub fn detect(
    dsp: &DspOptions,
    policy: &DetectPolicy,
    cube: &RawFrameCube,
) -> Result<(RangeDopplerMap, Vec<RadarPoint>)> {
    let frame = process_frame(cube, dsp).map_err(|e| CliError::stage("process", e))?;
    let detections = detect_peaks(&frame.rd_map, policy);
    let detections = assign_angles(&detections, &frame.radar_cube);
    let axes = GridAxes::from_map(&frame.rd_map, Some(&frame.radar_cube));
    let points = to_point_cloud(&detections, &axes).map_err(|e| CliError::stage("detect", e))?;
    Ok((frame.rd_map, points))
}

pub fn cluster(params: &DbscanParams, points: &[RadarPoint]) -> Result<Labeling> {
    dbscan_points(points, params).map_err(|e| CliError::stage("cluster", e))
}

/// Mean `(x, y)` of each cluster, in cluster id order; noise is skipped.
pub fn centroids(points: &[RadarPoint], labels: &Labeling) -> Vec<[f64; 2]> {
    labels
        .members()
        .iter()
        .map(|m| {
            let n = m.len() as f64;
            let (sx, sy) = m
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &i| (sx + points[i].x, sy + points[i].y));
            [sx / n, sy / n]
        })
        .collect()
}

/// Per-point track ids given the track id assigned to each cluster centroid.
pub fn point_track_ids(labels: &Labeling, cluster_tracks: &[u64]) -> Vec<Option<u64>> {
    labels
        .labels
        .iter()
        .map(|&l| (l >= 0).then(|| cluster_tracks[l as usize]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frame: u64,
    pub detections: usize,
    pub clusters: usize,
    pub noise_points: usize,
    pub live_tracks: usize,
    pub confirmed_tracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub track_id: u64,
    pub x_m: f64,
    pub y_m: f64,
    pub vx_mps: f64,
    pub vy_mps: f64,
    pub hits: u32,
}

impl TrackSummary {
    fn of(t: &Track) -> Self {
        Self {
            track_id: t.id,
            x_m: t.state[0],
            y_m: t.state[1],
            vx_mps: t.state[2],
            vy_mps: t.state[3],
            hits: t.hits,
        }
    }
}

/// Run record written as `manifest.json`. Holds no timestamps or absolute
/// paths so that reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
    pub parameter_hash: String,
    pub num_frames: usize,
    pub frames: Vec<FrameSummary>,
    pub final_confirmed_tracks: Vec<TrackSummary>,
    /// SHA-256 of every other output file, keyed by `/`-separated relative path.
    pub files: BTreeMap<String, String>,
}

pub fn frame_dir_name(frame: usize) -> String {
    format!("frame_{frame:04}")
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn relative_key(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

struct FrameProducts {
    map: RangeDopplerMap,
    points: Vec<RadarPoint>,
    labels: Labeling,
}

/// Runs every stage for all frames and writes the artifacts under `out`.
pub fn run_pipeline(config: &PipelineConfig, seed: u64, out: &Path) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let products: Vec<FrameProducts> = (0..config.num_frames)
        .into_par_iter()
        .map(|f| {
            let cube = simulate(config, seed, f)?;
            let (map, points) = detect(&config.dsp, &config.detect, &cube)?;
            let labels = cluster(&config.cluster.params(), &points)?;
            Ok(FrameProducts { map, points, labels })
        })
        .collect::<Result<_>>()?;

    let mut tracker = Tracker::new(config.tracker_config()).map_err(|e| CliError::stage("track", e))?;
    let mut frames = Vec::with_capacity(products.len());
    let mut per_frame_tracks = Vec::with_capacity(products.len());
    for (f, p) in products.iter().enumerate() {
        let step = tracker
            .step(&centroids(&p.points, &p.labels))
            .map_err(|e| CliError::stage("track", format!("frame {f}: {e}")))?;
        let live = step.tracks.iter().filter(|t| t.is_live()).count();
        let confirmed = step
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .count();
        frames.push(FrameSummary {
            frame: f as u64,
            detections: p.points.len(),
            clusters: p.labels.num_clusters(),
            noise_points: p.labels.labels.iter().filter(|&&l| l < 0).count(),
            live_tracks: live,
            confirmed_tracks: confirmed,
        });
        per_frame_tracks.push(step);
    }

    let written: Vec<Vec<PathBuf>> = products
        .par_iter()
        .zip(per_frame_tracks.par_iter())
        .enumerate()
        .map(|(f, (p, step))| {
            let dir = out.join(frame_dir_name(f));
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let mut files = Vec::new();
            let mut emit = |name: &str| {
                let path = dir.join(name);
                files.push(path.clone());
                path
            };
            io::write_rdmap_csv(&p.map, &emit("rdmap.csv"))?;
            io::write_heatmap_pgm(&normalize_heatmap(&p.map), &emit("heatmap.pgm"))?;
            let track_ids = point_track_ids(&p.labels, &step.detection_tracks);
            let rows: Vec<PointRow> = p
                .points
                .iter()
                .zip(&p.labels.labels)
                .zip(track_ids)
                .map(|((pt, &cluster), track_id)| PointRow {
                    frame: f as u64,
                    point: *pt,
                    cluster,
                    track_id,
                })
                .collect();
            io::write_point_cloud_csv(&rows, &emit("points.csv"))?;
            let track_rows: Vec<TrackRow> = step.tracks.iter().map(|t| TrackRow::of(f as u64, t)).collect();
            io::write_tracks_csv(&track_rows, &emit("tracks.csv"))?;
            if config.write_binary {
                let side = io::write_rdmap_binary(&p.map, &emit("rdmap.f32"))?;
                files.push(side);
            }
            Ok(files)
        })
        .collect::<Result<_>>()?;

    let mut checksums = BTreeMap::new();
    for path in written.iter().flatten() {
        checksums.insert(relative_key(out, path), sha256_file(path)?);
    }
    let versions = BTreeMap::from([
        ("fmcw-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("fmcw-core".to_string(), fmcw_core::VERSION.to_string()),
    ]);
    let manifest = Manifest {
        tool: "fmcw".into(),
        versions,
        seed,
        parameter_hash: config.parameter_hash(seed),
        num_frames: config.num_frames,
        frames,
        final_confirmed_tracks: tracker
            .tracks()
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .map(TrackSummary::of)
            .collect(),
        files: checksums,
    };
    io::write_file(&out.join("manifest.json"), io::to_json(&manifest))?;
    Ok(manifest)
}
