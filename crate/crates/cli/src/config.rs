//! Pipeline configuration file (JSON).
//!
//! Every section except `chirp` and `scene` may be omitted. Unknown keys
//! are rejected unless loading leniently, in which case they are logged and
//! skipped. Validation errors name the offending key by its dotted path.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fmcw_core::cluster::NeighborSearch;
use fmcw_core::scene::{beat_frequency, SceneConfig, Target};
use fmcw_core::track::{AssociationStrategy, KalmanConfig, ProcessNoiseModel, TrackerConfig};
use fmcw_core::{ChirpParams, DbscanParams, DetectPolicy, DspOptions, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Environment variable consulted when neither `--seed` nor `seed` is set.
pub const SEED_ENV: &str = "FMCW_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub chirp: ChirpParams,
    pub scene: SceneSection,
    #[serde(default)]
    pub dsp: DspOptions,
    #[serde(default)]
    pub detect: DetectPolicy,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default = "default_num_frames")]
    pub num_frames: usize,
    /// Seconds between frames; also the tracker's `dt`.
    #[serde(default = "default_frame_interval")]
    pub frame_interval: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Replaces the exact speed of light everywhere (e.g. `3e8`).
    #[serde(default)]
    pub c_override: Option<f64>,
    /// Also write `rdmap.f32` with a JSON sidecar per frame.
    #[serde(default)]
    pub write_binary: bool,
}

fn default_num_frames() -> usize {
    1
}

fn default_frame_interval() -> f64 {
    0.05
}

/// Targets at frame 0 plus array geometry. Targets move radially at their
/// `radial_velocity` from one frame to the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSection {
    pub targets: Vec<Target>,
    /// Defaults to `chirp.f_start`.
    pub carrier_frequency: Option<f64>,
    pub rx_count: usize,
    pub rx_spacing_wavelengths: f64,
    pub noise_std: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            targets: Vec::new(),
            carrier_frequency: None,
            rx_count: 1,
            rx_spacing_wavelengths: 0.5,
            noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSection {
    pub eps: f64,
    /// One peak per target per frame is typical, so single points may form clusters.
    pub min_pts: usize,
    pub axis_scales: Option<Vec<f64>>,
    pub search: NeighborSearch,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            eps: 2.0,
            min_pts: 1,
            axis_scales: None,
            search: NeighborSearch::BruteForce,
        }
    }
}

impl ClusterSection {
    pub fn params(&self) -> DbscanParams {
        DbscanParams {
            axis_scales: self.axis_scales.clone(),
            search: self.search,
            ..DbscanParams::new(self.eps, self.min_pts)
        }
    }
}

/// Tracker settings; `dt` comes from `frame_interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerSection {
    pub association: AssociationStrategy,
    pub gate: Option<f64>,
    pub confirm_threshold: u32,
    pub delete_threshold: u32,
    pub initial_velocity: [f64; 2],
    pub process_noise_scale: f64,
    pub process_noise_model: ProcessNoiseModel,
    pub measurement_noise: [[f64; 2]; 2],
    pub initial_covariance_scale: f64,
    pub joseph_form: bool,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let t = TrackerConfig::default();
        Self {
            association: t.association,
            gate: t.gate,
            confirm_threshold: t.confirm_threshold,
            delete_threshold: t.delete_threshold,
            initial_velocity: t.initial_velocity,
            process_noise_scale: t.kalman.process_noise_scale,
            process_noise_model: t.kalman.process_noise_model,
            measurement_noise: t.kalman.measurement_noise,
            initial_covariance_scale: t.kalman.initial_covariance_scale,
            joseph_form: t.kalman.joseph_form,
        }
    }
}

impl TrackerSection {
    pub fn tracker_config(&self, dt: f64) -> TrackerConfig {
        TrackerConfig {
            kalman: KalmanConfig {
                dt,
                process_noise_scale: self.process_noise_scale,
                process_noise_model: self.process_noise_model,
                measurement_noise: self.measurement_noise,
                initial_covariance_scale: self.initial_covariance_scale,
                joseph_form: self.joseph_form,
            },
            association: self.association,
            gate: self.gate,
            confirm_threshold: self.confirm_threshold,
            delete_threshold: self.delete_threshold,
            initial_velocity: self.initial_velocity,
        }
    }
}

/// Where the run seed came from, highest precedence first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

impl PipelineConfig {
    pub fn speed_of_light(&self) -> f64 {
        self.c_override.unwrap_or(SPEED_OF_LIGHT)
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.scene.carrier_frequency.unwrap_or(self.chirp.f_start)
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        self.tracker.tracker_config(self.frame_interval)
    }

    /// Scene for `frame` with noise seeded by `rng_seed`.
    pub fn scene_at(&self, frame: usize, rng_seed: u64) -> SceneConfig {
        let t = frame as f64 * self.frame_interval;
        let targets = self
            .scene
            .targets
            .iter()
            .map(|tg| Target {
                range: tg.range + tg.radial_velocity * t,
                ..*tg
            })
            .collect();
        SceneConfig {
            targets,
            carrier_frequency: self.carrier_frequency(),
            rx_count: self.scene.rx_count,
            rx_spacing_wavelengths: self.scene.rx_spacing_wavelengths,
            noise_std: self.scene.noise_std,
            rng_seed,
            speed_of_light: self.speed_of_light(),
        }
    }

    /// `--seed`, then the config's `seed`, then `FMCW_SEED`, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<(u64, SeedSource)> {
        if let Some(s) = flag {
            return Ok((s, SeedSource::Flag));
        }
        if let Some(s) = self.seed {
            return Ok((s, SeedSource::Config));
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(|s| (s, SeedSource::Env))
                .map_err(|_| CliError::invalid(SEED_ENV, format!("must be an unsigned integer, got {v:?}"))),
            Err(_) => Ok((0, SeedSource::Default)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chirp.validate().map_err(|e| nested("chirp", e))?;
        if self.num_frames < 1 {
            return Err(CliError::invalid("num_frames", "must be >= 1"));
        }
        if !(self.frame_interval.is_finite() && self.frame_interval > 0.0) {
            return Err(CliError::invalid("frame_interval", "must be finite and > 0"));
        }
        if let Some(c) = self.c_override {
            if !(c.is_finite() && c > 0.0) {
                return Err(CliError::invalid("c_override", "must be finite and > 0"));
            }
        }
        self.validate_scene()?;
        self.validate_dsp()?;
        let d = &self.detect;
        if !(d.threshold_factor.is_finite() && d.threshold_factor >= 0.0) {
            return Err(CliError::invalid("detect.threshold_factor", "must be finite and >= 0"));
        }
        if d.max_peaks < 1 {
            return Err(CliError::invalid("detect.max_peaks", "must be >= 1"));
        }
        if let Some(db) = d.dynamic_range_db {
            if !(db.is_finite() && db > 0.0) {
                return Err(CliError::invalid("detect.dynamic_range_db", "must be finite and > 0"));
            }
        }
        self.cluster.params().validate(3).map_err(|e| nested("cluster", e))?;
        self.tracker_config().validate().map_err(|e| nested("tracker", e))?;
        Ok(())
    }

    fn validate_scene(&self) -> Result<()> {
        if let Some(f) = self.scene.carrier_frequency {
            if !(f.is_finite() && f > 0.0) {
                return Err(CliError::invalid("scene.carrier_frequency", "must be finite and > 0"));
            }
        } else if !(self.chirp.f_start > 0.0) {
            return Err(CliError::invalid(
                "scene.carrier_frequency",
                "is required when chirp.f_start is not a positive RF frequency",
            ));
        }
        let c = self.speed_of_light();
        let r_max = self.chirp.sample_rate * c / (2.0 * self.chirp.slope());
        let last = self.num_frames - 1;
        // targets move linearly, so checking the first and last frame covers every frame
        for frame in [0, last] {
            let scene = self.scene_at(frame, 0);
            scene.validate().map_err(|e| nested("scene", e))?;
            for (i, t) in scene.targets.iter().enumerate() {
                if beat_frequency(self.chirp.slope(), t.range, c) >= self.chirp.sample_rate {
                    return Err(CliError::invalid(
                        format!("scene.targets[{i}].range"),
                        format!(
                            "reaches {:.3} m at frame {frame}, beyond the unambiguous range {:.3} m",
                            t.range, r_max
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_dsp(&self) -> Result<()> {
        let checks = [
            (
                "dsp.range_fft_size",
                self.dsp.range_fft_size,
                self.chirp.samples_per_chirp(),
            ),
            ("dsp.doppler_fft_size", self.dsp.doppler_fft_size, self.chirp.num_chirps),
            ("dsp.angle_fft_size", self.dsp.angle_fft_size, 1),
        ];
        for (field, size, min) in checks {
            if let Some(n) = size {
                if n < min.max(1) {
                    return Err(CliError::invalid(field, format!("must be >= {}, got {n}", min.max(1))));
                }
            }
        }
        if self.chirp.num_chirps < 2 {
            return Err(CliError::invalid(
                "chirp.num_chirps",
                "must be >= 2 for the Doppler FFT",
            ));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every setting that affects output:
    /// defaults filled in, the resolved seed substituted, `output_dir` dropped.
    pub fn parameter_hash(&self, seed: u64) -> String {
        let mut canonical = self.clone();
        canonical.seed = Some(seed);
        canonical.output_dir = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Maps a core error carrying a bare field name onto its dotted config path.
fn nested(section: &str, err: impl std::fmt::Display + FieldName) -> CliError {
    match err.field() {
        Some(f) => CliError::invalid(format!("{section}.{f}"), err.to_string()),
        None => CliError::invalid(section, err.to_string()),
    }
}

trait FieldName {
    fn field(&self) -> Option<String>;
}

impl FieldName for fmcw_core::waveform::WaveformError {
    fn field(&self) -> Option<String> {
        match self {
            Self::InvalidParams { field, .. } => Some((*field).into()),
            _ => None,
        }
    }
}

impl FieldName for fmcw_core::scene::SceneError {
    fn field(&self) -> Option<String> {
        match self {
            Self::InvalidScene { field, .. } => Some(field.clone()),
            Self::NyquistViolation { index, .. } => Some(format!("targets[{index}].range")),
            Self::Waveform(_) => None,
        }
    }
}

impl FieldName for fmcw_core::cluster::ClusterError {
    fn field(&self) -> Option<String> {
        match self {
            Self::InvalidParams { field, .. } => Some((*field).into()),
            _ => None,
        }
    }
}

impl FieldName for fmcw_core::track::TrackError {
    fn field(&self) -> Option<String> {
        match self {
            Self::InvalidParams { field, .. } => Some(match *field {
                "dt" => "frame_interval".into(),
                f => f.into(),
            }),
            Self::SingularInnovation => Some("measurement_noise".into()),
        }
    }
}

/// Parses `text` (named `path` in diagnostics). Returns the config and the
/// dotted paths of any keys that were not recognised.
pub fn parse_config(text: &str, path: &Path) -> Result<(PipelineConfig, Vec<String>)> {
    let mut unknown = BTreeSet::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: std::result::Result<PipelineConfig, _> = serde_ignored::deserialize(&mut de, |p| {
        unknown.insert(p.to_string());
    });
    let config = parsed.and_then(|c| de.end().map(|_| c)).map_err(|e| {
        let full = e.to_string();
        // the position is reported separately
        let message = match full.rsplit_once(" at line ") {
            Some((m, _)) if e.line() > 0 => m.to_string(),
            _ => full,
        };
        CliError::ConfigParse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    Ok((config, unknown.into_iter().collect()))
}

/// Reads, parses and validates a config file. In strict mode unknown keys
/// are an error; otherwise each one is logged as a warning.
pub fn load_config(path: &Path, lenient: bool) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (config, unknown) = parse_config(&text, path)?;
    if !unknown.is_empty() {
        if lenient {
            for key in &unknown {
                log::warn!("{}: ignoring unknown key `{key}`", path.display());
            }
        } else {
            return Err(CliError::UnknownKeys { keys: unknown });
        }
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "chirp": {"f_start": 77e9, "bandwidth": 150e6, "duration": 20e-6, "sample_rate": 10e6, "num_chirps": 128},
        "scene": {"targets": [{"range": 50, "radial_velocity": 19}]}
    }"#;

    fn parse(text: &str) -> Result<(PipelineConfig, Vec<String>)> {
        parse_config(text, Path::new("test.json"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let (c, unknown) = parse(MINIMAL).unwrap();
        assert!(unknown.is_empty());
        c.validate().unwrap();
        assert_eq!(c.num_frames, 1);
        assert_eq!(c.frame_interval, 0.05);
        assert_eq!(c.scene.rx_count, 1);
        assert_eq!(c.scene.targets[0].amplitude, 1.0);
        assert_eq!(c.carrier_frequency(), 77e9);
        assert_eq!(c.detect, DetectPolicy::default());
        assert_eq!(c.cluster.min_pts, 1);
        assert_eq!(c.tracker_config().kalman.dt, 0.05);
        assert_eq!(c.speed_of_light(), SPEED_OF_LIGHT);
    }

    #[test]
    fn unknown_keys_are_reported_with_paths() {
        let text = MINIMAL.replacen("\"num_chirps\": 128", "\"num_chirps\": 128, \"bandwdth\": 1", 1);
        let text = text.replacen("\"scene\"", "\"extra\": 3, \"scene\"", 1);
        let (_, unknown) = parse(&text).unwrap();
        assert_eq!(unknown, vec!["chirp.bandwdth".to_string(), "extra".to_string()]);
    }

    #[test]
    fn negative_bandwidth_names_the_field() {
        let text = MINIMAL.replace("150e6", "-150e6");
        let (c, _) = parse(&text).unwrap();
        match c.validate() {
            Err(CliError::ConfigInvalid { field, .. }) => assert_eq!(field, "chirp.bandwidth"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse("{\n  \"chirp\": {\n    \"f_start\": oops\n").unwrap_err();
        match err {
            CliError::ConfigParse { line, column, .. } => assert_eq!((line, column), (3, 16)),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse("{} trailing").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn out_of_range_target_fails_validation() {
        let text = MINIMAL.replace("\"range\": 50", "\"range\": 250");
        let (c, _) = parse(&text).unwrap();
        match c.validate() {
            Err(CliError::ConfigInvalid { field, .. }) => assert_eq!(field, "scene.targets[0].range"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn target_leaving_range_over_frames_fails() {
        let text = MINIMAL.replace(
            "\"num_chirps\": 128}",
            "\"num_chirps\": 128}, \"num_frames\": 200, \"frame_interval\": 0.1",
        );
        let (c, _) = parse(&text).unwrap();
        // 50 m + 19 m/s · 19.9 s is far past the 200 m unambiguous range
        assert!(matches!(c.validate(), Err(CliError::ConfigInvalid { .. })));
    }

    #[test]
    fn paper_matlab_scenario_is_valid() {
        let text = r#"{
            "chirp": {"f_start": 77e9, "bandwidth": 200e6, "duration": 1e-3, "sample_rate": 2e6, "num_chirps": 64},
            "scene": {"targets": [{"range": 50, "radial_velocity": 30}, {"range": 150, "radial_velocity": -20}]},
            "c_override": 3e8
        }"#;
        let (c, unknown) = parse(text).unwrap();
        assert!(unknown.is_empty());
        c.validate().unwrap();
    }

    #[test]
    fn hash_tracks_meaningful_fields_only() {
        let (a, _) = parse(MINIMAL).unwrap();
        let h = a.parameter_hash(1);
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(b.parameter_hash(1), h);
        assert_ne!(a.parameter_hash(2), h);
        let mut c = a.clone();
        c.chirp.bandwidth = 151e6;
        assert_ne!(c.parameter_hash(1), h);
        let mut d = a.clone();
        d.tracker.confirm_threshold = 4;
        assert_ne!(d.parameter_hash(1), h);
        // explicit defaults hash like omitted ones
        let explicit = MINIMAL.replacen("\"scene\"", "\"num_frames\": 1, \"scene\"", 1);
        assert_eq!(parse(&explicit).unwrap().0.parameter_hash(1), h);
    }

    #[test]
    fn seed_precedence() {
        let (mut c, _) = parse(MINIMAL).unwrap();
        assert_eq!(c.resolve_seed(Some(5)).unwrap(), (5, SeedSource::Flag));
        c.seed = Some(9);
        assert_eq!(c.resolve_seed(Some(5)).unwrap(), (5, SeedSource::Flag));
        assert_eq!(c.resolve_seed(None).unwrap(), (9, SeedSource::Config));
    }

    #[test]
    fn moving_targets_advance_per_frame() {
        let (c, _) = parse(MINIMAL).unwrap();
        let s = c.scene_at(10, 3);
        assert!((s.targets[0].range - (50.0 + 19.0 * 0.5)).abs() < 1e-12);
        assert_eq!(s.rng_seed, 3);
    }
}
