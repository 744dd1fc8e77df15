//! Constant-velocity Kalman tracking with gated association.
//!
//! State is `[x, y, vx, vy]` in metres and m/s; measurements are `[x, y]`.
//! There is no control input.

mod assignment;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, SymmetricEigen, Vector2, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::{greedy_assignment, greedy_assignment_keyed, optimal_assignment, Assignment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("invalid tracker parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessNoiseModel {
    /// `Q = scale · I`.
    #[default]
    Identity,
    /// Discretized white acceleration with spectral density `scale`.
    WhiteAcceleration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// Frame interval, s.
    pub dt: f64,
    pub process_noise_scale: f64,
    pub process_noise_model: ProcessNoiseModel,
    /// `R`, row-major, m².
    pub measurement_noise: [[f64; 2]; 2],
    /// `P₀ = scale · I`.
    pub initial_covariance_scale: f64,
    /// Use `(I−KH)P(I−KH)ᵀ + KRKᵀ` instead of `(I−KH)P`.
    pub joseph_form: bool,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            process_noise_scale: 1.0,
            process_noise_model: ProcessNoiseModel::Identity,
            measurement_noise: [[5.0, 0.0], [0.0, 5.0]],
            initial_covariance_scale: 1000.0,
            joseph_form: false,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        let bad = |field, reason: &str| {
            Err(TrackError::InvalidParams {
                field,
                reason: reason.into(),
            })
        };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", "must be finite and > 0");
        }
        if !(self.process_noise_scale.is_finite() && self.process_noise_scale >= 0.0) {
            return bad("process_noise_scale", "must be finite and >= 0");
        }
        if !(self.initial_covariance_scale.is_finite() && self.initial_covariance_scale > 0.0) {
            return bad("initial_covariance_scale", "must be finite and > 0");
        }
        let r = self.r();
        if r.iter().any(|v| !v.is_finite()) || (r[(0, 1)] - r[(1, 0)]).abs() > 1e-12 * r.amax().max(1.0) {
            return bad("measurement_noise", "must be finite and symmetric");
        }
        if r[(0, 0)] <= 0.0 || r.determinant() <= 0.0 {
            return bad("measurement_noise", "must be positive definite");
        }
        Ok(())
    }

    pub fn f(&self) -> Matrix4<f64> {
        let dt = self.dt;
        Matrix4::new(
            1.0, 0.0, dt, 0.0, //
            0.0, 1.0, 0.0, dt, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    pub fn h() -> Matrix2x4<f64> {
        Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    }

    pub fn q(&self) -> Matrix4<f64> {
        let s = self.process_noise_scale;
        match self.process_noise_model {
            ProcessNoiseModel::Identity => Matrix4::identity() * s,
            ProcessNoiseModel::WhiteAcceleration => {
                let dt = self.dt;
                let (a, b, c) = (dt.powi(4) / 4.0, dt.powi(3) / 2.0, dt * dt);
                Matrix4::new(
                    a, 0.0, b, 0.0, //
                    0.0, a, 0.0, b, //
                    b, 0.0, c, 0.0, //
                    0.0, b, 0.0, c,
                ) * s
            }
        }
    }

    pub fn r(&self) -> Matrix2<f64> {
        let m = self.measurement_noise;
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub fn p0(&self) -> Matrix4<f64> {
        Matrix4::identity() * self.initial_covariance_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tentative => "tentative",
            Self::Confirmed => "confirmed",
            Self::Deleted => "deleted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub hits: u32,
    pub misses: u32,
    pub status: TrackStatus,
}

impl Track {
    pub fn new(id: u64, state: Vector4<f64>, covariance: Matrix4<f64>) -> Self {
        Self {
            id,
            state,
            covariance,
            hits: 0,
            misses: 0,
            status: TrackStatus::Tentative,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.state[2], self.state[3])
    }

    pub fn is_live(&self) -> bool {
        self.status != TrackStatus::Deleted
    }

    /// Symmetric within `tol` and no eigenvalue below `-tol`.
    pub fn covariance_is_valid(&self, tol: f64) -> bool {
        let p = &self.covariance;
        if (p - p.transpose()).amax() > tol {
            return false;
        }
        SymmetricEigen::new(*p).eigenvalues.iter().all(|&e| e >= -tol)
    }
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// `x ← F x`, `P ← F P Fᵀ + Q`.
pub fn kf_predict(track: &Track, config: &KalmanConfig) -> Track {
    debug_assert!(track.is_live(), "predict on a deleted track");
    let f = config.f();
    Track {
        state: f * track.state,
        covariance: symmetrize(f * track.covariance * f.transpose() + config.q()),
        ..track.clone()
    }
}

/// Innovation covariance `H P Hᵀ + R`.
pub fn innovation_covariance(track: &Track, config: &KalmanConfig) -> Matrix2<f64> {
    let h = KalmanConfig::h();
    h * track.covariance * h.transpose() + config.r()
}

/// Measurement update with `z = [x, y]`.
pub fn kf_update(track: &Track, z: Vector2<f64>, config: &KalmanConfig) -> Result<Track, TrackError> {
    debug_assert!(track.is_live(), "update on a deleted track");
    let h = KalmanConfig::h();
    let p = track.covariance;
    let s_inv = innovation_covariance(track, config)
        .try_inverse()
        .ok_or(TrackError::SingularInnovation)?;
    let k: Matrix4x2<f64> = p * h.transpose() * s_inv;
    let ikh = Matrix4::identity() - k * h;
    let covariance = if config.joseph_form {
        ikh * p * ikh.transpose() + k * config.r() * k.transpose()
    } else {
        ikh * p
    };
    Ok(Track {
        state: track.state + k * (z - h * track.state),
        covariance: symmetrize(covariance),
        ..track.clone()
    })
}

/// `3 · sqrt(λ_max(H P Hᵀ + R))`, m.
pub fn default_gate(track: &Track, config: &KalmanConfig) -> f64 {
    let s = innovation_covariance(track, config);
    let lmax = SymmetricEigen::new(s).eigenvalues.max();
    3.0 * lmax.max(0.0).sqrt()
}

fn distance_matrix(tracks: &[Track], detections: &[[f64; 2]]) -> Vec<Vec<f64>> {
    tracks
        .iter()
        .map(|t| {
            detections
                .iter()
                .map(|d| (t.position() - Vector2::new(d[0], d[1])).norm())
                .collect()
        })
        .collect()
}

/// Greedy nearest neighbour on Euclidean position distance; rows follow
/// `tracks` order, ties resolve by `(track id, detection index)`.
pub fn associate_nn(tracks: &[Track], detections: &[[f64; 2]], gate: f64) -> Assignment {
    let keys: Vec<u64> = tracks.iter().map(|t| t.id).collect();
    greedy_assignment_keyed(&distance_matrix(tracks, detections), gate, &keys).with_cols(detections.len())
}

/// Minimum-total-distance assignment among those with the most gated pairs.
pub fn associate_optimal(tracks: &[Track], detections: &[[f64; 2]], gate: f64) -> Assignment {
    optimal_assignment(&distance_matrix(tracks, detections), gate).with_cols(detections.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationStrategy {
    NearestNeighbor,
    #[default]
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub kalman: KalmanConfig,
    pub association: AssociationStrategy,
    /// Fixed gate in metres; `None` uses [`default_gate`] per track.
    pub gate: Option<f64>,
    pub confirm_threshold: u32,
    pub delete_threshold: u32,
    /// Velocity given to newly spawned tracks.
    pub initial_velocity: [f64; 2],
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            kalman: KalmanConfig::default(),
            association: AssociationStrategy::Optimal,
            gate: None,
            confirm_threshold: 3,
            delete_threshold: 3,
            initial_velocity: [0.0, 0.0],
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        self.kalman.validate()?;
        if let Some(g) = self.gate {
            if !(g > 0.0) {
                return Err(TrackError::InvalidParams {
                    field: "gate",
                    reason: "must be > 0".into(),
                });
            }
        }
        if self.confirm_threshold == 0 {
            return Err(TrackError::InvalidParams {
                field: "confirm_threshold",
                reason: "must be >= 1".into(),
            });
        }
        if self.delete_threshold == 0 {
            return Err(TrackError::InvalidParams {
                field: "delete_threshold",
                reason: "must be >= 1".into(),
            });
        }
        if self.initial_velocity.iter().any(|v| !v.is_finite()) {
            return Err(TrackError::InvalidParams {
                field: "initial_velocity",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Live tracks plus those deleted during this step, ordered by id.
    pub tracks: Vec<Track>,
    /// Id of the track each detection was assigned to or spawned.
    pub detection_tracks: Vec<u64>,
}

/// Multi-target tracker. Ids start at 0 and are never reused.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackError> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks, ordered by id.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// One frame: predict, associate, update, then apply lifecycle rules.
    pub fn step(&mut self, detections: &[[f64; 2]]) -> Result<StepOutput, TrackError> {
        let cfg = &self.config;
        let predicted: Vec<Track> = self.tracks.par_iter().map(|t| kf_predict(t, &cfg.kalman)).collect();

        let mut cost = distance_matrix(&predicted, detections);
        for (row, t) in cost.iter_mut().zip(&predicted) {
            let gate = cfg.gate.unwrap_or_else(|| default_gate(t, &cfg.kalman));
            row.iter_mut().filter(|v| **v > gate).for_each(|v| *v = f64::INFINITY);
        }
        let assignment = match cfg.association {
            AssociationStrategy::NearestNeighbor => {
                let keys: Vec<u64> = predicted.iter().map(|t| t.id).collect();
                greedy_assignment_keyed(&cost, f64::INFINITY, &keys)
            }
            AssociationStrategy::Optimal => optimal_assignment(&cost, f64::INFINITY),
        }
        .with_cols(detections.len());

        let mut det_for_row = vec![None; predicted.len()];
        for &(r, c) in &assignment.pairs {
            det_for_row[r] = Some(c);
        }
        let mut tracks = predicted
            .into_par_iter()
            .zip(det_for_row.par_iter())
            .map(|(t, det)| match det {
                Some(c) => {
                    let d = detections[*c];
                    let mut t = kf_update(&t, Vector2::new(d[0], d[1]), &cfg.kalman)?;
                    t.hits += 1;
                    t.misses = 0;
                    if t.status == TrackStatus::Tentative && t.hits >= cfg.confirm_threshold {
                        t.status = TrackStatus::Confirmed;
                    }
                    Ok(t)
                }
                None => {
                    let mut t = t;
                    t.misses += 1;
                    if t.misses >= cfg.delete_threshold {
                        t.status = TrackStatus::Deleted;
                    }
                    Ok(t)
                }
            })
            .collect::<Result<Vec<_>, TrackError>>()?;

        let mut detection_tracks = vec![0; detections.len()];
        for &(r, c) in &assignment.pairs {
            detection_tracks[c] = tracks[r].id;
        }
        let [vx, vy] = cfg.initial_velocity;
        for &c in &assignment.unassigned_cols {
            let d = detections[c];
            let mut t = Track::new(self.next_id, Vector4::new(d[0], d[1], vx, vy), cfg.kalman.p0());
            // the spawning detection counts as the first hit
            t.hits = 1;
            if t.hits >= cfg.confirm_threshold {
                t.status = TrackStatus::Confirmed;
            }
            detection_tracks[c] = t.id;
            self.next_id += 1;
            tracks.push(t);
        }

        self.tracks = tracks.iter().filter(|t| t.is_live()).cloned().collect();
        Ok(StepOutput {
            tracks,
            detection_tracks,
        })
    }
}
