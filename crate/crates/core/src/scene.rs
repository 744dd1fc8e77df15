//! Ground-truth targets and the dechirped receive cube.
//!
//! The simulator writes the post-mixer beat signal directly (stop-and-hop):
//! within a chirp each target is a complex tone at its beat frequency, and
//! motion shows up only as a phase step of `2π·f_D·T_chirp` from one chirp to
//! the next. Each receive antenna adds the uniform-linear-array phase
//! `2π·(d/λ)·rx·sin(az)`.
//!
//! Noise is complex circular Gaussian with `noise_std` per component. The
//! generator is ChaCha8 (`rand_chacha`) seeded with `seed_from_u64(rng_seed)`;
//! every `(rx, chirp)` row reads its own ChaCha stream number
//! `rx * num_chirps + chirp`, and normals come from `rand_distr::StandardNormal`
//! (real part first, then imaginary, sample by sample). Rows therefore do not
//! depend on evaluation order and can be generated in parallel.

use std::f64::consts::PI;

use ndarray::{Array3, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waveform::{ChirpParams, WaveformError};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid scene field `{field}`: {reason}")]
    InvalidScene { field: String, reason: String },
    #[error(
        "target {index} at {range} m has beat frequency {beat_hz} Hz, \
         at or above the sample rate {sample_rate} Hz"
    )]
    NyquistViolation {
        index: usize,
        range: f64,
        beat_hz: f64,
        sample_rate: f64,
    },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// A point scatterer. Azimuth is in degrees, positive velocity is receding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range: f64,
    pub radial_velocity: f64,
    #[serde(default)]
    pub azimuth: f64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

impl Target {
    pub fn new(range: f64, radial_velocity: f64, azimuth: f64, amplitude: f64) -> Self {
        Self {
            range,
            radial_velocity,
            azimuth,
            amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub targets: Vec<Target>,
    pub carrier_frequency: f64,
    pub rx_count: usize,
    pub rx_spacing_wavelengths: f64,
    pub noise_std: f64,
    pub rng_seed: u64,
    pub speed_of_light: f64,
}

impl SceneConfig {
    /// Single-antenna, noiseless scene at half-wavelength spacing using the exact speed of light.
    pub fn new(targets: Vec<Target>, carrier_frequency: f64) -> Self {
        Self {
            targets,
            carrier_frequency,
            rx_count: 1,
            rx_spacing_wavelengths: 0.5,
            noise_std: 0.0,
            rng_seed: 0,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |field: &str, reason: String| SceneError::InvalidScene {
            field: field.to_string(),
            reason,
        };
        if !(self.carrier_frequency.is_finite() && self.carrier_frequency > 0.0) {
            return Err(bad(
                "carrier_frequency",
                format!("must be > 0, got {}", self.carrier_frequency),
            ));
        }
        if self.rx_count < 1 {
            return Err(bad("rx_count", "must be >= 1".into()));
        }
        if !(self.rx_spacing_wavelengths.is_finite() && self.rx_spacing_wavelengths > 0.0) {
            return Err(bad(
                "rx_spacing_wavelengths",
                format!("must be > 0, got {}", self.rx_spacing_wavelengths),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(bad("noise_std", format!("must be >= 0, got {}", self.noise_std)));
        }
        if !(self.speed_of_light.is_finite() && self.speed_of_light > 0.0) {
            return Err(bad(
                "speed_of_light",
                format!("must be > 0, got {}", self.speed_of_light),
            ));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.range.is_finite() && t.range >= 0.0) {
                return Err(bad(
                    &format!("targets[{i}].range"),
                    format!("must be >= 0, got {}", t.range),
                ));
            }
            if !t.radial_velocity.is_finite() {
                return Err(bad(&format!("targets[{i}].radial_velocity"), "must be finite".into()));
            }
            if !(t.azimuth.abs() < 90.0) {
                return Err(bad(
                    &format!("targets[{i}].azimuth"),
                    format!("must lie in (-90, 90) degrees, got {}", t.azimuth),
                ));
            }
            if !(t.amplitude.is_finite() && t.amplitude > 0.0) {
                return Err(bad(
                    &format!("targets[{i}].amplitude"),
                    format!("must be > 0, got {}", t.amplitude),
                ));
            }
        }
        Ok(())
    }
}

/// How the samples in a [`RawFrameCube`] should be read by the range FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    ComplexBaseband,
    /// Real-valued samples stored with zero imaginary part; only the
    /// positive half of each range spectrum is kept.
    Real,
}

/// Physical constants the DSP stage needs to convert bins back to units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarMeta {
    pub carrier_frequency: f64,
    pub speed_of_light: f64,
    pub rx_spacing_wavelengths: f64,
}

/// Complex samples indexed `[rx][chirp][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrameCube {
    pub samples: Array3<Complex64>,
    pub chirp: ChirpParams,
    pub radar: RadarMeta,
    pub kind: SampleKind,
    pub scene: Option<SceneConfig>,
}

impl RawFrameCube {
    pub fn rx_count(&self) -> usize {
        self.samples.len_of(Axis(0))
    }

    pub fn num_chirps(&self) -> usize {
        self.samples.len_of(Axis(1))
    }

    pub fn samples_per_chirp(&self) -> usize {
        self.samples.len_of(Axis(2))
    }

    /// Checks the sample dimensions against the chirp parameters.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.chirp.validate()?;
        let (_, chirps, samples) = self.samples.dim();
        if chirps != self.chirp.num_chirps || samples != self.chirp.samples_per_chirp() {
            return Err(SceneError::InvalidScene {
                field: "samples".into(),
                reason: format!(
                    "cube is {chirps}x{samples} (chirps x samples) but chirp params imply {}x{}",
                    self.chirp.num_chirps,
                    self.chirp.samples_per_chirp()
                ),
            });
        }
        if self.rx_count() < 1 {
            return Err(SceneError::InvalidScene {
                field: "samples".into(),
                reason: "cube has no receive channels".into(),
            });
        }
        if let Some(scene) = &self.scene {
            if scene.rx_count != self.rx_count() {
                return Err(SceneError::InvalidScene {
                    field: "rx_count".into(),
                    reason: format!(
                        "scene declares {} rx but cube holds {}",
                        scene.rx_count,
                        self.rx_count()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// `f_b = slope · 2R / c`.
pub fn beat_frequency(slope: f64, range: f64, c: f64) -> f64 {
    slope * 2.0 * range / c
}

/// Inverse of [`beat_frequency`]: `R = f_b · c / (2 · slope)`.
pub fn range_from_beat(slope: f64, beat_hz: f64, c: f64) -> f64 {
    beat_hz * c / (2.0 * slope)
}

/// `f_D = 2 v f_0 / c`.
pub fn doppler_shift(radial_velocity: f64, carrier_frequency: f64, c: f64) -> f64 {
    2.0 * radial_velocity * carrier_frequency / c
}

/// `v = f_D c / (2 f_0)`.
pub fn velocity_from_doppler(doppler_hz: f64, carrier_frequency: f64, c: f64) -> f64 {
    doppler_hz * c / (2.0 * carrier_frequency)
}

/// Phase of antenna `rx_index` relative to antenna 0 for a plane wave from `azimuth` degrees.
pub fn antenna_phase(azimuth: f64, rx_index: usize, spacing_wavelengths: f64) -> f64 {
    2.0 * PI * spacing_wavelengths * rx_index as f64 * azimuth.to_radians().sin()
}

/// Derives an independent per-frame seed (SplitMix64 finalizer).
pub fn frame_seed(seed: u64, frame: u64) -> u64 {
    let mut z = seed.wrapping_add(frame.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct TargetTerms {
    amplitude: f64,
    // all in cycles
    beat_per_sample: f64,
    doppler_per_chirp: f64,
    range_phase: f64,
    rx_phase: f64,
}

/// Synthesizes one frame of dechirped samples for `scene`.
pub fn simulate_frame(scene: &SceneConfig, chirp: &ChirpParams) -> Result<RawFrameCube, SceneError> {
    chirp.validate()?;
    scene.validate()?;
    let c = scene.speed_of_light;
    let slope = chirp.slope();
    let mut terms = Vec::with_capacity(scene.targets.len());
    for (index, t) in scene.targets.iter().enumerate() {
        let fb = beat_frequency(slope, t.range, c);
        if fb >= chirp.sample_rate {
            return Err(SceneError::NyquistViolation {
                index,
                range: t.range,
                beat_hz: fb,
                sample_rate: chirp.sample_rate,
            });
        }
        let fd = doppler_shift(t.radial_velocity, scene.carrier_frequency, c);
        terms.push(TargetTerms {
            amplitude: t.amplitude,
            beat_per_sample: fb / chirp.sample_rate,
            doppler_per_chirp: (fd * chirp.duration).rem_euclid(1.0),
            range_phase: (chirp.f_start * 2.0 * t.range / c).rem_euclid(1.0),
            rx_phase: scene.rx_spacing_wavelengths * t.azimuth.to_radians().sin(),
        });
    }

    let rx_count = scene.rx_count;
    let num_chirps = chirp.num_chirps;
    let n = chirp.samples_per_chirp();
    let rows: Vec<Vec<Complex64>> = (0..rx_count * num_chirps)
        .into_par_iter()
        .map(|row| {
            let rx = row / num_chirps;
            let k = row % num_chirps;
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for term in &terms {
                let offset =
                    (term.doppler_per_chirp * k as f64 + term.range_phase + term.rx_phase * rx as f64).rem_euclid(1.0);
                for (i, s) in out.iter_mut().enumerate() {
                    let cycles = (term.beat_per_sample * i as f64).fract() + offset;
                    *s += Complex64::from_polar(term.amplitude, 2.0 * PI * cycles);
                }
            }
            if scene.noise_std > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
                rng.set_stream(row as u64);
                for s in out.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *s += Complex64::new(re, im) * scene.noise_std;
                }
            }
            out
        })
        .collect();
    let samples =
        Array3::from_shape_vec((rx_count, num_chirps, n), rows.concat()).expect("row count matches cube shape");

    Ok(RawFrameCube {
        samples,
        chirp: *chirp,
        radar: RadarMeta {
            carrier_frequency: scene.carrier_frequency,
            speed_of_light: c,
            rx_spacing_wavelengths: scene.rx_spacing_wavelengths,
        },
        kind: SampleKind::ComplexBaseband,
        scene: Some(scene.clone()),
    })
}
