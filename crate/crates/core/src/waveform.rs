//! Linear FMCW chirp description and sampled transmit waveforms.
//!
//! A chirp sweeps from `f_start` to `f_start + bandwidth` over `duration`
//! seconds. The slope `bandwidth / duration` drives every range computation
//! downstream, so it is computed in exactly one place.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("invalid chirp parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("time {t} s is outside the chirp interval [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },
    #[error(
        "real chirp up to {stop_hz} Hz violates Nyquist at sample rate {sample_rate} Hz \
         (use the baseband-real or complex-baseband representation)"
    )]
    NyquistViolation { stop_hz: f64, sample_rate: f64 },
}

/// Transmit chirp parameters. All quantities are SI (Hz, s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    pub f_start: f64,
    pub bandwidth: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub num_chirps: usize,
}

impl ChirpParams {
    pub fn new(
        f_start: f64,
        bandwidth: f64,
        duration: f64,
        sample_rate: f64,
        num_chirps: usize,
    ) -> Result<Self, WaveformError> {
        let params = Self {
            f_start,
            bandwidth,
            duration,
            sample_rate,
            num_chirps,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        fn positive(field: &'static str, v: f64) -> Result<(), WaveformError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(WaveformError::InvalidParams {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        }
        if !self.f_start.is_finite() {
            return Err(WaveformError::InvalidParams {
                field: "f_start",
                reason: format!("must be finite, got {}", self.f_start),
            });
        }
        positive("bandwidth", self.bandwidth)?;
        positive("duration", self.duration)?;
        positive("sample_rate", self.sample_rate)?;
        if self.num_chirps < 1 {
            return Err(WaveformError::InvalidParams {
                field: "num_chirps",
                reason: "must be >= 1".into(),
            });
        }
        let n = (self.sample_rate * self.duration).floor();
        if n < 2.0 {
            return Err(WaveformError::InvalidParams {
                field: "sample_rate",
                reason: format!("sample_rate * duration must give at least 2 samples, got {n}"),
            });
        }
        Ok(())
    }

    /// Sweep rate in Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth / self.duration
    }

    pub fn f_stop(&self) -> f64 {
        self.f_start + self.bandwidth
    }

    /// `floor(sample_rate * duration)`; a trailing partial sample is dropped.
    pub fn samples_per_chirp(&self) -> usize {
        (self.sample_rate * self.duration).floor() as usize
    }
}

/// Slope of a validated chirp, in Hz/s.
pub fn chirp_slope(params: &ChirpParams) -> Result<f64, WaveformError> {
    params.validate()?;
    Ok(params.slope())
}

/// `f(t) = f_start + slope * t` for `t` in `[0, duration]`.
pub fn instantaneous_frequency(params: &ChirpParams, t: f64) -> Result<f64, WaveformError> {
    params.validate()?;
    if !(0.0..=params.duration).contains(&t) {
        return Err(WaveformError::OutOfRange {
            t,
            duration: params.duration,
        });
    }
    Ok(params.f_start + params.slope() * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// `sin(2π(f_start·t + slope·t²/2))`, checked against Nyquist for `f_start + B`.
    Real,
    /// Same expression as `Real`, with `f_start` taken to be an already
    /// down-converted IF. No Nyquist check, so RF-valued `f_start` aliases.
    BasebandReal,
    /// `exp(i·2π·slope·t²/2)`: the carrier is removed, every sample has unit modulus.
    ComplexBaseband,
}

/// Sampled chirp. Real representations come back with a zero imaginary part.
pub fn synthesize_chirp(params: &ChirpParams, representation: Representation) -> Result<Vec<Complex64>, WaveformError> {
    params.validate()?;
    if representation == Representation::Real && params.f_stop() > params.sample_rate / 2.0 {
        return Err(WaveformError::NyquistViolation {
            stop_hz: params.f_stop(),
            sample_rate: params.sample_rate,
        });
    }
    let n = params.samples_per_chirp();
    let slope = params.slope();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / params.sample_rate;
            let sweep_cycles = 0.5 * slope * t * t;
            match representation {
                Representation::Real | Representation::BasebandReal => {
                    // wrap cycle counts before scaling so RF start frequencies keep precision
                    let cycles = (params.f_start * t).fract() + sweep_cycles.fract();
                    Complex64::new((2.0 * PI * cycles).sin(), 0.0)
                }
                Representation::ComplexBaseband => Complex64::from_polar(1.0, 2.0 * PI * sweep_cycles.fract()),
            }
        })
        .collect();
    Ok(samples)
}
