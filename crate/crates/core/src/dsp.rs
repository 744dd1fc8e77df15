//! Range, Doppler and angle FFTs over a raw frame cube.
//!
//! Axis conventions:
//! - range bins are unshifted, bin 0 is zero beat frequency;
//! - Doppler and angle axes are center-shifted, so zero velocity / broadside
//!   sits at index `size / 2` (numpy `fftshift` convention for odd sizes too).
//!
//! The transforms are backed by `rustfft`; [`dft`] is the single entry point
//! that defines the sign convention `X[k] = Σ x[n]·exp(−i2πkn/N)`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Array3, Axis, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{RadarMeta, RawFrameCube, SampleKind, SceneError};
use crate::waveform::ChirpParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("transform size must be positive")]
    ZeroSize,
    #[error("transform size {size} is smaller than the input length {len}")]
    SizeTooSmall { size: usize, len: usize },
    #[error("Doppler processing needs at least 2 chirps, got {0}")]
    TooFewChirps(usize),
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
    #[error("arcsin argument {0} is outside [-1, 1]")]
    OutOfDomain(f64),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Rectangular.
    #[default]
    None,
    Hann,
}

impl Window {
    fn coefficients(self, len: usize) -> Option<Vec<f64>> {
        match self {
            Window::None => None,
            Window::Hann if len < 2 => Some(vec![1.0; len]),
            Window::Hann => Some(
                (0..len)
                    .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                    .collect(),
            ),
        }
    }
}

/// Discrete Fourier transform of `seq`, zero-padded to `size` when given.
pub fn dft(seq: &[Complex64], size: Option<usize>) -> Result<Vec<Complex64>, DspError> {
    let size = size.unwrap_or(seq.len());
    if size == 0 {
        return Err(DspError::ZeroSize);
    }
    if size < seq.len() {
        return Err(DspError::SizeTooSmall { size, len: seq.len() });
    }
    let mut buf = seq.to_vec();
    buf.resize(size, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    Ok(buf)
}

/// Maps an unshifted FFT index to its center-shifted position.
pub fn shifted_index(index: usize, size: usize) -> usize {
    (index + size / 2) % size
}

/// Signed frequency bin of a center-shifted index.
pub fn centered_bin(shifted: usize, size: usize) -> i64 {
    shifted as i64 - (size / 2) as i64
}

/// Transforms every lane of `input` along `axis`, producing `size` bins per lane.
fn transform_axis(
    input: &Array3<Complex64>,
    axis: Axis,
    size: usize,
    window: Window,
    shift: bool,
) -> Array3<Complex64> {
    let len = input.len_of(axis);
    let mut shape = input.raw_dim();
    shape[axis.index()] = size;
    let mut output = Array3::<Complex64>::zeros(shape);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(size);
    let coeffs = window.coefficients(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (lane_in, mut lane_out) in input.lanes(axis).into_iter().zip(output.lanes_mut(axis)) {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (i, x) in lane_in.iter().enumerate() {
            buf[i] = match &coeffs {
                Some(w) => x * w[i],
                None => *x,
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, x) in buf.iter().enumerate() {
            let dst = if shift { shifted_index(k, size) } else { k };
            lane_out[dst] = *x;
        }
    }
    output
}

fn resolve_size(requested: Option<usize>, len: usize) -> Result<usize, DspError> {
    match requested {
        None => Ok(len),
        Some(0) => Err(DspError::ZeroSize),
        Some(size) if size < len => Err(DspError::SizeTooSmall { size, len }),
        Some(size) => Ok(size),
    }
}

/// Output of the first FFT, indexed `[rx][chirp][range_bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfiles {
    pub data: Array3<Complex64>,
    pub fft_size: usize,
    pub chirp: ChirpParams,
    pub radar: RadarMeta,
}

/// Range FFT along the fast-time axis. Real-mode cubes keep only the first
/// `fft_size / 2` bins; complex baseband keeps all of them.
pub fn range_fft(cube: &RawFrameCube, fft_size: Option<usize>, window: Window) -> Result<RangeProfiles, DspError> {
    cube.validate()?;
    let size = resolve_size(fft_size, cube.samples_per_chirp())?;
    let mut data = transform_axis(&cube.samples, Axis(2), size, window, false);
    if cube.kind == SampleKind::Real {
        data = data.slice_axis(Axis(2), (0..size / 2).into()).to_owned();
    }
    Ok(RangeProfiles {
        data,
        fft_size: size,
        chirp: cube.chirp,
        radar: cube.radar,
    })
}

/// Output of the second FFT, indexed `[rx][range_bin][doppler_bin]`, Doppler center-shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerCube {
    pub data: Array3<Complex64>,
    pub range_fft_size: usize,
    pub doppler_fft_size: usize,
    pub chirp: ChirpParams,
    pub radar: RadarMeta,
}

/// Doppler FFT across chirps for every `(rx, range_bin)`.
pub fn doppler_fft(profiles: &RangeProfiles, fft_size: Option<usize>, window: Window) -> Result<DopplerCube, DspError> {
    let chirps = profiles.data.len_of(Axis(1));
    if chirps < 2 {
        return Err(DspError::TooFewChirps(chirps));
    }
    let size = resolve_size(fft_size, chirps)?;
    let transformed = transform_axis(&profiles.data, Axis(1), size, window, true);
    let data = transformed.permuted_axes([0, 2, 1]).as_standard_layout().into_owned();
    Ok(DopplerCube {
        data,
        range_fft_size: profiles.fft_size,
        doppler_fft_size: size,
        chirp: profiles.chirp,
        radar: profiles.radar,
    })
}

/// `R = (bin · fs / N) · c / (2 · slope)`.
pub fn bin_to_range(bin: usize, fft_size: usize, sample_rate: f64, slope: f64, c: f64) -> f64 {
    (bin as f64 * sample_rate / fft_size as f64) * c / (2.0 * slope)
}

/// Velocity of a signed Doppler bin: `f_D = bin / (N·T)`, `v = f_D·λ/2`.
pub fn bin_to_velocity(doppler_bin_centered: i64, num_chirps: usize, chirp_duration: f64, carrier: f64, c: f64) -> f64 {
    let fd = doppler_bin_centered as f64 / (num_chirps as f64 * chirp_duration);
    fd * (c / carrier) / 2.0
}

/// `θ = arcsin(Δφ·λ / (2π·d))`, in degrees.
pub fn aoa_from_phase(delta_phi: f64, spacing: f64, wavelength: f64) -> Result<f64, DspError> {
    let arg = delta_phi * wavelength / (2.0 * PI * spacing);
    if !(-1.0..=1.0).contains(&arg) {
        return Err(DspError::OutOfDomain(arg));
    }
    Ok(arg.asin().to_degrees())
}

/// Magnitudes over `[range_bin][doppler_bin]` with the scalars needed to
/// read bins as metres and metres per second.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub magnitudes: Array2<f64>,
    /// `c / (2B)`.
    pub range_resolution: f64,
    /// Metres per range bin for this FFT size (equals `range_resolution`
    /// without zero-padding, up to the dropped partial sample).
    pub range_bin_m: f64,
    /// Metres per second per Doppler bin.
    pub doppler_velocity_resolution: f64,
    pub range_fft_size: usize,
    pub doppler_fft_size: usize,
    pub chirp: ChirpParams,
    pub carrier_frequency: f64,
    pub speed_of_light: f64,
}

impl RangeDopplerMap {
    pub fn range_bins(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn doppler_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn doppler_center(&self) -> usize {
        self.doppler_fft_size / 2
    }

    pub fn range_of_bin(&self, bin: usize) -> f64 {
        bin_to_range(
            bin,
            self.range_fft_size,
            self.chirp.sample_rate,
            self.chirp.slope(),
            self.speed_of_light,
        )
    }

    /// Velocity of a center-shifted Doppler index.
    pub fn velocity_of_bin(&self, shifted: usize) -> f64 {
        bin_to_velocity(
            centered_bin(shifted, self.doppler_fft_size),
            self.doppler_fft_size,
            self.chirp.duration,
            self.carrier_frequency,
            self.speed_of_light,
        )
    }
}

/// Non-coherent integration: mean magnitude over receive channels.
pub fn range_doppler_map(cube: &DopplerCube) -> RangeDopplerMap {
    let rx = cube.data.len_of(Axis(0)) as f64;
    let magnitudes = cube.data.map(|x| x.norm()).sum_axis(Axis(0)) / rx;
    let c = cube.radar.speed_of_light;
    let chirp = cube.chirp;
    RangeDopplerMap {
        magnitudes,
        range_resolution: c / (2.0 * chirp.bandwidth),
        range_bin_m: bin_to_range(1, cube.range_fft_size, chirp.sample_rate, chirp.slope(), c),
        doppler_velocity_resolution: bin_to_velocity(
            1,
            cube.doppler_fft_size,
            chirp.duration,
            cube.radar.carrier_frequency,
            c,
        ),
        range_fft_size: cube.range_fft_size,
        doppler_fft_size: cube.doppler_fft_size,
        chirp,
        carrier_frequency: cube.radar.carrier_frequency,
        speed_of_light: c,
    }
}

/// Magnitudes over `[range_bin][doppler_bin][angle_bin]`, angle axis center-shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    pub magnitudes: Array3<f64>,
    pub rx_count: usize,
    pub spacing_wavelengths: f64,
    pub angle_fft_size: usize,
}

impl RadarCube {
    /// Normalized spatial frequency (cycles per element) of a shifted angle bin.
    pub fn spatial_frequency(&self, angle_bin: usize) -> f64 {
        centered_bin(angle_bin, self.angle_fft_size) as f64 / self.angle_fft_size as f64
    }

    /// `sin θ` of an angle bin, `None` outside the visible region.
    pub fn angle_sine(&self, angle_bin: usize) -> Option<f64> {
        let s = self.spatial_frequency(angle_bin) / self.spacing_wavelengths;
        (-1.0..=1.0).contains(&s).then_some(s)
    }

    /// Azimuth of an angle bin in degrees, `None` if the bin maps outside `[-90°, 90°]`.
    pub fn angle_of_bin(&self, angle_bin: usize) -> Option<f64> {
        self.angle_sine(angle_bin).map(|s| s.asin().to_degrees())
    }
}

/// `max(64, rx_count)`, except a single antenna gets a single bin.
pub fn default_angle_fft_size(rx_count: usize) -> usize {
    if rx_count <= 1 {
        1
    } else {
        rx_count.max(64)
    }
}

/// Angle FFT across receive channels.
pub fn angle_fft(cube: &DopplerCube, angle_fft_size: usize) -> Result<RadarCube, DspError> {
    let rx_count = cube.data.len_of(Axis(0));
    let spacing = cube.radar.rx_spacing_wavelengths;
    if angle_fft_size == 0 || angle_fft_size < rx_count {
        return Err(DspError::InvalidGeometry(format!(
            "angle FFT size {angle_fft_size} must be at least the rx count {rx_count}"
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(DspError::InvalidGeometry(format!(
            "element spacing must be positive, got {spacing} wavelengths"
        )));
    }
    let spectrum = transform_axis(&cube.data, Axis(0), angle_fft_size, Window::None, true);
    let magnitudes = spectrum
        .map(|x| x.norm())
        .permuted_axes([1, 2, 0])
        .as_standard_layout()
        .into_owned();
    Ok(RadarCube {
        magnitudes,
        rx_count,
        spacing_wavelengths: spacing,
        angle_fft_size,
    })
}

/// Range-Doppler map with values scaled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub values: Array2<f64>,
    /// Maximum of the source magnitudes (0 for an all-zero map).
    pub source_max: f64,
}

/// Divides by the global maximum; an all-zero map stays all zero.
pub fn normalize_heatmap(map: &RangeDopplerMap) -> Heatmap {
    let max = map.magnitudes.iter().copied().fold(0.0_f64, f64::max);
    let values = if max > 0.0 {
        map.magnitudes.map(|v| v / max)
    } else {
        Array2::zeros(map.magnitudes.raw_dim())
    };
    Heatmap {
        values,
        source_max: max,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspOptions {
    pub range_fft_size: Option<usize>,
    pub doppler_fft_size: Option<usize>,
    /// Defaults to [`default_angle_fft_size`].
    pub angle_fft_size: Option<usize>,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedFrame {
    pub doppler: DopplerCube,
    pub rd_map: RangeDopplerMap,
    pub radar_cube: RadarCube,
}

/// Runs range, Doppler and angle FFTs on one frame.
pub fn process_frame(cube: &RawFrameCube, opts: &DspOptions) -> Result<ProcessedFrame, DspError> {
    let profiles = range_fft(cube, opts.range_fft_size, opts.window)?;
    let doppler = doppler_fft(&profiles, opts.doppler_fft_size, opts.window)?;
    let rd_map = range_doppler_map(&doppler);
    let size = opts
        .angle_fft_size
        .unwrap_or_else(|| default_angle_fft_size(cube.rx_count()));
    let radar_cube = angle_fft(&doppler, size)?;
    Ok(ProcessedFrame {
        doppler,
        rd_map,
        radar_cube,
    })
}

/// Elementwise magnitude, handy for tests and exporters.
pub fn magnitudes(data: &Array3<Complex64>) -> Array3<f64> {
    let mut out = Array3::zeros(data.raw_dim());
    Zip::from(&mut out).and(data).for_each(|o, x| *o = x.norm());
    out
}
