//! On-disk artifacts. Every writer has a matching reader, and
//! write → read → write reproduces the same bytes.
//!
//! | file          | content                                                        |
//! |---------------|----------------------------------------------------------------|
//! | `rdmap.csv`   | `#` key=value header, then one row per range bin               |
//! | `rdmap.f32`   | little-endian f32, row-major `[range][doppler]`, JSON sidecar  |
//! | `heatmap.pgm` | plain PGM (P2), width = Doppler bins, height = range bins      |
//! | `points.csv`  | `frame,x_m,y_m,v_mps,magnitude,cluster,track_id`               |
//! | `tracks.csv`  | `frame,track_id,status,x_m,y_m,vx_mps,vy_mps,hits,misses`      |
//! | `cube.json`   | raw frame metadata; samples in `cube.bin` (f64 LE re/im pairs) |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fmcw_core::scene::{RadarMeta, RawFrameCube, SampleKind, SceneConfig};
use fmcw_core::track::{Track, TrackStatus};
use fmcw_core::{ChirpParams, Heatmap, RadarPoint, RangeDopplerMap};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::number::{fmt_exact, fmt_sig9};

pub const POINTS_HEADER: &str = "frame,x_m,y_m,v_mps,magnitude,cluster,track_id";
pub const TRACKS_HEADER: &str = "frame,track_id,status,x_m,y_m,vx_mps,vy_mps,hits,misses";

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| CliError::format(path, line, format!("cannot parse `{name}` from {s:?}")))
}

// ---------------------------------------------------------------- RD map

/// Scalars that travel with a range-Doppler map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdMapMeta {
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub range_fft_size: usize,
    pub doppler_fft_size: usize,
    pub range_resolution_m: f64,
    pub range_bin_m: f64,
    pub velocity_bin_mps: f64,
    pub f_start_hz: f64,
    pub bandwidth_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub num_chirps: usize,
    pub carrier_hz: f64,
    pub speed_of_light_mps: f64,
}

impl RdMapMeta {
    pub fn of(map: &RangeDopplerMap) -> Self {
        Self {
            range_bins: map.range_bins(),
            doppler_bins: map.doppler_bins(),
            range_fft_size: map.range_fft_size,
            doppler_fft_size: map.doppler_fft_size,
            range_resolution_m: map.range_resolution,
            range_bin_m: map.range_bin_m,
            velocity_bin_mps: map.doppler_velocity_resolution,
            f_start_hz: map.chirp.f_start,
            bandwidth_hz: map.chirp.bandwidth,
            duration_s: map.chirp.duration,
            sample_rate_hz: map.chirp.sample_rate,
            num_chirps: map.chirp.num_chirps,
            carrier_hz: map.carrier_frequency,
            speed_of_light_mps: map.speed_of_light,
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("range_bins", self.range_bins.to_string()),
            ("doppler_bins", self.doppler_bins.to_string()),
            ("range_fft_size", self.range_fft_size.to_string()),
            ("doppler_fft_size", self.doppler_fft_size.to_string()),
            ("range_resolution_m", fmt_exact(self.range_resolution_m)),
            ("range_bin_m", fmt_exact(self.range_bin_m)),
            ("velocity_bin_mps", fmt_exact(self.velocity_bin_mps)),
            ("f_start_hz", fmt_exact(self.f_start_hz)),
            ("bandwidth_hz", fmt_exact(self.bandwidth_hz)),
            ("duration_s", fmt_exact(self.duration_s)),
            ("sample_rate_hz", fmt_exact(self.sample_rate_hz)),
            ("num_chirps", self.num_chirps.to_string()),
            ("carrier_hz", fmt_exact(self.carrier_hz)),
            ("speed_of_light_mps", fmt_exact(self.speed_of_light_mps)),
        ]
    }

    fn from_entries(kv: &BTreeMap<String, (usize, String)>, path: &Path) -> Result<Self> {
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, (usize, String)>, path: &Path, key: &str) -> Result<T> {
            let (line, v) = kv
                .get(key)
                .ok_or_else(|| CliError::format(path, 1, format!("missing metadata key `{key}`")))?;
            parse_field(path, *line, key, v)
        }
        Ok(Self {
            range_bins: get(kv, path, "range_bins")?,
            doppler_bins: get(kv, path, "doppler_bins")?,
            range_fft_size: get(kv, path, "range_fft_size")?,
            doppler_fft_size: get(kv, path, "doppler_fft_size")?,
            range_resolution_m: get(kv, path, "range_resolution_m")?,
            range_bin_m: get(kv, path, "range_bin_m")?,
            velocity_bin_mps: get(kv, path, "velocity_bin_mps")?,
            f_start_hz: get(kv, path, "f_start_hz")?,
            bandwidth_hz: get(kv, path, "bandwidth_hz")?,
            duration_s: get(kv, path, "duration_s")?,
            sample_rate_hz: get(kv, path, "sample_rate_hz")?,
            num_chirps: get(kv, path, "num_chirps")?,
            carrier_hz: get(kv, path, "carrier_hz")?,
            speed_of_light_mps: get(kv, path, "speed_of_light_mps")?,
        })
    }

    fn into_map(self, magnitudes: Array2<f64>) -> RangeDopplerMap {
        RangeDopplerMap {
            magnitudes,
            range_resolution: self.range_resolution_m,
            range_bin_m: self.range_bin_m,
            doppler_velocity_resolution: self.velocity_bin_mps,
            range_fft_size: self.range_fft_size,
            doppler_fft_size: self.doppler_fft_size,
            chirp: ChirpParams {
                f_start: self.f_start_hz,
                bandwidth: self.bandwidth_hz,
                duration: self.duration_s,
                sample_rate: self.sample_rate_hz,
                num_chirps: self.num_chirps,
            },
            carrier_frequency: self.carrier_hz,
            speed_of_light: self.speed_of_light_mps,
        }
    }
}

/// CSV text: metadata comments, then magnitudes with 9 significant digits.
/// Rows are range bins (unshifted); columns are Doppler bins with zero
/// velocity at column `doppler_fft_size / 2`.
pub fn rdmap_csv(map: &RangeDopplerMap) -> String {
    let mut out = String::from("# fmcw range-doppler map\n");
    for (k, v) in RdMapMeta::of(map).entries() {
        let _ = writeln!(out, "# {k}={v}");
    }
    for row in map.magnitudes.rows() {
        let cells: Vec<String> = row.iter().map(|v| fmt_sig9(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_rdmap_csv(map: &RangeDopplerMap, path: &Path) -> Result<()> {
    write_file(path, rdmap_csv(map))
}

pub fn read_rdmap_csv(path: &Path) -> Result<RangeDopplerMap> {
    let text = read_text(path)?;
    let mut kv = BTreeMap::new();
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                kv.insert(k.trim().to_string(), (lineno, v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for cell in line.split(',') {
            values.push(parse_field::<f64>(path, lineno, "magnitude", cell)?);
        }
        let n = values.len() - before;
        if *cols.get_or_insert(n) != n {
            return Err(CliError::format(
                path,
                lineno,
                format!("expected {} columns, found {n}", cols.unwrap()),
            ));
        }
        rows += 1;
    }
    let meta = RdMapMeta::from_entries(&kv, path)?;
    let cols = cols.unwrap_or(0);
    if rows != meta.range_bins || cols != meta.doppler_bins {
        return Err(CliError::format(
            path,
            1,
            format!(
                "header declares {}x{} but data is {rows}x{cols}",
                meta.range_bins, meta.doppler_bins
            ),
        ));
    }
    let mags = Array2::from_shape_vec((rows, cols), values).expect("shape checked");
    Ok(meta.into_map(mags))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySidecar {
    pub format: String,
    pub dtype: String,
    pub byte_order: String,
    pub layout: String,
    pub meta: RdMapMeta,
}

/// Sidecar path for a binary map: `rdmap.f32` → `rdmap.f32.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` (f32 LE) and its JSON sidecar; returns the sidecar path.
pub fn write_rdmap_binary(map: &RangeDopplerMap, path: &Path) -> Result<PathBuf> {
    let bytes: Vec<u8> = map.magnitudes.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    write_file(path, bytes)?;
    let sidecar = BinarySidecar {
        format: "fmcw-rdmap".into(),
        dtype: "float32".into(),
        byte_order: "little".into(),
        layout: "row-major [range_bin][doppler_bin]".into(),
        meta: RdMapMeta::of(map),
    };
    let side = sidecar_path(path);
    write_file(&side, to_json(&sidecar))?;
    Ok(side)
}

pub fn read_rdmap_binary(path: &Path) -> Result<RangeDopplerMap> {
    let side = sidecar_path(path);
    let sidecar: BinarySidecar =
        serde_json::from_str(&read_text(&side)?).map_err(|e| CliError::format(&side, e.line(), e.to_string()))?;
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let meta = sidecar.meta;
    let expected = meta.range_bins * meta.doppler_bins * 4;
    if bytes.len() != expected {
        return Err(CliError::format(
            path,
            0,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    let mags = Array2::from_shape_vec((meta.range_bins, meta.doppler_bins), values).expect("length checked");
    Ok(meta.into_map(mags))
}

// ---------------------------------------------------------------- heatmap

/// `floor(v·255 + 0.5)` clamped to `0..=255`.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn heatmap_pgm(heatmap: &Heatmap) -> String {
    let (h, w) = heatmap.values.dim();
    let mut out = format!("P2\n{w} {h}\n255\n");
    for row in heatmap.values.rows() {
        let cells: Vec<String> = row.iter().map(|v| quantize(*v).to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_heatmap_pgm(heatmap: &Heatmap, path: &Path) -> Result<()> {
    write_file(path, heatmap_pgm(heatmap))
}

/// Reads a plain PGM into gray levels `[row][col]` and its maxval.
pub fn read_pgm(path: &Path) -> Result<(Array2<u16>, u16)> {
    let text = read_text(path)?;
    // tokens with their line numbers; `#` starts a comment
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        body.split_whitespace().map(move |t| (i + 1, t))
    });
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| CliError::format(path, 0, format!("unexpected end of file reading {what}")))
    };
    let (line, magic) = next("magic")?;
    if magic != "P2" {
        return Err(CliError::format(path, line, format!("expected P2, found {magic:?}")));
    }
    let (line, w) = next("width")?;
    let w: usize = parse_field(path, line, "width", w)?;
    let (line, h) = next("height")?;
    let h: usize = parse_field(path, line, "height", h)?;
    let (line, maxval) = next("maxval")?;
    let maxval: u16 = parse_field(path, line, "maxval", maxval)?;
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let (line, v) = next("pixel")?;
        let v: u16 = parse_field(path, line, "pixel", v)?;
        if v > maxval {
            return Err(CliError::format(
                path,
                line,
                format!("pixel {v} exceeds maxval {maxval}"),
            ));
        }
        data.push(v);
    }
    Ok((
        Array2::from_shape_vec((h, w), data).expect("pixel count matches"),
        maxval,
    ))
}

// ---------------------------------------------------------------- points

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRow {
    pub frame: u64,
    pub point: RadarPoint,
    /// DBSCAN label, `-1` for noise or not clustered.
    pub cluster: i64,
    pub track_id: Option<u64>,
}

pub fn points_csv(rows: &[PointRow]) -> String {
    let mut out = format!("{POINTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.frame,
            fmt_sig9(r.point.x),
            fmt_sig9(r.point.y),
            fmt_sig9(r.point.z),
            fmt_sig9(r.point.magnitude),
            r.cluster,
            r.track_id.map(|t| t.to_string()).unwrap_or_default()
        );
    }
    out
}

pub fn write_point_cloud_csv(rows: &[PointRow], path: &Path) -> Result<()> {
    write_file(path, points_csv(rows))
}

fn csv_records<'a>(text: &'a str, path: &Path, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((_, h)) => {
            return Err(CliError::format(
                path,
                1,
                format!("expected header {header:?}, found {h:?}"),
            ))
        }
        None => return Err(CliError::format(path, 1, "empty file")),
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').collect())))
}

fn expect_fields(path: &Path, line: usize, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(CliError::format(
            path,
            line,
            format!("expected {n} fields, found {}", fields.len()),
        ))
    }
}

pub fn read_point_cloud_csv(path: &Path) -> Result<Vec<PointRow>> {
    let text = read_text(path)?;
    let rows = csv_records(&text, path, POINTS_HEADER)?
        .map(|(line, f)| {
            expect_fields(path, line, &f, 7)?;
            let track = f[6].trim();
            Ok(PointRow {
                frame: parse_field(path, line, "frame", f[0])?,
                point: RadarPoint {
                    x: parse_field(path, line, "x_m", f[1])?,
                    y: parse_field(path, line, "y_m", f[2])?,
                    z: parse_field(path, line, "v_mps", f[3])?,
                    magnitude: parse_field(path, line, "magnitude", f[4])?,
                },
                cluster: parse_field(path, line, "cluster", f[5])?,
                track_id: if track.is_empty() {
                    None
                } else {
                    Some(parse_field(path, line, "track_id", track)?)
                },
            })
        })
        .collect();
    rows
}

// ---------------------------------------------------------------- tracks

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: u64,
    pub track_id: u64,
    pub status: TrackStatus,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub hits: u32,
    pub misses: u32,
}

impl TrackRow {
    pub fn of(frame: u64, t: &Track) -> Self {
        Self {
            frame,
            track_id: t.id,
            status: t.status,
            x: t.state[0],
            y: t.state[1],
            vx: t.state[2],
            vy: t.state[3],
            hits: t.hits,
            misses: t.misses,
        }
    }
}

fn parse_status(path: &Path, line: usize, s: &str) -> Result<TrackStatus> {
    match s.trim() {
        "tentative" => Ok(TrackStatus::Tentative),
        "confirmed" => Ok(TrackStatus::Confirmed),
        "deleted" => Ok(TrackStatus::Deleted),
        other => Err(CliError::format(path, line, format!("unknown track status {other:?}"))),
    }
}

pub fn tracks_csv(rows: &[TrackRow]) -> String {
    let mut out = format!("{TRACKS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.frame,
            r.track_id,
            r.status.as_str(),
            fmt_sig9(r.x),
            fmt_sig9(r.y),
            fmt_sig9(r.vx),
            fmt_sig9(r.vy),
            r.hits,
            r.misses
        );
    }
    out
}

pub fn write_tracks_csv(rows: &[TrackRow], path: &Path) -> Result<()> {
    write_file(path, tracks_csv(rows))
}

pub fn read_tracks_csv(path: &Path) -> Result<Vec<TrackRow>> {
    let text = read_text(path)?;
    let rows = csv_records(&text, path, TRACKS_HEADER)?
        .map(|(line, f)| {
            expect_fields(path, line, &f, 9)?;
            Ok(TrackRow {
                frame: parse_field(path, line, "frame", f[0])?,
                track_id: parse_field(path, line, "track_id", f[1])?,
                status: parse_status(path, line, f[2])?,
                x: parse_field(path, line, "x_m", f[3])?,
                y: parse_field(path, line, "y_m", f[4])?,
                vx: parse_field(path, line, "vx_mps", f[5])?,
                vy: parse_field(path, line, "vy_mps", f[6])?,
                hits: parse_field(path, line, "hits", f[7])?,
                misses: parse_field(path, line, "misses", f[8])?,
            })
        })
        .collect();
    rows
}

// ---------------------------------------------------------------- raw cube

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub format: String,
    /// `[rx, chirps, samples]`.
    pub shape: [usize; 3],
    pub kind: SampleKind,
    pub chirp: ChirpParams,
    pub radar: RadarMeta,
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    /// File holding the samples, relative to the header.
    pub data_file: String,
}

/// Writes `<stem>.json` and `<stem>.bin` next to each other.
pub fn write_cube(cube: &RawFrameCube, json_path: &Path) -> Result<()> {
    let bin_path = json_path.with_extension("bin");
    let (rx, chirps, samples) = cube.samples.dim();
    let header = CubeHeader {
        format: "fmcw-cube".into(),
        shape: [rx, chirps, samples],
        kind: cube.kind,
        chirp: cube.chirp,
        radar: cube.radar,
        scene: cube.scene.clone(),
        data_file: bin_path.file_name().expect("file name").to_string_lossy().into_owned(),
    };
    let bytes: Vec<u8> = cube
        .samples
        .iter()
        .flat_map(|c| c.re.to_le_bytes().into_iter().chain(c.im.to_le_bytes()))
        .collect();
    write_file(&bin_path, bytes)?;
    write_file(json_path, to_json(&header))
}

pub fn read_cube(json_path: &Path) -> Result<RawFrameCube> {
    let header: CubeHeader = serde_json::from_str(&read_text(json_path)?)
        .map_err(|e| CliError::format(json_path, e.line(), e.to_string()))?;
    let bin_path = json_path.parent().unwrap_or(Path::new(".")).join(&header.data_file);
    let bytes = fs::read(&bin_path).map_err(|e| CliError::io(&bin_path, e))?;
    let [rx, chirps, samples] = header.shape;
    let expected = rx * chirps * samples * 16;
    if bytes.len() != expected {
        return Err(CliError::format(
            &bin_path,
            0,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    let cube = RawFrameCube {
        samples: Array3::from_shape_vec((rx, chirps, samples), values).expect("length checked"),
        chirp: header.chirp,
        radar: header.radar,
        kind: header.kind,
        scene: header.scene,
    };
    cube.validate()
        .map_err(|e| CliError::format(json_path, 0, e.to_string()))?;
    Ok(cube)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
