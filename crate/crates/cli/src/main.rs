use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fmcw_cli::config::{ClusterSection, PipelineConfig, TrackerSection};
use fmcw_cli::error::{CliError, Result};
use fmcw_cli::io::{self, PointRow, TrackRow};
use fmcw_cli::number::fmt_sig9;
use fmcw_cli::pipeline::{self, centroids, frame_dir_name, point_track_ids};
use fmcw_cli::{load_config, run_pipeline};
use fmcw_core::cluster::{k_distance, suggest_eps};
use fmcw_core::detect::GridAxes;
use fmcw_core::{detect_peaks, normalize_heatmap, to_point_cloud, DetectPolicy, DspOptions, RadarPoint, Tracker};

#[derive(Parser)]
#[command(
    name = "fmcw",
    about = "FMCW radar simulation and processing pipeline",
    disable_version_flag = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate raw frame cubes (`frame_NNNN/cube.json` + `cube.bin`).
    Simulate {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lenient: bool,
    },
    /// Range/Doppler FFTs of one cube: `rdmap.csv`, `heatmap.pgm`.
    Process {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(short = 'c', long = "config")]
        config: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
        /// Also write `rdmap.f32` with a JSON sidecar.
        #[arg(long)]
        binary: bool,
    },
    /// Peak detection into `points.csv`. Input is a cube (`.json`), an
    /// RD-map CSV or a binary RD map; maps carry no angle, so their points
    /// sit at broadside.
    Detect {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(short = 'c', long = "config")]
        config: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
        /// Frame number written to the CSV.
        #[arg(long, default_value_t = 0)]
        frame: u64,
    },
    /// DBSCAN over each frame of a point CSV.
    Cluster {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(short = 'c', long = "config")]
        config: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long = "min-pts")]
        min_pts: Option<usize>,
    },
    /// Track cluster centroids across the frames of one or more point CSVs.
    Track {
        #[arg(short = 'i', long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        #[arg(short = 'c', long = "config")]
        config: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Sorted k-distances of a point CSV and the suggested eps.
    Kdist {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'k')]
        k: usize,
    },
    /// Full run: simulate → process → detect → cluster → track.
    Pipeline {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        /// Defaults to the config's `output_dir`.
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lenient: bool,
    },
    /// Print version information.
    Version,
}

/// Stage settings from an optional config file; defaults otherwise.
struct Settings {
    dsp: DspOptions,
    detect: DetectPolicy,
    cluster: ClusterSection,
    tracker: TrackerSection,
    frame_interval: f64,
}

impl Settings {
    fn load(path: Option<&Path>, lenient: bool) -> Result<Self> {
        Ok(match path {
            Some(p) => {
                let c = load_config(p, lenient)?;
                Self {
                    dsp: c.dsp,
                    detect: c.detect,
                    cluster: c.cluster,
                    tracker: c.tracker,
                    frame_interval: c.frame_interval,
                }
            }
            None => Self {
                dsp: DspOptions::default(),
                detect: DetectPolicy::default(),
                cluster: ClusterSection::default(),
                tracker: TrackerSection::default(),
                frame_interval: 0.05,
            },
        })
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn by_frame(rows: Vec<PointRow>) -> BTreeMap<u64, Vec<PointRow>> {
    let mut frames: BTreeMap<u64, Vec<PointRow>> = BTreeMap::new();
    for r in rows {
        frames.entry(r.frame).or_default().push(r);
    }
    frames
}

fn simulate_cmd(config: &Path, out: &Path, seed: Option<u64>, lenient: bool) -> Result<()> {
    let cfg = load_config(config, lenient)?;
    let (seed, _) = cfg.resolve_seed(seed)?;
    for f in 0..cfg.num_frames {
        let cube = pipeline::simulate(&cfg, seed, f)?;
        let dir = out.join(frame_dir_name(f));
        create_dir(&dir)?;
        io::write_cube(&cube, &dir.join("cube.json"))?;
    }
    println!("wrote {} frame(s) to {}", cfg.num_frames, out.display());
    Ok(())
}

fn process_cmd(input: &Path, out: &Path, settings: &Settings, binary: bool) -> Result<()> {
    let cube = io::read_cube(input)?;
    let frame = fmcw_core::process_frame(&cube, &settings.dsp).map_err(|e| CliError::stage("process", e))?;
    create_dir(out)?;
    io::write_rdmap_csv(&frame.rd_map, &out.join("rdmap.csv"))?;
    io::write_heatmap_pgm(&normalize_heatmap(&frame.rd_map), &out.join("heatmap.pgm"))?;
    if binary {
        io::write_rdmap_binary(&frame.rd_map, &out.join("rdmap.f32"))?;
    }
    Ok(())
}

fn detect_cmd(input: &Path, out: &Path, settings: &Settings, frame: u64) -> Result<()> {
    let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("");
    let points: Vec<RadarPoint> = match ext {
        "json" => pipeline::detect(&settings.dsp, &settings.detect, &io::read_cube(input)?)?.1,
        "csv" | "f32" => {
            let map = if ext == "csv" {
                io::read_rdmap_csv(input)?
            } else {
                io::read_rdmap_binary(input)?
            };
            let dets = detect_peaks(&map, &settings.detect);
            to_point_cloud(&dets, &GridAxes::from_map(&map, None)).map_err(|e| CliError::stage("detect", e))?
        }
        _ => {
            return Err(CliError::stage(
                "detect",
                format!("{}: expected a cube .json, rdmap .csv or rdmap .f32", input.display()),
            ))
        }
    };
    let rows: Vec<PointRow> = points
        .into_iter()
        .map(|point| PointRow {
            frame,
            point,
            cluster: -1,
            track_id: None,
        })
        .collect();
    create_dir(out)?;
    io::write_point_cloud_csv(&rows, &out.join("points.csv"))?;
    println!("{} detection(s)", rows.len());
    Ok(())
}

fn cluster_cmd(input: &Path, out: &Path, settings: &Settings, eps: Option<f64>, min_pts: Option<usize>) -> Result<()> {
    let mut section = settings.cluster.clone();
    section.eps = eps.unwrap_or(section.eps);
    section.min_pts = min_pts.unwrap_or(section.min_pts);
    let params = section.params();
    params
        .validate(3)
        .map_err(|e| CliError::invalid("cluster", e.to_string()))?;
    let mut rows = Vec::new();
    for (_, mut frame_rows) in by_frame(io::read_point_cloud_csv(input)?) {
        let pts: Vec<RadarPoint> = frame_rows.iter().map(|r| r.point).collect();
        let labels = pipeline::cluster(&params, &pts)?;
        for (r, l) in frame_rows.iter_mut().zip(&labels.labels) {
            r.cluster = *l;
            r.track_id = None;
        }
        rows.extend(frame_rows);
    }
    create_dir(out)?;
    io::write_point_cloud_csv(&rows, &out.join("points.csv"))
}

fn track_cmd(inputs: &[PathBuf], out: &Path, settings: &Settings) -> Result<()> {
    let mut all = Vec::new();
    for p in inputs {
        all.extend(io::read_point_cloud_csv(p)?);
    }
    let config = settings.tracker.tracker_config(settings.frame_interval);
    let mut tracker = Tracker::new(config).map_err(|e| CliError::invalid("tracker", e.to_string()))?;
    let mut points_out = Vec::new();
    let mut tracks_out = Vec::new();
    for (frame, mut rows) in by_frame(all) {
        let pts: Vec<RadarPoint> = rows.iter().map(|r| r.point).collect();
        let labels = fmcw_core::cluster::Labeling {
            labels: rows.iter().map(|r| r.cluster).collect(),
            core: vec![false; rows.len()],
        };
        let step = tracker
            .step(&centroids(&pts, &labels))
            .map_err(|e| CliError::stage("track", format!("frame {frame}: {e}")))?;
        for (r, id) in rows.iter_mut().zip(point_track_ids(&labels, &step.detection_tracks)) {
            r.track_id = id;
        }
        points_out.extend(rows);
        tracks_out.extend(step.tracks.iter().map(|t| TrackRow::of(frame, t)));
    }
    create_dir(out)?;
    io::write_point_cloud_csv(&points_out, &out.join("points.csv"))?;
    io::write_tracks_csv(&tracks_out, &out.join("tracks.csv"))
}

fn kdist_cmd(input: &Path, k: usize) -> Result<()> {
    let pts: Vec<[f64; 3]> = io::read_point_cloud_csv(input)?.iter().map(|r| r.point.xyz()).collect();
    let kd = k_distance(&pts, k).map_err(|e| CliError::stage("kdist", e))?;
    for d in &kd {
        println!("{}", fmt_sig9(*d));
    }
    let knee = suggest_eps(&kd).map_err(|e| CliError::stage("kdist", e))?;
    let note = if knee.degenerate {
        " (flat curve, no clear knee)"
    } else {
        ""
    };
    println!("suggested eps: {} (index {}){note}", fmt_sig9(knee.eps), knee.index);
    Ok(())
}

fn pipeline_cmd(config: &Path, out: Option<PathBuf>, seed: Option<u64>, lenient: bool) -> Result<()> {
    let cfg: PipelineConfig = load_config(config, lenient)?;
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::invalid("output_dir", "is required when -o is not given"))?;
    let (seed, _) = cfg.resolve_seed(seed)?;
    let manifest = run_pipeline(&cfg, seed, &out)?;
    println!(
        "{} frame(s), {} confirmed track(s), parameter hash {}",
        manifest.num_frames,
        manifest.final_confirmed_tracks.len(),
        manifest.parameter_hash
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            lenient,
        } => simulate_cmd(&config, &out, seed, lenient),
        Command::Process {
            input,
            out,
            config,
            lenient,
            binary,
        } => process_cmd(&input, &out, &Settings::load(config.as_deref(), lenient)?, binary),
        Command::Detect {
            input,
            out,
            config,
            lenient,
            frame,
        } => detect_cmd(&input, &out, &Settings::load(config.as_deref(), lenient)?, frame),
        Command::Cluster {
            input,
            out,
            config,
            lenient,
            eps,
            min_pts,
        } => cluster_cmd(&input, &out, &Settings::load(config.as_deref(), lenient)?, eps, min_pts),
        Command::Track {
            inputs,
            out,
            config,
            lenient,
        } => track_cmd(&inputs, &out, &Settings::load(config.as_deref(), lenient)?),
        Command::Kdist { input, k } => kdist_cmd(&input, k),
        Command::Pipeline {
            config,
            out,
            seed,
            lenient,
        } => pipeline_cmd(&config, out, seed, lenient),
        Command::Version => {
            println!("fmcw {} (fmcw-core {})", env!("CARGO_PKG_VERSION"), fmcw_core::VERSION);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
