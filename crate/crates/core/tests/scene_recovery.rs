use fmcw_core::detect::{assign_angles, GridAxes};
use fmcw_core::dsp::{range_fft, Window};
use fmcw_core::scene::beat_frequency;
use fmcw_core::{
    detect_peaks, process_frame, simulate_frame, to_point_cloud, ChirpParams, DetectPolicy, DspOptions, SceneConfig,
    Target,
};

fn desk_chirp() -> ChirpParams {
    ChirpParams::new(77e9, 150e6, 20e-6, 10e6, 128).unwrap()
}

fn desk_scene(noise_std: f64) -> SceneConfig {
    let mut s = SceneConfig::new(
        vec![
            Target::new(50.0, 19.0, 10.0, 1.0),
            Target::new(150.0, -15.0, -20.0, 1.0),
        ],
        77e9,
    );
    s.rx_count = 4;
    s.noise_std = noise_std;
    s.rng_seed = 42;
    s
}

#[test]
fn two_targets_recovered_in_range_and_velocity() {
    let chirp = desk_chirp();
    for noise in [0.0, 1.0 / 200f64.sqrt()] {
        let frame = process_frame(
            &simulate_frame(&desk_scene(noise), &chirp).unwrap(),
            &DspOptions::default(),
        )
        .unwrap();
        let map = &frame.rd_map;
        let dets = detect_peaks(map, &DetectPolicy::default());
        assert_eq!(dets.len(), 2, "noise={noise} dets={dets:?}");
        let dets = assign_angles(&dets, &frame.radar_cube);
        let pts = to_point_cloud(&dets, &GridAxes::from_map(map, Some(&frame.radar_cube))).unwrap();
        for (range, vel, az) in [(50.0, 19.0, 10.0), (150.0, -15.0, -20.0)] {
            let p = pts
                .iter()
                .min_by(|a, b| (a.range() - range).abs().total_cmp(&(b.range() - range).abs()))
                .unwrap();
            assert!(
                (p.range() - range).abs() <= map.range_bin_m,
                "range {} vs {range}",
                p.range()
            );
            assert!(
                (p.z - vel).abs() <= map.doppler_velocity_resolution,
                "vel {} vs {vel}",
                p.z
            );
            // four elements give a broad beam; one 64-point bin is ≈1.8° at broadside
            assert!((p.azimuth_deg() - az).abs() < 3.0, "az {} vs {az}", p.azimuth_deg());
        }
    }
}

#[test]
fn range_spectrum_is_linear_in_targets() {
    let chirp = ChirpParams::new(77e9, 150e6, 20e-6, 10e6, 4).unwrap();
    let a = Target::new(30.0, 3.0, 0.0, 1.0);
    let b = Target::new(90.0, -7.0, 0.0, 0.5);
    let cube = |targets| simulate_frame(&SceneConfig::new(targets, 77e9), &chirp).unwrap();
    let ca = cube(vec![a]);
    let cb = cube(vec![b]);
    let cab = cube(vec![a, b]);
    let sum = &ca.samples + &cb.samples;
    let max_err = sum
        .iter()
        .zip(cab.samples.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    assert!(max_err < 1e-9, "{max_err}");
}

#[test]
fn amplitude_scales_spectrum() {
    let chirp = ChirpParams::new(77e9, 150e6, 20e-6, 10e6, 2).unwrap();
    let spectrum = |amp| {
        let cube = simulate_frame(&SceneConfig::new(vec![Target::new(40.0, 0.0, 0.0, amp)], 77e9), &chirp).unwrap();
        range_fft(&cube, None, Window::None).unwrap().data
    };
    let one = spectrum(1.0);
    let three = spectrum(3.0);
    for (x, y) in one.iter().zip(three.iter()) {
        assert!((x * 3.0 - y).norm() < 1e-8);
    }
}

#[test]
fn on_grid_beat_lands_on_one_bin() {
    // 1 MHz / 10 MHz with 200 samples is exactly bin 20
    let chirp = ChirpParams::new(77e9, 150e6, 20e-6, 10e6, 2).unwrap();
    let c = fmcw_core::SPEED_OF_LIGHT;
    let range = 1e6 * c / (2.0 * chirp.slope());
    assert!((beat_frequency(chirp.slope(), range, c) - 1e6).abs() < 1e-6);
    let cube = simulate_frame(&SceneConfig::new(vec![Target::new(range, 0.0, 0.0, 1.0)], 77e9), &chirp).unwrap();
    let spec = range_fft(&cube, None, Window::None).unwrap().data;
    let row: Vec<f64> = (0..200).map(|k| spec[[0, 0, k]].norm()).collect();
    assert!((row[20] - 200.0).abs() < 1e-6);
    assert!(row.iter().enumerate().filter(|(k, _)| *k != 20).all(|(_, v)| *v < 1e-6));
}

#[test]
fn noise_power_matches_configured_std() {
    let chirp = ChirpParams::new(77e9, 150e6, 20e-6, 10e6, 64).unwrap();
    let mut scene = SceneConfig::new(Vec::new(), 77e9);
    scene.noise_std = 0.3;
    scene.rng_seed = 9;
    let cube = simulate_frame(&scene, &chirp).unwrap();
    let n = cube.samples.len() as f64;
    let power = cube.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n;
    let expected = 2.0 * 0.3 * 0.3;
    // 12 800 complex samples: relative std of the estimate ≈ 0.9 %
    assert!((power - expected).abs() < 0.05 * expected, "{power}");
    let mean = cube.samples.iter().sum::<num_complex::Complex64>() / n;
    assert!(mean.norm() < 0.02);
}

#[test]
fn seeded_noise_is_reproducible_and_seed_sensitive() {
    let chirp = ChirpParams::new(77e9, 150e6, 20e-6, 10e6, 8).unwrap();
    let mut scene = SceneConfig::new(vec![Target::new(20.0, 1.0, 0.0, 1.0)], 77e9);
    scene.noise_std = 0.1;
    scene.rx_count = 2;
    let a = simulate_frame(&scene, &chirp).unwrap();
    let b = simulate_frame(&scene, &chirp).unwrap();
    assert_eq!(a.samples, b.samples);
    scene.rng_seed = 1;
    let c = simulate_frame(&scene, &chirp).unwrap();
    assert_ne!(a.samples, c.samples);
}
