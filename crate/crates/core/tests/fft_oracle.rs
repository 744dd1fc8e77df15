use std::f64::consts::PI;

use fmcw_core::dsp::dft;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, v)| {
                    // reduce k·j mod n before scaling to keep the angle small
                    let phase = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn random_seq(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn fast_transform_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0F0);
    let mut sizes: Vec<usize> = vec![2, 3, 7, 64, 97, 128, 1000, 1024];
    sizes.extend((0..42).map(|_| rng.random_range(2..=1024)));
    for n in sizes {
        let x = random_seq(&mut rng, n);
        let fast = dft(&x, None).unwrap();
        let slow = naive_dft(&x);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-9 * norm(&x), "n={n} err={err}");
    }
}

#[test]
fn parseval_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.random_range(2..=1024);
        let x = random_seq(&mut rng, n);
        let time = norm(&x).powi(2);
        let freq = norm(&dft(&x, None).unwrap()).powi(2) / n as f64;
        assert!((time - freq).abs() <= 1e-9 * time, "n={n}");
    }
}

#[test]
fn zero_padding_matches_padded_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_seq(&mut rng, 20);
    let fast = dft(&x, Some(64)).unwrap();
    let mut padded = x.clone();
    padded.resize(64, Complex64::new(0.0, 0.0));
    let slow = naive_dft(&padded);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).norm() < 1e-10);
    }
}
