use fmcw_core::cluster::{NeighborSearch, NOISE};
use fmcw_core::{dbscan, DbscanParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadratic reference: cores are linked by union-find, a border point
/// joins the adjacent core component whose smallest core index is lowest.
fn reference(points: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<i64> {
    let n = points.len();
    let close = |i: usize, j: usize| {
        let d2: f64 = (0..3).map(|a| (points[i][a] - points[j][a]).powi(2)).sum();
        d2 <= eps * eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| close(i, j)).count() >= min_pts)
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if core[i] && core[j] && close(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                // keep the smaller index as root
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let root: Vec<Option<usize>> = (0..n)
        .map(|i| {
            if core[i] {
                Some(find(&mut parent, i))
            } else {
                (0..n)
                    .filter(|&j| core[j] && close(i, j))
                    .map(|j| find(&mut parent, j))
                    .min()
            }
        })
        .collect();
    let mut roots: Vec<usize> = root.iter().flatten().copied().collect();
    roots.sort_unstable();
    roots.dedup();
    root.iter()
        .map(|r| r.map_or(NOISE, |r| roots.binary_search(&r).unwrap() as i64))
        .collect()
}

/// Relabels clusters in order of first appearance so bijections compare equal.
fn canonical(labels: &[i64]) -> Vec<i64> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                NOISE
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

fn blobs(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    let centers: Vec<[f64; 3]> = (0..rng.random_range(1..6))
        .map(|_| {
            [
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-5.0..5.0),
            ]
        })
        .collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.15) {
                [
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-8.0..8.0),
                ]
            } else {
                let c = centers[rng.random_range(0..centers.len())];
                [
                    c[0] + rng.random_range(-2.0..2.0),
                    c[1] + rng.random_range(-2.0..2.0),
                    c[2] + rng.random_range(-1.0..1.0),
                ]
            }
        })
        .collect()
}

#[test]
fn matches_quadratic_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let n = rng.random_range(1..=200);
        let pts = blobs(&mut rng, n);
        let eps = rng.random_range(0.5..3.0);
        let min_pts = rng.random_range(2..8);
        let want = canonical(&reference(&pts, eps, min_pts));
        for search in [NeighborSearch::BruteForce, NeighborSearch::Grid] {
            let params = DbscanParams {
                search,
                ..DbscanParams::new(eps, min_pts)
            };
            let got = dbscan(&pts, &params).unwrap();
            assert_eq!(canonical(&got.labels), want, "case {case} {search:?}");
        }
    }
}

#[test]
fn paper_six_points() {
    let pts = [
        [1.0, 2.0, 0.5],
        [2.0, 2.0, 0.6],
        [2.0, 3.0, 0.4],
        [8.0, 7.0, 1.0],
        [8.0, 8.0, 1.1],
        [100.0, 100.0, 10.0],
    ];
    let got = dbscan(&pts, &DbscanParams::new(2.0, 2)).unwrap();
    assert_eq!(got.labels, reference(&pts, 2.0, 2));
    assert_eq!(got.num_clusters(), 2);
    assert!(got.is_noise(5));
}
