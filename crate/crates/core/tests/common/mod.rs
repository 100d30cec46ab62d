#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qcd_fcm::MTSeries;

/// Bivariate Gaussian noise series with a little lag-1 mixing so spectra are not flat.
pub fn random_series(id: &str, len: usize, seed: u64) -> MTSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: f64 = rng.random_range(-0.6..0.6);
    let mut prev = [0.0f64; 2];
    let mut rows = Vec::with_capacity(len);
    for _ in 0..len {
        let e: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let x = [phi * prev[1] + e[0], phi * prev[0] + e[1]];
        rows.push(x.to_vec());
        prev = x;
    }
    MTSeries::from_rows(id, &rows).unwrap()
}

/// Two tight 2-D blobs around (0, 0) and (10, 10), `per` points each, optionally with
/// one far outlier appended last.
pub fn blobs(per: usize, seed: u64, outlier: bool) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<[f64; 2]> = Vec::new();
    for c in 0..2 {
        let centre = 10.0 * c as f64;
        for _ in 0..per {
            rows.push([centre + 0.5 * rng.sample::<f64, _>(StandardNormal), centre + 0.5 * rng.sample::<f64, _>(StandardNormal)]);
        }
    }
    if outlier {
        rows.push([500.0, -500.0]);
    }
    DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j])
}

/// Minimum of the fuzzy objective (m = 2, C = 2, q = 1) over memberships on a 0.01 grid,
/// with the optimal centroids for each membership matrix.
pub fn grid_minimum(x: &[f64]) -> f64 {
    let n = x.len();
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut stats = [[0.0f64; 3]; 2];
        for (i, &k) in idx.iter().enumerate() {
            let u = k as f64 / 100.0;
            for (c, w) in [u * u, (1.0 - u) * (1.0 - u)].into_iter().enumerate() {
                stats[c][0] += w;
                stats[c][1] += w * x[i];
                stats[c][2] += w * x[i] * x[i];
            }
        }
        if stats.iter().all(|s| s[0] > 0.0) {
            let j: f64 = stats.iter().map(|s| s[2] - s[1] * s[1] / s[0]).sum();
            best = best.min(j);
        }
        let mut p = 0;
        while p < n {
            idx[p] += 1;
            if idx[p] <= 100 {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == n {
            return best;
        }
    }
}
