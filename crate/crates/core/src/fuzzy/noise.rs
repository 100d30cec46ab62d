//! Fuzzy C-means with a noise cluster.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    argmax, best_of_restarts, centroid_update, max_abs_diff, memberships_from_dissimilarities, random_memberships,
    rows_of, squared_distances, weighted_objective, ClusterConfig, FuzzyPartition, NoiseDistance, Variant,
};
use crate::error::{Error, Result};

/// `δ = sqrt(λ · Σ_i Σ_c ‖x_i − v_c‖² / (n·C))` over the C real centroids.
pub fn compute_noise_distance(points: &DMatrix<f64>, centroids: &DMatrix<f64>, lambda: f64) -> f64 {
    let d2 = squared_distances(points, centroids);
    (lambda * d2.sum() / (points.nrows() * centroids.nrows()) as f64).sqrt()
}

fn with_noise_column(d2: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let c = d2.ncols();
    DMatrix::from_fn(d2.nrows(), c + 1, |i, k| if k < c { d2[(i, k)] } else { delta * delta })
}

/// Memberships over the real clusters plus a final noise column at distance δ.
pub fn noise_membership_update(points: &DMatrix<f64>, centroids: &DMatrix<f64>, m: f64, delta: f64) -> DMatrix<f64> {
    memberships_from_dissimilarities(&with_noise_column(&squared_distances(points, centroids), delta), m)
}

fn validate_distance(distance: NoiseDistance) -> Result<()> {
    match distance {
        NoiseDistance::Scale(l) if l > 0.0 && l.is_finite() => Ok(()),
        NoiseDistance::Fixed(d) if d > 0.0 && d.is_finite() => Ok(()),
        other => Err(Error::Config(format!("noise parameter {other:?} must be positive"))),
    }
}

/// Best-of-restarts noise-cluster fuzzy C-means. `config.clusters` counts real clusters.
pub fn fcm_noise_run(points: &DMatrix<f64>, config: &ClusterConfig, distance: NoiseDistance) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 1)?;
    validate_distance(distance)?;
    best_of_restarts(config, |seed| {
        let init = random_memberships(points.nrows(), config.clusters + 1, seed);
        fcm_noise_run_from(points, config, distance, &init, seed)
    })
}

/// One run from an n×(C+1) initial membership matrix (noise column last).
///
/// Iteration k fixes `δ_k` from the previous centroids, then updates centroids and
/// memberships. `phase_start_trace[k]` is the objective under `δ_k` at the incoming
/// state, so `trace[k] ≤ phase_start[k]`.
pub fn fcm_noise_run_from(
    points: &DMatrix<f64>,
    config: &ClusterConfig,
    distance: NoiseDistance,
    init: &DMatrix<f64>,
    seed: u64,
) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 1)?;
    validate_distance(distance)?;
    let (m, c) = (config.fuzziness, config.clusters);
    let all: Vec<usize> = (0..points.nrows()).collect();
    let mut u = init.clone();
    let mut centroids = centroid_update(points, &u, m, c)?;
    let mut trace = Vec::new();
    let mut phase = Vec::new();
    let mut converged = false;
    let mut delta = 0.0;
    for _ in 0..config.max_iter {
        delta = match distance {
            NoiseDistance::Scale(lambda) => compute_noise_distance(points, &centroids, lambda),
            NoiseDistance::Fixed(d) => d,
        };
        phase.push(weighted_objective(&u, &with_noise_column(&squared_distances(points, &centroids), delta), m, &all));
        centroids = centroid_update(points, &u, m, c)?;
        let dis = with_noise_column(&squared_distances(points, &centroids), delta);
        let next = memberships_from_dissimilarities(&dis, m);
        trace.push(weighted_objective(&next, &dis, m, &all));
        let change = max_abs_diff(&next, &u);
        u = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(FuzzyPartition {
        variant: Variant::Noise { distance },
        memberships: rows_of(&u).into_iter().map(Some).collect(),
        centroids: rows_of(&centroids),
        iterations: trace.len(),
        objective_trace: trace,
        phase_start_trace: phase,
        trimmed_ids: Vec::new(),
        converged,
        beta: None,
        noise_distance: Some(delta),
        config: config.clone(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanRow {
    pub lambda: f64,
    pub delta: f64,
    /// Fraction of points whose largest membership is the noise cluster.
    pub noise_fraction: f64,
}

/// One noise run per λ of a strictly decreasing positive grid.
pub fn delta_scan(points: &DMatrix<f64>, config: &ClusterConfig, lambdas: &[f64]) -> Result<Vec<DeltaScanRow>> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty λ grid".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("λ grid must be positive and strictly decreasing".into()));
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            let p = fcm_noise_run(points, config, NoiseDistance::Scale(lambda))?;
            let noise_col = config.clusters;
            let hits = p.memberships.iter().filter(|r| argmax(r.as_ref().unwrap()) == noise_col).count();
            Ok(DeltaScanRow {
                lambda,
                delta: p.noise_distance.unwrap_or(0.0),
                noise_fraction: hits as f64 / points.nrows() as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::fcm_run;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn blobs_with_outlier() -> DMatrix<f64> {
        let mut v: Vec<f64> = (0..6).map(|i| i as f64 * 0.02).collect();
        v.extend((0..6).map(|i| 1.0 + i as f64 * 0.02));
        v.push(100.0);
        col(&v)
    }

    #[test]
    fn noise_distance_examples() {
        assert!((compute_noise_distance(&col(&[0.0, 2.0]), &col(&[1.0]), 1.0) - 1.0).abs() < 1e-15);
        let pts = col(&[0.0, 1.0, 5.0]);
        let v = col(&[0.5, 4.0]);
        let a = compute_noise_distance(&pts, &v, 1.0);
        assert!((compute_noise_distance(&pts, &v, 4.0) - 2.0 * a).abs() < 1e-12);
        assert_eq!(compute_noise_distance(&col(&[3.0, 3.0]), &col(&[3.0]), 7.0), 0.0);
    }

    #[test]
    fn noise_membership_examples() {
        let u = noise_membership_update(&col(&[2.0]), &col(&[0.0]), 2.0, 2.0);
        assert!((u[(0, 0)] - 0.5).abs() < 1e-15 && (u[(0, 1)] - 0.5).abs() < 1e-15);
        let u = noise_membership_update(&col(&[0.0]), &col(&[0.0]), 2.0, 1.0);
        assert_eq!((u[(0, 0)], u[(0, 1)]), (1.0, 0.0));
        let pts = col(&[0.3, 0.8]);
        let v = col(&[0.0, 1.0]);
        let far = noise_membership_update(&pts, &v, 2.0, 1e8);
        let plain = crate::fuzzy::membership_update(&pts, &v, 2.0);
        for i in 0..2 {
            for c in 0..2 {
                assert!((far[(i, c)] - plain[(i, c)]).abs() < 1e-12);
            }
            assert!((far.row(i).sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn outlier_goes_to_noise() {
        let pts = blobs_with_outlier();
        let p = fcm_noise_run(&pts, &ClusterConfig::new(2, 2.0), NoiseDistance::Scale(0.002)).unwrap();
        for i in 0..12 {
            let row = p.memberships[i].as_ref().unwrap();
            assert!(row[0].max(row[1]) > 0.7);
        }
        assert!(p.noise_membership(12).unwrap() > 0.5);
        for k in 0..p.objective_trace.len() {
            assert!(p.objective_trace[k] <= p.phase_start_trace[k] * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn large_lambda_recovers_standard() {
        let pts = col(&[0.0, 0.1, 0.2, 3.0, 3.1, 3.3]);
        let cfg = ClusterConfig { tol: 1e-10, ..ClusterConfig::new(2, 2.0) };
        let plain = fcm_run(&pts, &cfg).unwrap();
        let noisy = fcm_noise_run(&pts, &cfg, NoiseDistance::Scale(1e6)).unwrap();
        for i in 0..6 {
            let a = plain.memberships[i].as_ref().unwrap();
            let b = noisy.memberships[i].as_ref().unwrap();
            assert!((a[0].max(a[1]) - b[0].max(b[1])).abs() < 0.05);
        }
    }

    #[test]
    fn scan_limits_and_trend() {
        let pts = col(&[0.0, 0.1, 0.2, 0.15, 3.0, 3.1, 3.3, 3.2]);
        let grid = [1e6, 1.0, 0.3, 0.1, 0.03, 0.01, 1e-4, 1e-8];
        let rows = delta_scan(&pts, &ClusterConfig::new(2, 2.0), &grid).unwrap();
        assert_eq!(rows[0].noise_fraction, 0.0);
        // each real centroid can collapse onto a single point, which then stays real
        assert!(rows.last().unwrap().noise_fraction >= 6.0 / 8.0);
        for w in rows.windows(2) {
            assert!(w[1].noise_fraction + 1.0 / 8.0 >= w[0].noise_fraction);
        }
        assert!(delta_scan(&pts, &ClusterConfig::new(2, 2.0), &[0.1, 0.2]).is_err());
    }
}
