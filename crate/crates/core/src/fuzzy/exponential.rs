//! Exponential-dissimilarity fuzzy C-means.

use nalgebra::DMatrix;

use super::{
    best_of_restarts, centroid_update, max_abs_diff, memberships_from_dissimilarities, random_memberships, rows_of,
    squared_distances, weighted_centroids, weighted_objective, Beta, ClusterConfig, FuzzyPartition, Variant,
};
use crate::error::{Error, Result};

/// β from the medoid: `1 / mean_i ‖x_i − x_k‖²` with `k` minimizing the total squared
/// distance to all points (ties → smallest index).
pub fn select_beta(points: &DMatrix<f64>) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::Config("β selection needs at least two points".into()));
    }
    let d2 = squared_distances(points, points);
    let sums: Vec<f64> = (0..n).map(|k| d2.column(k).sum()).collect();
    let medoid = (0..n).fold(0, |best, k| if sums[k] < sums[best] { k } else { best });
    let mean = sums[medoid] / n as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("all points identical; β is undefined".into()));
    }
    Ok(1.0 / mean)
}

/// `1 − exp(−β d²)` for every point/centroid pair.
pub fn exp_dissimilarities(points: &DMatrix<f64>, centroids: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    squared_distances(points, centroids).map(|d| -(-beta * d).exp_m1())
}

/// Memberships under the exponential dissimilarity.
pub fn exp_membership_update(points: &DMatrix<f64>, centroids: &DMatrix<f64>, m: f64, beta: f64) -> DMatrix<f64> {
    memberships_from_dissimilarities(&exp_dissimilarities(points, centroids, beta), m)
}

fn resolve_beta(points: &DMatrix<f64>, beta: Beta) -> Result<f64> {
    match beta {
        Beta::Auto => select_beta(points),
        Beta::Fixed(b) if b > 0.0 && b.is_finite() => Ok(b),
        Beta::Fixed(b) => Err(Error::Config(format!("β = {b} must be positive"))),
    }
}

/// Best-of-restarts exponential fuzzy C-means.
pub fn fcm_exponential_run(points: &DMatrix<f64>, config: &ClusterConfig, beta: Beta) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 2)?;
    let beta = resolve_beta(points, beta)?;
    best_of_restarts(config, |seed| {
        let init = random_memberships(points.nrows(), config.clusters, seed);
        fcm_exponential_run_from(points, config, beta, &init, seed)
    })
}

/// One run from a given initial membership matrix.
///
/// After the first iteration the centroid step is the majorize-minimize update
/// with weights `u^m · exp(−β‖x − v_old‖²)`, which never increases the objective.
/// `phase_start_trace[k]` is the objective after the centroid step.
pub fn fcm_exponential_run_from(
    points: &DMatrix<f64>,
    config: &ClusterConfig,
    beta: f64,
    init: &DMatrix<f64>,
    seed: u64,
) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 2)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("β = {beta} must be positive")));
    }
    let m = config.fuzziness;
    let all: Vec<usize> = (0..points.nrows()).collect();
    let mut u = init.clone();
    let mut centroids = centroid_update(points, &u, m, config.clusters)?;
    let mut trace = Vec::new();
    let mut phase = Vec::new();
    let mut converged = false;
    for iter in 0..config.max_iter {
        if iter > 0 {
            let d2 = squared_distances(points, &centroids);
            // shifting by the column minimum rescales each column and avoids underflow
            let floor: Vec<f64> = d2.column_iter().map(|col| col.min()).collect();
            let weights = DMatrix::from_fn(u.nrows(), config.clusters, |i, c| {
                u[(i, c)].powf(m) * (-beta * (d2[(i, c)] - floor[c])).exp()
            });
            centroids = weighted_centroids(points, &weights, &all)?;
        }
        let dis = exp_dissimilarities(points, &centroids, beta);
        phase.push(weighted_objective(&u, &dis, m, &all));
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
        variant: Variant::Exponential { beta: Beta::Fixed(beta) },
        memberships: rows_of(&u).into_iter().map(Some).collect(),
        centroids: rows_of(&centroids),
        iterations: trace.len(),
        objective_trace: trace,
        phase_start_trace: phase,
        trimmed_ids: Vec::new(),
        converged,
        beta: Some(beta),
        noise_distance: None,
        config: config.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::fcm_run;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn max_of(row: &[f64]) -> f64 {
        row.iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn beta_examples() {
        assert!((select_beta(&col(&[0.0, 2f64.sqrt()])).unwrap() - 1.0).abs() < 1e-12);
        assert!((select_beta(&col(&[0.0, 1.0, 2.0])).unwrap() - 1.5).abs() < 1e-12);
        let pts = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.5, 3.0, 2.0]);
        let b = select_beta(&pts).unwrap();
        let scaled = select_beta(&(&pts * 3.0)).unwrap();
        assert!((scaled - b / 9.0).abs() < 1e-12 * b);
        assert!(matches!(select_beta(&col(&[2.0, 2.0, 2.0])), Err(Error::Degenerate(_))));
    }

    #[test]
    fn exp_membership_examples() {
        let u = exp_membership_update(&col(&[0.25]), &col(&[0.0, 1.0]), 2.0, 1.0);
        let a = 1.0 - (-0.0625f64).exp();
        let b = 1.0 - (-0.5625f64).exp();
        assert!((u[(0, 0)] - 1.0 / (1.0 + a / b)).abs() < 1e-12);
        assert!((u[(0, 0)] - 0.87654).abs() < 1e-4);
        let u = exp_membership_update(&col(&[1.0]), &col(&[0.0, 1.0]), 2.0, 1.0);
        assert_eq!((u[(0, 0)], u[(0, 1)]), (0.0, 1.0));
        let u = exp_membership_update(&col(&[0.5]), &col(&[0.0, 1.0]), 2.0, 3.0);
        assert!((u[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_beta_matches_standard() {
        let pts = col(&[0.0, 0.3, 0.5, 4.0, 4.4, 5.0, 2.2]);
        let cfg = ClusterConfig { tol: 1e-10, ..ClusterConfig::new(2, 2.0) };
        let plain = fcm_run(&pts, &cfg).unwrap();
        let exp = fcm_exponential_run(&pts, &cfg, Beta::Fixed(1e-8)).unwrap();
        let same = plain.crisp(0) == exp.crisp(0);
        for i in 0..pts.nrows() {
            let a = plain.memberships[i].as_ref().unwrap();
            let b = exp.memberships[i].as_ref().unwrap();
            let (b0, b1) = if same { (b[0], b[1]) } else { (b[1], b[0]) };
            assert!((a[0] - b0).abs() < 1e-3 && (a[1] - b1).abs() < 1e-3);
        }
    }

    #[test]
    fn outlier_is_left_ambiguous() {
        let mut v: Vec<f64> = (0..6).map(|i| i as f64 * 0.02).collect();
        v.extend((0..6).map(|i| 1.0 + i as f64 * 0.02));
        v.push(100.0);
        let pts = col(&v);
        let p = fcm_exponential_run(&pts, &ClusterConfig::new(2, 2.0), Beta::Fixed(2.0)).unwrap();
        for i in 0..12 {
            assert!(max_of(p.memberships[i].as_ref().unwrap()) > 0.9);
        }
        assert!(max_of(p.memberships[12].as_ref().unwrap()) < 0.7);
        for k in 1..p.objective_trace.len() {
            assert!(p.objective_trace[k] <= p.objective_trace[k - 1] * (1.0 + 1e-10));
        }
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let pts = col(&[0.0, 1.0, 2.0]);
        assert!(matches!(fcm_exponential_run(&pts, &ClusterConfig::new(2, 2.0), Beta::Fixed(0.0)), Err(Error::Config(_))));
    }
}
