//! Plain fuzzy C-means.

use nalgebra::DMatrix;

use super::{
    best_of_restarts, centroid_update, max_abs_diff, membership_update, random_memberships, rows_of, squared_distances,
    weighted_objective, ClusterConfig, FuzzyPartition, Variant,
};
use crate::error::Result;

/// Best-of-restarts fuzzy C-means.
pub fn fcm_run(points: &DMatrix<f64>, config: &ClusterConfig) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 2)?;
    best_of_restarts(config, |seed| {
        let init = random_memberships(points.nrows(), config.clusters, seed);
        fcm_run_from(points, config, &init, seed)
    })
}

/// One run from a given initial membership matrix.
///
/// Each iteration updates centroids then memberships. `phase_start_trace[k]` is the
/// objective after the centroid step, so `trace[k] ≤ phase_start[k] ≤ trace[k − 1]`.
pub fn fcm_run_from(points: &DMatrix<f64>, config: &ClusterConfig, init: &DMatrix<f64>, seed: u64) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 2)?;
    let m = config.fuzziness;
    let all: Vec<usize> = (0..points.nrows()).collect();
    let mut u = init.clone();
    let mut centroids = centroid_update(points, &u, m, config.clusters)?;
    let mut trace = Vec::new();
    let mut phase = Vec::new();
    let mut converged = false;
    for iter in 0..config.max_iter {
        if iter > 0 {
            centroids = centroid_update(points, &u, m, config.clusters)?;
        }
        let d2 = squared_distances(points, &centroids);
        phase.push(weighted_objective(&u, &d2, m, &all));
        let next = membership_update(points, &centroids, m);
        trace.push(weighted_objective(&next, &d2, m, &all));
        let change = max_abs_diff(&next, &u);
        u = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(FuzzyPartition {
        variant: Variant::Standard,
        memberships: rows_of(&u).into_iter().map(Some).collect(),
        centroids: rows_of(&centroids),
        iterations: trace.len(),
        objective_trace: trace,
        phase_start_trace: phase,
        trimmed_ids: Vec::new(),
        converged,
        beta: None,
        noise_distance: None,
        config: config.clone(),
        seed,
    })
}
