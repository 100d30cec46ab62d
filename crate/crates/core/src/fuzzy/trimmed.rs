//! Least-trimmed fuzzy C-means.

use nalgebra::DMatrix;

use super::{
    best_of_restarts, centroid_update, centroid_update_on, max_abs_diff, memberships_from_dissimilarities,
    random_memberships, squared_distances, weighted_objective, ClusterConfig, FuzzyPartition, Variant, DISTANCE_FLOOR,
};
use crate::error::{Error, Result};

/// `h = [Σ_c (d_c²)^{1/(1−m)}]^{1−m}` for one point's squared distances; 0 if any is 0.
pub fn trimmed_score(sq_distances: &[f64], m: f64) -> f64 {
    if sq_distances.iter().any(|&d| d == 0.0) {
        return 0.0;
    }
    let dmin = sq_distances.iter().fold(f64::INFINITY, |a, &d| a.min(d)).max(DISTANCE_FLOOR);
    let e = 1.0 / (m - 1.0);
    let s: f64 = sq_distances.iter().map(|&d| (dmin / d.max(DISTANCE_FLOOR)).powf(e)).sum();
    dmin * s.powf(1.0 - m)
}

/// Number of points kept for trimming ratio α.
pub fn kept_count(n: usize, alpha: f64) -> usize {
    (n as f64 * (1.0 - alpha) + 1e-9).floor() as usize
}

fn check_alpha(n: usize, config: &ClusterConfig, alpha: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!("trimming ratio α = {alpha} must lie in [0, 1)")));
    }
    let h = kept_count(n, alpha);
    if h < config.clusters {
        return Err(Error::Config(format!("α = {alpha} keeps {h} of {n} points, fewer than {} clusters", config.clusters)));
    }
    Ok(h)
}

/// Best-of-restarts trimmed fuzzy C-means.
pub fn fcm_trimmed_run(points: &DMatrix<f64>, config: &ClusterConfig, alpha: f64) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 2)?;
    check_alpha(points.nrows(), config, alpha)?;
    best_of_restarts(config, |seed| {
        let init = random_memberships(points.nrows(), config.clusters, seed);
        fcm_trimmed_run_from(points, config, alpha, &init, seed)
    })
}

/// One run from a given initial membership matrix.
///
/// Each iteration keeps the H smallest scores under the current centroids, updates
/// memberships on the kept points, then recomputes centroids from them.
/// `phase_start_trace[k]` is the sum of kept scores (the objective minimized over
/// memberships for the incoming centroids), so `trace[k] ≤ phase_start[k]` and
/// `phase_start[k + 1] ≤ trace[k]`.
pub fn fcm_trimmed_run_from(
    points: &DMatrix<f64>,
    config: &ClusterConfig,
    alpha: f64,
    init: &DMatrix<f64>,
    seed: u64,
) -> Result<FuzzyPartition> {
    config.validate(points.nrows(), 2)?;
    let n = points.nrows();
    let h = check_alpha(n, config, alpha)?;
    let m = config.fuzziness;
    let mut u = init.clone();
    let mut centroids = centroid_update(points, &u, m, config.clusters)?;
    let mut kept: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut phase = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iter {
        let d2 = squared_distances(points, &centroids);
        let scores: Vec<f64> = (0..n).map(|i| trimmed_score(&d2.row(i).iter().copied().collect::<Vec<_>>(), m)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let mut next_kept = order[..h].to_vec();
        next_kept.sort_unstable();
        phase.push(next_kept.iter().map(|&i| scores[i]).sum());

        let full = memberships_from_dissimilarities(&d2, m);
        for &i in &next_kept {
            u.set_row(i, &full.row(i));
        }
        let next = centroid_update_on(points, &u, m, config.clusters, &next_kept)?;
        trace.push(weighted_objective(&u, &squared_distances(points, &next), m, &next_kept));
        let change = max_abs_diff(&next, &centroids);
        let same_set = next_kept == kept;
        centroids = next;
        kept = next_kept;
        if same_set && change < config.tol {
            converged = true;
            break;
        }
    }
    let mut memberships = vec![None; n];
    for &i in &kept {
        memberships[i] = Some(u.row(i).iter().copied().collect());
    }
    let trimmed_ids = (0..n).filter(|i| memberships[*i].is_none()).collect();
    Ok(FuzzyPartition {
        variant: Variant::Trimmed { alpha },
        memberships,
        centroids: super::rows_of(&centroids),
        iterations: trace.len(),
        objective_trace: trace,
        phase_start_trace: phase,
        trimmed_ids,
        converged,
        beta: None,
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

    #[test]
    fn score_examples() {
        assert!((trimmed_score(&[1.0, 1.0], 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(trimmed_score(&[0.0, 3.0], 2.0), 0.0);
        for d in [[0.3, 2.0, 5.0], [1e-9, 1.0, 1e9], [4.0, 4.0, 4.0]] {
            for m in [1.2, 2.0, 3.5] {
                let h = trimmed_score(&d, m);
                let direct = d.iter().map(|x: &f64| x.powf(1.0 / (1.0 - m))).sum::<f64>().powf(1.0 - m);
                assert!((h - direct).abs() <= 1e-12 * direct);
                assert!(h <= d.iter().cloned().fold(f64::INFINITY, f64::min));
            }
        }
    }

    #[test]
    fn kept_counts() {
        assert_eq!(kept_count(12, 0.5), 6);
        assert_eq!(kept_count(12, 2.0 / 12.0), 10);
        assert_eq!(kept_count(13, 1.0 / 13.0), 12);
        assert_eq!(kept_count(10, 0.0), 10);
    }

    #[test]
    fn zero_alpha_matches_standard() {
        let pts = DMatrix::from_fn(12, 2, |i, j| ((i * 5 + j * 7) % 9) as f64 * 0.3 + if i < 6 { 0.0 } else { 4.0 });
        let cfg = ClusterConfig { tol: 1e-12, ..ClusterConfig::new(2, 2.0) };
        let a = fcm_run(&pts, &cfg).unwrap();
        let b = fcm_trimmed_run(&pts, &cfg, 0.0).unwrap();
        assert!(b.trimmed_ids.is_empty());
        for i in 0..12 {
            let (x, y) = (a.memberships[i].as_ref().unwrap(), b.memberships[i].as_ref().unwrap());
            for c in 0..2 {
                assert!((x[c] - y[c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn trims_extreme_outlier() {
        let mut v: Vec<f64> = (0..6).map(|i| i as f64 * 0.02).collect();
        v.extend((0..6).map(|i| 1.0 + i as f64 * 0.02));
        v.push(100.0);
        let pts = col(&v);
        let mut hits = 0;
        for seed in 0..100 {
            let cfg = ClusterConfig { seed, restarts: 1, ..ClusterConfig::new(2, 2.0) };
            let p = fcm_trimmed_run(&pts, &cfg, 1.0 / 13.0).unwrap();
            if p.trimmed_ids == vec![12] {
                hits += 1;
            }
            for k in 0..p.objective_trace.len() {
                assert!(p.objective_trace[k] <= p.phase_start_trace[k] * (1.0 + 1e-10) + 1e-15);
                if k > 0 {
                    assert!(p.phase_start_trace[k] <= p.objective_trace[k - 1] * (1.0 + 1e-10) + 1e-15);
                }
            }
        }
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn half_trimmed() {
        let pts = col(&(0..12).map(|i| i as f64).collect::<Vec<_>>());
        let p = fcm_trimmed_run(&pts, &ClusterConfig::new(2, 2.0), 0.5).unwrap();
        assert_eq!(p.memberships.iter().filter(|r| r.is_some()).count(), 6);
        assert_eq!(p.trimmed_ids.len(), 6);
        assert!(matches!(fcm_trimmed_run(&pts, &ClusterConfig::new(2, 2.0), 0.9), Err(Error::Config(_))));
    }
}
