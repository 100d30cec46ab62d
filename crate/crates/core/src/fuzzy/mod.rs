//! Fuzzy C-means engines on score (or raw feature) matrices.
//!
//! All engines take an n×q matrix of points and share the membership and
//! centroid updates defined here:
//! - [`standard`]: plain fuzzy C-means;
//! - [`exponential`]: exponential dissimilarity `1 − exp(−β‖x − v‖²)`;
//! - [`noise`]: an extra noise cluster at constant distance δ;
//! - [`trimmed`]: least-trimmed fuzzy C-means keeping `⌊n(1 − α)⌋` points.

pub mod exponential;
pub mod noise;
pub mod standard;
pub mod trimmed;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exponential::{exp_membership_update, fcm_exponential_run, select_beta};
pub use noise::{compute_noise_distance, delta_scan, fcm_noise_run, noise_membership_update, DeltaScanRow};
pub use standard::fcm_run;
pub use trimmed::{fcm_trimmed_run, trimmed_score};

/// Squared distances are floored here before forming ratios.
pub(crate) const DISTANCE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Number of real clusters.
    pub clusters: usize,
    /// Fuzziness exponent m > 1.
    pub fuzziness: f64,
    pub max_iter: usize,
    /// Convergence tolerance on the entrywise max change of U.
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl ClusterConfig {
    pub fn new(clusters: usize, fuzziness: f64) -> Self {
        Self { clusters, fuzziness, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn validate(&self, n: usize, min_clusters: usize) -> Result<()> {
        if self.clusters < min_clusters {
            return Err(Error::Config(format!("need at least {min_clusters} clusters, got {}", self.clusters)));
        }
        if !(self.fuzziness > 1.0) || !self.fuzziness.is_finite() {
            return Err(Error::Config(format!("fuzziness m = {} must exceed 1", self.fuzziness)));
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::Config("max_iter and restarts must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tol)));
        }
        if n < self.clusters {
            return Err(Error::Config(format!("{n} points cannot fill {} clusters", self.clusters)));
        }
        Ok(())
    }
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { clusters: 2, fuzziness: 2.0, max_iter: 1000, tol: 1e-6, seed: 0, restarts: 5 }
    }
}

/// How the exponential variant obtains β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Beta {
    /// Inverse mean squared distance to the medoid.
    Auto,
    Fixed(f64),
}

/// How the noise variant obtains δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistance {
    /// δ² = λ · mean squared point-to-centroid distance, recomputed every iteration.
    Scale(f64),
    /// A constant δ.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Exponential { beta: Beta },
    Noise { distance: NoiseDistance },
    Trimmed { alpha: f64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Standard => "fcm",
            Variant::Exponential { .. } => "exp",
            Variant::Noise { .. } => "noise",
            Variant::Trimmed { .. } => "trimmed",
        }
    }
}

/// Result of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    pub variant: Variant,
    /// One row per point; the noise variant appends the noise membership as the
    /// last column. Trimmed points have no memberships (`None`).
    pub memberships: Vec<Option<Vec<f64>>>,
    /// C×q, one row per real cluster.
    pub centroids: Vec<Vec<f64>>,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
    /// Objective at the start of each iteration's phase, under that iteration's
    /// fixed δ / kept set (see each engine for the exact point of evaluation).
    pub phase_start_trace: Vec<f64>,
    pub trimmed_ids: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// β actually used (exponential variant).
    pub beta: Option<f64>,
    /// Final δ (noise variant).
    pub noise_distance: Option<f64>,
    pub config: ClusterConfig,
    /// Seed of the winning restart.
    pub seed: u64,
}

impl FuzzyPartition {
    pub fn n_points(&self) -> usize {
        self.memberships.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn is_trimmed(&self, i: usize) -> bool {
        self.memberships[i].is_none()
    }

    /// Membership of point `i` in the noise cluster, when present.
    pub fn noise_membership(&self, i: usize) -> Option<f64> {
        match self.variant {
            Variant::Noise { .. } => self.memberships[i].as_ref().and_then(|r| r.last().copied()),
            _ => None,
        }
    }

    /// Index of the largest membership (ties → smallest index), `None` for trimmed points.
    pub fn crisp(&self, i: usize) -> Option<usize> {
        self.memberships[i].as_ref().map(|r| argmax(r))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// n×C squared Euclidean distances.
pub fn squared_distances(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(points.nrows(), centroids.nrows(), |i, c| (points.row(i) - centroids.row(c)).norm_squared())
}

/// Memberships from an n×K matrix of dissimilarities:
/// `u_ic = [Σ_c' (D_ic / D_ic')^{1/(m−1)}]⁻¹`. A row with an exact zero becomes the
/// indicator of its first zero column.
pub fn memberships_from_dissimilarities(dis: &DMatrix<f64>, m: f64) -> DMatrix<f64> {
    let exponent = 1.0 / (m - 1.0);
    let mut u = DMatrix::zeros(dis.nrows(), dis.ncols());
    for i in 0..dis.nrows() {
        let row = dis.row(i);
        if let Some(c) = row.iter().position(|&d| d == 0.0) {
            u[(i, c)] = 1.0;
            continue;
        }
        let dmin = row.iter().fold(f64::INFINITY, |a, &d| a.min(d)).max(DISTANCE_FLOOR);
        let ratios: Vec<f64> = row.iter().map(|&d| (dmin / d.max(DISTANCE_FLOOR)).powf(exponent)).collect();
        let total: f64 = ratios.iter().sum();
        for (c, r) in ratios.iter().enumerate() {
            u[(i, c)] = r / total;
        }
    }
    u
}

/// Standard membership update from centroids.
pub fn membership_update(points: &DMatrix<f64>, centroids: &DMatrix<f64>, m: f64) -> DMatrix<f64> {
    memberships_from_dissimilarities(&squared_distances(points, centroids), m)
}

/// `v_c = Σ_i w_ic x_i / Σ_i w_ic` over the rows listed in `rows`.
pub(crate) fn weighted_centroids(points: &DMatrix<f64>, weights: &DMatrix<f64>, rows: &[usize]) -> Result<DMatrix<f64>> {
    let (q, k) = (points.ncols(), weights.ncols());
    let mut out = DMatrix::zeros(k, q);
    for c in 0..k {
        let total: f64 = rows.iter().map(|&i| weights[(i, c)]).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::EmptyCluster(c));
        }
        for &i in rows {
            let w = weights[(i, c)] / total;
            if w != 0.0 {
                for j in 0..q {
                    out[(c, j)] += w * points[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// Centroids `v_c = Σ u_ic^m x_i / Σ u_ic^m` from the first C columns of `u`.
pub fn centroid_update(points: &DMatrix<f64>, u: &DMatrix<f64>, m: f64, clusters: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<usize> = (0..points.nrows()).collect();
    centroid_update_on(points, u, m, clusters, &rows)
}

pub(crate) fn centroid_update_on(
    points: &DMatrix<f64>,
    u: &DMatrix<f64>,
    m: f64,
    clusters: usize,
    rows: &[usize],
) -> Result<DMatrix<f64>> {
    let weights = DMatrix::from_fn(u.nrows(), clusters, |i, c| u[(i, c)].powf(m));
    weighted_centroids(points, &weights, rows)
}

/// `Σ_i Σ_c u_ic^m D_ic` over the listed rows.
pub(crate) fn weighted_objective(u: &DMatrix<f64>, dis: &DMatrix<f64>, m: f64, rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&i| (0..dis.ncols()).map(|c| u[(i, c)].powf(m) * dis[(i, c)]).sum::<f64>())
        .sum()
}

/// Row-wise flat-Dirichlet initial memberships.
pub fn random_memberships(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::zeros(n, k);
    for i in 0..n {
        let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        for c in 0..k {
            u[(i, c)] = draws[c] / total;
        }
    }
    u
}

pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs `single` once per restart seed (`seed + r`) and keeps the lowest final
/// objective (ties → earliest restart). Empty-cluster failures are skipped; if
/// every restart fails the run fails.
pub(crate) fn best_of_restarts<F>(config: &ClusterConfig, single: F) -> Result<FuzzyPartition>
where
    F: Fn(u64) -> Result<FuzzyPartition> + Sync,
{
    let results: Vec<Result<FuzzyPartition>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| single(config.seed.wrapping_add(r as u64)))
        .collect();
    let mut best: Option<FuzzyPartition> = None;
    let mut last_err = None;
    for res in results {
        match res {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| p.objective() < b.objective()) {
                    best = Some(p);
                }
            }
            Err(e @ Error::EmptyCluster(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| {
        Error::ClusteringFailed(format!(
            "all {} restarts failed: {}",
            config.restarts,
            last_err.map_or_else(|| "no result".to_string(), |e| e.to_string())
        ))
    })
}

/// Runs the requested variant with its own parameter.
pub fn cluster(points: &DMatrix<f64>, config: &ClusterConfig, variant: &Variant) -> Result<FuzzyPartition> {
    match *variant {
        Variant::Standard => fcm_run(points, config),
        Variant::Exponential { beta } => fcm_exponential_run(points, config, beta),
        Variant::Noise { distance } => fcm_noise_run(points, config, distance),
        Variant::Trimmed { alpha } => fcm_trimmed_run(points, config, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn membership_examples() {
        let u = membership_update(&col(&[0.25]), &col(&[0.0, 1.0]), 2.0);
        assert!((u[(0, 0)] - 0.9).abs() < 1e-12);
        assert!((u[(0, 1)] - 0.1).abs() < 1e-12);

        let u = membership_update(&col(&[0.5]), &col(&[0.0, 1.0]), 2.5);
        assert!((u[(0, 0)] - 0.5).abs() < 1e-15);

        let centroids = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -0.5, 0.8660254037844386, -0.5, -0.8660254037844386]);
        let u = membership_update(&DMatrix::zeros(1, 2), &centroids, 1.8);
        for c in 0..3 {
            assert!((u[(0, c)] - 1.0 / 3.0).abs() < 1e-12);
        }

        let u = membership_update(&col(&[1.0]), &col(&[0.0, 1.0, 1.0]), 2.0);
        assert_eq!(u.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn tiny_distances_do_not_overflow() {
        let u = membership_update(&col(&[1e-170]), &col(&[0.0, 1.0]), 1.1);
        assert!((u.row(0).sum() - 1.0).abs() < 1e-15);
        assert!(u[(0, 0)] > 0.999_999);
    }

    #[test]
    fn centroid_examples() {
        let pts = col(&[0.0, 1.0, 5.0, 7.0]);
        let crisp = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let v = centroid_update(&pts, &crisp, 2.0, 2).unwrap();
        assert_eq!((v[(0, 0)], v[(1, 0)]), (0.5, 6.0));

        let uniform = DMatrix::from_element(4, 2, 0.5);
        let v = centroid_update(&pts, &uniform, 1.7, 2).unwrap();
        assert!((v[(0, 0)] - 3.25).abs() < 1e-12 && (v[(1, 0)] - 3.25).abs() < 1e-12);

        let u = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let v = centroid_update(&col(&[0.0, 1.0]), &u, 2.0, 2).unwrap();
        assert!((v[(0, 0)] - 1.0 / 82.0).abs() < 1e-12);

        let empty = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(centroid_update(&col(&[0.0, 1.0]), &empty, 2.0, 2), Err(Error::EmptyCluster(1))));
    }

    #[test]
    fn dirichlet_rows_are_stochastic_and_seeded() {
        let a = random_memberships(20, 3, 9);
        let b = random_memberships(20, 3, 9);
        assert_eq!(a, b);
        for r in a.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&v| v > 0.0));
        }
        assert_ne!(a, random_memberships(20, 3, 10));
    }

    #[test]
    fn config_validation() {
        let pts = col(&[0.0, 1.0, 2.0]);
        let mut cfg = ClusterConfig::new(2, 1.0);
        assert!(matches!(fcm_run(&pts, &cfg), Err(Error::Config(_))));
        cfg.fuzziness = 2.0;
        cfg.clusters = 4;
        assert!(matches!(fcm_run(&pts, &cfg), Err(Error::Config(_))));
        cfg.clusters = 1;
        assert!(matches!(fcm_run(&pts, &cfg), Err(Error::Config(_))));
    }
}
