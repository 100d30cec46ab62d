//! Trial judging, Monte Carlo benchmarks and classical scaling.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{cluster, fcm_run, Beta, ClusterConfig, FuzzyPartition, NoiseDistance, Variant};
use crate::qcd::{qcd_features, QcdConfig};
use crate::simulation::{build_scenario, InnovationLaw, MtcReading, Scenario, ScenarioOptions, SeriesLabel};
use crate::transform::{correlation_features, feature_matrix, pca_scores, DEFAULT_MAX_LAG, DEFAULT_VARIANCE_TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRules {
    /// A regular series must exceed this membership in its matched cluster; a
    /// spread outlier must stay below it in every cluster.
    pub regular_cutoff: f64,
    /// A noise-handled outlier must exceed this noise membership.
    pub noise_cutoff: f64,
}

impl Default for AssignmentRules {
    fn default() -> Self {
        Self { regular_cutoff: 0.7, noise_cutoff: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    /// Per-series pass/fail, in dataset order.
    pub verdicts: Vec<bool>,
    /// `matching[k]` is the cluster index assigned to label `k + 1`.
    pub matching: Vec<usize>,
}

fn permutations(k: usize, n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, k: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for c in 0..n {
            if !prefix.contains(&c) {
                prefix.push(c);
                extend(prefix, k, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), k, n, &mut out);
    out
}

fn outlier_handled(partition: &FuzzyPartition, i: usize, rules: &AssignmentRules) -> bool {
    let real = partition.n_clusters();
    match (&partition.variant, &partition.memberships[i]) {
        (Variant::Trimmed { .. }, row) => row.is_none(),
        (Variant::Noise { .. }, Some(row)) => row[real] > rules.noise_cutoff,
        (_, Some(row)) => row[..real].iter().all(|&u| u < rules.regular_cutoff),
        (_, None) => false,
    }
}

/// Applies the assignment rules. Regular labels are matched to clusters by the
/// bijection passing the most regular series, then by total matched membership.
pub fn judge_trial(partition: &FuzzyPartition, truth: &[SeriesLabel], rules: &AssignmentRules) -> Result<TrialResult> {
    if truth.len() != partition.n_points() {
        return Err(Error::Shape(format!("{} labels for {} partitioned series", truth.len(), partition.n_points())));
    }
    let n_labels = truth.iter().filter_map(|l| if let SeriesLabel::Cluster(c) = l { Some(*c) } else { None }).max().unwrap_or(0);
    if n_labels > partition.n_clusters() {
        return Err(Error::Shape(format!("{n_labels} true groups but only {} clusters", partition.n_clusters())));
    }
    let regular_pass = |perm: &[usize], i: usize, c: usize| -> bool {
        partition.memberships[i].as_ref().is_some_and(|row| row[perm[c - 1]] > rules.regular_cutoff)
    };
    // most passing series first, then the largest total matched membership
    let mut best: Option<((usize, f64), Vec<usize>)> = None;
    for perm in permutations(n_labels, partition.n_clusters()) {
        let mut score = (0usize, 0.0f64);
        for (i, l) in truth.iter().enumerate() {
            if let (SeriesLabel::Cluster(c), Some(row)) = (l, partition.memberships[i].as_ref()) {
                score.0 += regular_pass(&perm, i, *c) as usize;
                score.1 += row[perm[c - 1]];
            }
        }
        if best.as_ref().is_none_or(|(b, _)| score.0 > b.0 || (score.0 == b.0 && score.1 > b.1)) {
            best = Some((score, perm));
        }
    }
    let matching = best.map(|(_, p)| p).unwrap_or_default();
    let verdicts: Vec<bool> = truth
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            SeriesLabel::Cluster(c) => regular_pass(&matching, i, *c),
            SeriesLabel::Outlier => outlier_handled(partition, i, rules),
        })
        .collect();
    Ok(TrialResult { success: verdicts.iter().all(|&v| v), verdicts, matching })
}

pub fn classification_rate(results: &[TrialResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Config("no trials to rate".into()));
    }
    Ok(results.iter().filter(|r| r.success).count() as f64 / results.len() as f64)
}

/// Trapezoid rule over `(x, y)` pairs sorted by x.
pub fn trapezoid_auc(xs: &[f64], ys: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).fold(0.0, |acc, w| acc + 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad grid '{spec}' (use start:stop:step or a,b,c)"));
    let grid = if spec.contains(':') {
        let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain fuzzy C-means (grid ignored; judged with the spread outlier rule).
    Fcm,
    /// Grid values are β; β = 0 is the plain-FCM limit.
    Exp,
    /// Grid values are the λ scale multipliers of δ.
    Noise,
    /// Grid values are fixed noise distances δ.
    NoiseDelta,
    /// Grid ignored; α = true outlier count / n.
    Trimmed,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcm" => Ok(Method::Fcm),
            "exp" => Ok(Method::Exp),
            "noise" => Ok(Method::Noise),
            "noise-delta" => Ok(Method::NoiseDelta),
            "trimmed" => Ok(Method::Trimmed),
            _ => Err(Error::Config(format!("unknown variant '{s}' (fcm, exp, noise, noise-delta, trimmed)"))),
        }
    }
}

impl Method {
    pub fn uses_grid(&self) -> bool {
        matches!(self, Method::Exp | Method::Noise | Method::NoiseDelta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// PCA scores of the QCD feature vectors.
    Qcd,
    /// PCA scores of the lag-correlation features.
    Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenario: Scenario,
    pub len: usize,
    pub fuzziness: f64,
    pub method: Method,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub features: FeatureKind,
    pub qcd: QcdConfig,
    pub pca_variance: f64,
    pub innovation: InnovationLaw,
    pub mtc_reading: MtcReading,
    pub clusters: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub rules: AssignmentRules,
}

impl BenchmarkConfig {
    pub fn new(scenario: Scenario, len: usize, fuzziness: f64, method: Method, grid: Vec<f64>, trials: usize, seed: u64) -> Self {
        let base = ClusterConfig::default();
        Self {
            scenario,
            len,
            fuzziness,
            method,
            grid,
            trials,
            seed,
            features: FeatureKind::Qcd,
            qcd: QcdConfig::default(),
            pca_variance: DEFAULT_VARIANCE_TARGET,
            innovation: InnovationLaw::Gaussian,
            mtc_reading: MtcReading::Printed,
            clusters: 2,
            restarts: base.restarts,
            max_iter: base.max_iter,
            tol: base.tol,
            rules: AssignmentRules::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        if self.grid.iter().any(|&g| g < 0.0 || !g.is_finite()) {
            return Err(Error::Config("grid values must be finite and nonnegative".into()));
        }
        self.innovation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Success per grid value.
    pub success: Vec<bool>,
    /// Failure message per grid value (simulation, features or clustering).
    pub failures: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    /// Grid actually evaluated (the α used, for the trimmed method).
    pub values: Vec<f64>,
    pub rates: Vec<f64>,
    pub max_rate: f64,
    pub auc: f64,
    /// AUC divided by the best AUC among methods sharing (T, m); set by [`normalize_auc`].
    pub normalized_auc: Option<f64>,
    pub failed_runs: usize,
    pub trials: Vec<TrialRecord>,
    pub elapsed_secs: f64,
    pub threads: usize,
}

impl BenchmarkReport {
    /// Tidy `scenario,length,m,variant,value,rate` lines (with header).
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("scenario,length,m,variant,value,rate\n");
        for (v, r) in self.values.iter().zip(&self.rates) {
            let method = serde_json::to_value(self.config.method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{},{}\n", self.config.scenario, self.config.len, self.config.fuzziness, method, v, r));
        }
        out
    }
}

/// Derives the seed of trial `index` from the base seed (SplitMix64 finalizer).
pub fn trial_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// PCA scores for one simulated dataset.
pub fn trial_scores(config: &BenchmarkConfig, seed: u64) -> Result<(DMatrix<f64>, Vec<SeriesLabel>)> {
    let options = ScenarioOptions { innovation: config.innovation, mtc_reading: config.mtc_reading };
    let data = build_scenario(config.scenario, config.len, seed, &options)?;
    let rows: Vec<Vec<f64>> = match config.features {
        FeatureKind::Qcd => qcd_features(&data.dataset, &config.qcd)?.0.iter().map(|f| f.to_flat()).collect(),
        FeatureKind::Correlation => {
            data.dataset.series().iter().map(|s| correlation_features(s, DEFAULT_MAX_LAG)).collect::<Result<_>>()?
        }
    };
    let (_, scores) = pca_scores(&feature_matrix(&rows)?, config.pca_variance)?;
    Ok((scores, data.labels))
}

fn run_value(scores: &DMatrix<f64>, config: &BenchmarkConfig, cluster_cfg: &ClusterConfig, value: f64, n_outliers: usize) -> Result<FuzzyPartition> {
    match config.method {
        Method::Fcm => fcm_run(scores, cluster_cfg),
        Method::Exp if value == 0.0 => {
            let mut p = fcm_run(scores, cluster_cfg)?;
            p.variant = Variant::Exponential { beta: Beta::Fixed(0.0) };
            p.beta = Some(0.0);
            Ok(p)
        }
        Method::Exp => cluster(scores, cluster_cfg, &Variant::Exponential { beta: Beta::Fixed(value) }),
        Method::Noise => cluster(scores, cluster_cfg, &Variant::Noise { distance: NoiseDistance::Scale(value) }),
        Method::NoiseDelta => cluster(scores, cluster_cfg, &Variant::Noise { distance: NoiseDistance::Fixed(value) }),
        Method::Trimmed => {
            let alpha = n_outliers as f64 / scores.nrows() as f64;
            cluster(scores, cluster_cfg, &Variant::Trimmed { alpha })
        }
    }
}

fn run_trial(config: &BenchmarkConfig, values: &[f64], trial: usize) -> TrialRecord {
    let seed = trial_seed(config.seed, trial);
    let mut record = TrialRecord { trial, seed, success: vec![false; values.len()], failures: vec![None; values.len()] };
    let (scores, labels) = match trial_scores(config, seed) {
        Ok(v) => v,
        Err(e) => {
            record.failures = vec![Some(e.to_string()); values.len()];
            return record;
        }
    };
    let n_outliers = labels.iter().filter(|l| **l == SeriesLabel::Outlier).count();
    let cluster_cfg = ClusterConfig {
        clusters: config.clusters,
        fuzziness: config.fuzziness,
        max_iter: config.max_iter,
        tol: config.tol,
        seed,
        restarts: config.restarts,
    };
    for (g, &value) in values.iter().enumerate() {
        match run_value(&scores, config, &cluster_cfg, value, n_outliers).and_then(|p| judge_trial(&p, &labels, &config.rules)) {
            Ok(result) => record.success[g] = result.success,
            Err(e) => record.failures[g] = Some(e.to_string()),
        }
    }
    record
}

/// Simulates `trials` datasets, computes features and PCA once per dataset, clusters
/// at every grid value and aggregates success rates.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let start = Instant::now();
    let values = match config.method {
        Method::Trimmed => {
            let n = config.scenario.series_count();
            vec![config.scenario.outlier_count() as f64 / n as f64]
        }
        Method::Fcm => vec![0.0],
        _ => config.grid.clone(),
    };
    let mut trials: Vec<TrialRecord> = (0..config.trials).into_par_iter().map(|t| run_trial(config, &values, t)).collect();
    trials.sort_by_key(|r| r.trial);
    let rates: Vec<f64> = (0..values.len())
        .map(|g| trials.iter().filter(|r| r.success[g]).count() as f64 / config.trials as f64)
        .collect();
    let failed_runs = trials.iter().map(|r| r.failures.iter().filter(|f| f.is_some()).count()).sum();
    Ok(BenchmarkReport {
        config: config.clone(),
        max_rate: rates.iter().copied().fold(0.0, f64::max),
        auc: trapezoid_auc(&values, &rates),
        normalized_auc: None,
        values,
        rates,
        failed_runs,
        trials,
        elapsed_secs: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    })
}

/// Sets `normalized_auc = auc / max auc` within each (T, m) block.
pub fn normalize_auc(reports: &mut [BenchmarkReport]) {
    let keys: Vec<(usize, u64)> = reports.iter().map(|r| (r.config.len, r.config.fuzziness.to_bits())).collect();
    for key in &keys {
        let best = reports.iter().zip(&keys).filter(|(_, k)| *k == key).map(|(r, _)| r.auc).fold(0.0, f64::max);
        for (r, k) in reports.iter_mut().zip(&keys) {
            if k == key {
                r.normalized_auc = Some(if best > 0.0 { r.auc / best } else { 0.0 });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    /// n×2 coordinates.
    pub coords: DMatrix<f64>,
    pub r_squared: f64,
    /// Eigenvalues of the double-centred matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub warning: Option<String>,
}

/// Classical (Torgerson) scaling into two dimensions.
pub fn classical_mds(dist: &DMatrix<f64>) -> Result<MdsResult> {
    let n = dist.nrows();
    if dist.ncols() != n || n < 2 {
        return Err(Error::Shape(format!("distance matrix must be square with n ≥ 2, got {}×{}", n, dist.ncols())));
    }
    for i in 0..n {
        if dist[(i, i)] != 0.0 {
            return Err(Error::Domain(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            if (dist[(i, j)] - dist[(j, i)]).abs() > 1e-9 || dist[(i, j)] < 0.0 || !dist[(i, j)].is_finite() {
                return Err(Error::Domain(format!("distance matrix not symmetric nonnegative at ({i}, {j})")));
            }
        }
    }
    let sq = dist.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let positive: f64 = eigenvalues.iter().filter(|&&l| l > 0.0).sum();
    let mut coords = DMatrix::zeros(n, 2);
    let mut kept = 0.0;
    let mut warning = None;
    for (d, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            warning = Some(format!("only {d} positive eigenvalue(s); remaining coordinates set to zero"));
            break;
        }
        kept += lambda;
        let v = eig.eigenvectors.column(k);
        let sign = if v.iter().fold(0.0f64, |a, &x| if x.abs() > a.abs() { x } else { a }) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[(i, d)] = sign * v[i] * lambda.sqrt();
        }
    }
    let r_squared = if positive > 0.0 { kept / positive } else { 0.0 };
    Ok(MdsResult { coords, r_squared, eigenvalues, warning })
}
