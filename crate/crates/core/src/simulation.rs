//! Bivariate process generators, outlier contamination and benchmark scenarios.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{write_csv, Dataset, Layout, MTSeries};

pub const DEFAULT_BURN_IN: usize = 500;

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

fn mat(m: &Mat2) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum InnovationLaw {
    /// Independent standard normal components.
    Gaussian,
    /// Multivariate t with identity scale: `Z / sqrt(W/ν)`, one `W ~ χ²(ν)` per draw.
    StudentT { nu: f64 },
    /// Independent raw `χ²(ν)` components (any ν > 0).
    ChiSquared { nu: f64 },
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::Gaussian => Ok(()),
            InnovationLaw::StudentT { nu } | InnovationLaw::ChiSquared { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            other => Err(Error::Config(format!("degrees of freedom must be positive in {other:?}"))),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        match *self {
            InnovationLaw::Gaussian => Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
            InnovationLaw::StudentT { nu } => {
                let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                let w = chi_squared(nu).sample(rng);
                z * (nu / w).sqrt()
            }
            InnovationLaw::ChiSquared { nu } => {
                let g = chi_squared(nu);
                Vector2::new(g.sample(rng), g.sample(rng))
            }
        }
    }
}

fn chi_squared(nu: f64) -> Gamma<f64> {
    Gamma::new(nu / 2.0, 2.0).expect("validated degrees of freedom")
}

impl FromStr for InnovationLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "gaussian" || s == "normal" {
            return Ok(InnovationLaw::Gaussian);
        }
        let parse_nu = |rest: &str| -> Result<f64> {
            rest.trim_start_matches(['(', ':']).trim_end_matches(')').parse().map_err(|_| Error::Config(format!("bad degrees of freedom in '{s}'")))
        };
        let law = if let Some(rest) = s.strip_prefix("chisq") {
            InnovationLaw::ChiSquared { nu: parse_nu(rest)? }
        } else if let Some(rest) = s.strip_prefix('t') {
            InnovationLaw::StudentT { nu: parse_nu(rest)? }
        } else {
            return Err(Error::Config(format!("unknown innovation law '{s}' (gaussian, t3, t:5, chisq3)")));
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Var { phi: Mat2 },
    Vma { theta: Mat2 },
    Varma { phi: Mat2, theta: Mat2 },
    /// `X_{t,1} = 0.3 − 10 exp(−X²_{t−1,1} − X²_{t−1,2}) X_{t−1,2} + ε_{t,1}` and symmetrically.
    Expar,
    /// `X_{t,1} = 0.6 X_{t−1,1} + 0.7 X_{t−1,1} ε_{t−1,2} + ε_{t,1} + ε_{t,1}` and symmetrically.
    Bilinear,
    /// `X_{t,1} = 0.7 |X_{t−1,1}| / (|X_{t−1,2}| + 1) + ε_{t,1}` and symmetrically.
    Nar,
    /// `Σ_t = CᵀC + Aᵀ X_{t−1} X_{t−1}ᵀ A + Gᵀ Σ_{t−1} G`, `X_t = Σ_t^{1/2} ε_t`.
    Bekk { c: Mat2, a: Mat2, g: Mat2 },
    WhiteNoise,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Var { .. } => "VAR",
            Family::Vma { .. } => "VMA",
            Family::Varma { .. } => "VARMA",
            Family::Expar => "EXPAR",
            Family::Bilinear => "BL",
            Family::Nar => "NAR",
            Family::Bekk { .. } => "BEKK",
            Family::WhiteNoise => "WN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub family: Family,
    pub innovation: InnovationLaw,
    pub burn_in: usize,
}

const PHI_BASE1: Mat2 = [[0.2, 0.2], [0.2, 0.2]];
const THETA_BASE1: Mat2 = [[-0.4, -0.4], [-0.2, -0.2]];
const PHI_OUTLIER: Mat2 = [[0.1, 0.1], [0.1, 0.1]];
const BEKK_C: Mat2 = [[0.1, 0.0], [0.1, 0.1]];

impl ProcessSpec {
    pub fn new(family: Family) -> Self {
        Self { family, innovation: InnovationLaw::Gaussian, burn_in: DEFAULT_BURN_IN }
    }

    pub fn with_innovation(mut self, law: InnovationLaw) -> Self {
        self.innovation = law;
        self
    }

    pub fn var1() -> Self {
        Self::new(Family::Var { phi: PHI_BASE1 })
    }

    pub fn vma1() -> Self {
        Self::new(Family::Vma { theta: THETA_BASE1 })
    }

    pub fn varma11() -> Self {
        Self::new(Family::Varma { phi: PHI_BASE1, theta: THETA_BASE1 })
    }

    pub fn var_outlier() -> Self {
        Self::new(Family::Var { phi: PHI_OUTLIER })
    }

    pub fn expar() -> Self {
        Self::new(Family::Expar)
    }

    pub fn bilinear() -> Self {
        Self::new(Family::Bilinear)
    }

    pub fn nar() -> Self {
        Self::new(Family::Nar)
    }

    pub fn bekk1() -> Self {
        Self::new(Family::Bekk { c: BEKK_C, a: [[0.2, 1.2], [0.4, 0.5]], g: [[0.2, -0.1], [-0.1, -0.1]] })
    }

    pub fn bekk2() -> Self {
        Self::new(Family::Bekk { c: BEKK_C, a: [[0.5, 0.4], [0.7, -0.2]], g: [[-0.5, -0.4], [-0.1, -0.4]] })
    }

    pub fn white_noise() -> Self {
        Self::new(Family::WhiteNoise)
    }
}

/// Symmetric square root of a 2×2 symmetric matrix; eigenvalues below −1e-10 are an error.
fn sym_sqrt(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    if !(l2 >= -1e-10) || !l1.is_finite() {
        return Err(Error::Simulation(format!("conditional covariance not positive semidefinite (eigenvalues {l1}, {l2})")));
    }
    let (r1, r2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
    let t = r1 + r2;
    if t == 0.0 {
        return Ok(Matrix2::zeros());
    }
    let sym = Matrix2::new(a, b, b, d);
    Ok((sym + Matrix2::identity() * (r1 * r2)) / t)
}

/// Innovation schedule: `switch = Some((t0, law))` replaces the law for output times `t ≥ t0` (1-based).
fn run(spec: &ProcessSpec, len: usize, rng: &mut ChaCha8Rng, switch: Option<(usize, InnovationLaw)>) -> Result<Vec<f64>> {
    spec.innovation.validate()?;
    if len < 2 {
        return Err(Error::Config(format!("series length {len} must be at least 2")));
    }
    let total = spec.burn_in + len;
    let mut x = Vector2::zeros();
    let mut eps_prev = Vector2::zeros();
    let (mut sigma, bekk) = match &spec.family {
        Family::Bekk { c, a, g } => {
            let c = mat(c);
            let base = c.transpose() * c;
            (base, Some((base, mat(a), mat(g))))
        }
        _ => (Matrix2::zeros(), None),
    };
    let mut out = Vec::with_capacity(len * 2);
    for step in 0..total {
        let t_out = step as isize - spec.burn_in as isize + 1;
        let law = match switch {
            Some((t0, law)) if t_out >= t0 as isize => law,
            _ => spec.innovation,
        };
        let e = law.draw(rng);
        let next = match &spec.family {
            Family::Var { phi } => mat(phi) * x + e,
            Family::Vma { theta } => e + mat(theta) * eps_prev,
            Family::Varma { phi, theta } => mat(phi) * x + e + mat(theta) * eps_prev,
            Family::Expar => {
                let k = 10.0 * (-x[0] * x[0] - x[1] * x[1]).exp();
                Vector2::new(0.3 - k * x[1], 0.3 - k * x[0]) + e
            }
            Family::Bilinear => Vector2::new(
                0.6 * x[0] + 0.7 * x[0] * eps_prev[1] + e[0],
                0.6 * x[1] + 0.7 * x[1] * eps_prev[0] + e[1],
            ) + e,
            Family::Nar => Vector2::new(0.7 * x[0].abs() / (x[1].abs() + 1.0), 0.7 * x[1].abs() / (x[0].abs() + 1.0)) + e,
            Family::Bekk { .. } => {
                let (base, a, g) = bekk.as_ref().expect("bekk parameters");
                if step > 0 {
                    sigma = base + a.transpose() * x * x.transpose() * a + g.transpose() * sigma * g;
                }
                sym_sqrt(&sigma)? * e
            }
            Family::WhiteNoise => e,
        };
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Simulation(format!("{} recursion diverged at step {step}", spec.family.name())));
        }
        x = next;
        eps_prev = e;
        if step >= spec.burn_in {
            out.extend_from_slice(&[x[0], x[1]]);
        }
    }
    Ok(out)
}

/// Seeded generator for series `stream` of a run with base `seed`.
pub fn series_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates `burn_in + len` steps from a zero state and keeps the last `len`.
pub fn simulate(spec: &ProcessSpec, len: usize, seed: u64) -> Result<MTSeries> {
    simulate_stream(spec, len, seed, 0)
}

pub fn simulate_stream(spec: &ProcessSpec, len: usize, seed: u64, stream: u64) -> Result<MTSeries> {
    let values = run(spec, len, &mut series_rng(seed, stream), None)?;
    MTSeries::new(spec.family.name(), len, 2, values)
}

/// Which transitory-change formula to apply after the onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MtcReading {
    /// `X''_{t0+k} = X_{t0} + ηᵏ w`.
    #[default]
    Printed,
    /// `X''_{t0+k} = X_{t0+k} + ηᵏ w`.
    Transitory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutlierSpec {
    /// Temporary change starting at 1-based time `t0`.
    Mtc { t0: usize, w: Vec<f64>, eta: f64, reading: MtcReading },
    /// Innovations drawn from `law` for 1-based times `t ≥ t0`.
    Mio { t0: usize, law: InnovationLaw },
}

pub fn contaminate_mtc(series: &MTSeries, spec: &OutlierSpec) -> Result<MTSeries> {
    let OutlierSpec::Mtc { t0, w, eta, reading } = spec else {
        return Err(Error::Config("contaminate_mtc needs an MTC outlier spec".into()));
    };
    let (len, dim) = (series.len(), series.dim());
    if *t0 < 1 || *t0 > len {
        return Err(Error::Config(format!("onset t0 = {t0} outside 1..={len}")));
    }
    if w.len() != dim {
        return Err(Error::Shape(format!("outlier size has {} entries for {dim} components", w.len())));
    }
    if !(*eta > 0.0 && *eta < 1.0) {
        return Err(Error::Config(format!("decay η = {eta} must lie in (0, 1)")));
    }
    let base = series.row(t0 - 1).to_vec();
    let mut values = series.values().to_vec();
    for t in (t0 - 1)..len {
        let decay = eta.powi((t + 1 - t0) as i32);
        for j in 0..dim {
            let level = match reading {
                MtcReading::Printed => base[j],
                MtcReading::Transitory => series.get(t, j),
            };
            values[t * dim + j] = level + decay * w[j];
        }
    }
    MTSeries::new(series.id(), len, dim, values)
}

/// Re-runs the recursion of `process` with the outlier law from `t0` on; the prefix
/// before `t0` is bitwise identical to `simulate_stream(process, len, seed, stream)`.
pub fn contaminate_mio(process: &ProcessSpec, outlier: &OutlierSpec, len: usize, seed: u64, stream: u64) -> Result<MTSeries> {
    let OutlierSpec::Mio { t0, law } = outlier else {
        return Err(Error::Config("contaminate_mio needs an MIO outlier spec".into()));
    };
    law.validate()?;
    if *t0 < 1 || *t0 > len {
        return Err(Error::Config(format!("onset t0 = {t0} outside 1..={len}")));
    }
    let values = run(process, len, &mut series_rng(seed, stream), Some((*t0, *law)))?;
    MTSeries::new(process.family.name(), len, 2, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    S1_1,
    S1_2,
    S2_1,
    S2_2,
    S3_1,
    S3_2,
    Mtc(u8),
    Mio(u8),
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::S1_1,
        Scenario::S1_2,
        Scenario::S2_1,
        Scenario::S2_2,
        Scenario::S3_1,
        Scenario::S3_2,
        Scenario::Mtc(1),
        Scenario::Mtc(2),
        Scenario::Mtc(3),
        Scenario::Mio(1),
        Scenario::Mio(2),
        Scenario::Mio(3),
    ];

    /// Base scenario (1, 2 or 3).
    pub fn base(&self) -> u8 {
        match self {
            Scenario::S1_1 | Scenario::S1_2 => 1,
            Scenario::S2_1 | Scenario::S2_2 => 2,
            Scenario::S3_1 | Scenario::S3_2 => 3,
            Scenario::Mtc(i) | Scenario::Mio(i) => *i,
        }
    }

    pub fn outlier_count(&self) -> usize {
        match self {
            Scenario::S1_2 | Scenario::S2_2 | Scenario::S3_2 => 2,
            _ => 1,
        }
    }

    pub fn series_count(&self) -> usize {
        2 * SERIES_PER_PROCESS + self.outlier_count()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::S1_1 => write!(f, "1.1"),
            Scenario::S1_2 => write!(f, "1.2"),
            Scenario::S2_1 => write!(f, "2.1"),
            Scenario::S2_2 => write!(f, "2.2"),
            Scenario::S3_1 => write!(f, "3.1"),
            Scenario::S3_2 => write!(f, "3.2"),
            Scenario::Mtc(i) => write!(f, "MTC{i}"),
            Scenario::Mio(i) => write!(f, "MIO{i}"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| !c.is_whitespace() && *c != '-' && *c != '_').collect::<String>().to_ascii_uppercase();
        let sc = match norm.as_str() {
            "1.1" => Scenario::S1_1,
            "1.2" => Scenario::S1_2,
            "2.1" => Scenario::S2_1,
            "2.2" => Scenario::S2_2,
            "3.1" => Scenario::S3_1,
            "3.2" => Scenario::S3_2,
            other => {
                let parsed = other
                    .strip_prefix("MTC")
                    .map(|i| (true, i))
                    .or_else(|| other.strip_prefix("MIO").map(|i| (false, i)))
                    .and_then(|(mtc, i)| i.parse::<u8>().ok().filter(|i| (1..=3).contains(i)).map(|i| (mtc, i)));
                match parsed {
                    Some((true, i)) => Scenario::Mtc(i),
                    Some((false, i)) => Scenario::Mio(i),
                    None => return Err(Error::Config(format!("unknown scenario '{s}'"))),
                }
            }
        };
        Ok(sc)
    }
}

pub const SERIES_PER_PROCESS: usize = 5;
pub const MTC_DECAY: f64 = 0.99;

/// The two generating processes of a base scenario.
pub fn base_processes(base: u8) -> Result<[ProcessSpec; 2]> {
    match base {
        1 => Ok([ProcessSpec::var1(), ProcessSpec::vma1()]),
        2 => Ok([ProcessSpec::expar(), ProcessSpec::bilinear()]),
        3 => Ok([ProcessSpec::bekk1(), ProcessSpec::bekk2()]),
        _ => Err(Error::Config(format!("unknown base scenario {base}"))),
    }
}

fn outlier_processes(scenario: Scenario) -> Vec<ProcessSpec> {
    match scenario {
        Scenario::S1_1 => vec![ProcessSpec::varma11()],
        Scenario::S1_2 => vec![ProcessSpec::varma11(), ProcessSpec::nar()],
        Scenario::S2_1 => vec![ProcessSpec::nar()],
        Scenario::S2_2 => vec![ProcessSpec::nar(), ProcessSpec::var_outlier()],
        Scenario::S3_1 => vec![ProcessSpec::white_noise()],
        Scenario::S3_2 => vec![ProcessSpec::white_noise(), ProcessSpec::bilinear()],
        Scenario::Mtc(_) | Scenario::Mio(_) => Vec::new(),
    }
}

/// The outlier applied in an MTC/MIO scenario of length `len`.
pub fn scenario_outlier(scenario: Scenario, len: usize, reading: MtcReading) -> Option<OutlierSpec> {
    let t0 = len / 2;
    match scenario {
        Scenario::Mtc(i) => {
            let size = if i == 3 { 1.0 } else { 5.0 };
            Some(OutlierSpec::Mtc { t0, w: vec![size, -size], eta: MTC_DECAY, reading })
        }
        Scenario::Mio(i) => {
            let nu = if i == 3 { 0.3 } else { 3.0 };
            Some(OutlierSpec::Mio { t0, law: InnovationLaw::ChiSquared { nu } })
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesLabel {
    /// Regular series of cluster 1 or 2.
    Cluster(usize),
    Outlier,
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesLabel::Cluster(c) => write!(f, "{c}"),
            SeriesLabel::Outlier => write!(f, "outlier"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub scenario: Scenario,
    pub dataset: Dataset,
    pub labels: Vec<SeriesLabel>,
    pub outliers: Vec<usize>,
}

impl ScenarioData {
    /// `{series_id: label}` as JSON.
    pub fn truth_json(&self) -> Result<String> {
        let map: BTreeMap<&str, String> =
            self.dataset.series().iter().zip(&self.labels).map(|(s, l)| (s.id(), l.to_string())).collect();
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn write(&self, csv_path: impl AsRef<Path>, layout: Layout, truth_path: impl AsRef<Path>) -> Result<()> {
        write_csv(&self.dataset, layout, csv_path)?;
        std::fs::write(truth_path, self.truth_json()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    pub innovation: InnovationLaw,
    pub mtc_reading: MtcReading,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { innovation: InnovationLaw::Gaussian, mtc_reading: MtcReading::Printed }
    }
}

/// Five series per base process (labels 1 and 2) followed by the scenario's outliers.
/// Series `i` uses stream `i` of `seed`.
pub fn build_scenario(scenario: Scenario, len: usize, seed: u64, options: &ScenarioOptions) -> Result<ScenarioData> {
    options.innovation.validate()?;
    let base = base_processes(scenario.base())?.map(|p| p.with_innovation(options.innovation));
    let mut series = Vec::with_capacity(scenario.series_count());
    let mut labels = Vec::with_capacity(scenario.series_count());
    for (c, process) in base.iter().enumerate() {
        for r in 0..SERIES_PER_PROCESS {
            let stream = series.len() as u64;
            let s = simulate_stream(process, len, seed, stream)?;
            series.push(s.with_id(format!("{}{}-{}", process.family.name(), c + 1, r + 1)));
            labels.push(SeriesLabel::Cluster(c + 1));
        }
    }
    let mut outliers = Vec::new();
    for process in outlier_processes(scenario) {
        let process = process.with_innovation(options.innovation);
        let stream = series.len() as u64;
        let s = simulate_stream(&process, len, seed, stream)?;
        outliers.push(series.len());
        series.push(s.with_id(format!("outlier-{}", process.family.name())));
        labels.push(SeriesLabel::Outlier);
    }
    if let Some(spec) = scenario_outlier(scenario, len, options.mtc_reading) {
        let stream = series.len() as u64;
        let s = match spec {
            OutlierSpec::Mtc { .. } => contaminate_mtc(&simulate_stream(&base[0], len, seed, stream)?, &spec)?,
            OutlierSpec::Mio { .. } => contaminate_mio(&base[0], &spec, len, seed, stream)?,
        };
        outliers.push(series.len());
        let kind = if matches!(spec, OutlierSpec::Mtc { .. }) { "MTC" } else { "MIO" };
        series.push(s.with_id(format!("outlier-{kind}")));
        labels.push(SeriesLabel::Outlier);
    }
    Ok(ScenarioData { scenario, dataset: Dataset::new(series)?, labels, outliers })
}

/// Every generating process of a first-scheme scenario (base processes, then the
/// outlier processes), `per_process` series each. Base series are labelled with
/// their cluster, the rest as outliers. Not defined for MTC/MIO scenarios.
pub fn build_pool(scenario: Scenario, per_process: usize, len: usize, seed: u64, options: &ScenarioOptions) -> Result<ScenarioData> {
    if matches!(scenario, Scenario::Mtc(_) | Scenario::Mio(_)) {
        return Err(Error::Config(format!("no process pool for scenario {scenario}")));
    }
    options.innovation.validate()?;
    let base = base_processes(scenario.base())?;
    let mut processes: Vec<(ProcessSpec, SeriesLabel)> =
        base.into_iter().enumerate().map(|(c, p)| (p, SeriesLabel::Cluster(c + 1))).collect();
    processes.extend(outlier_processes(scenario).into_iter().map(|p| (p, SeriesLabel::Outlier)));
    let mut series = Vec::new();
    let mut labels = Vec::new();
    let mut outliers = Vec::new();
    for (k, (process, label)) in processes.iter().enumerate() {
        let process = process.clone().with_innovation(options.innovation);
        for r in 0..per_process {
            let stream = series.len() as u64;
            let s = simulate_stream(&process, len, seed, stream)?;
            if *label == SeriesLabel::Outlier {
                outliers.push(series.len());
            }
            series.push(s.with_id(format!("{}{}-{}", process.family.name(), k + 1, r + 1)));
            labels.push(*label);
        }
    }
    Ok(ScenarioData { scenario, dataset: Dataset::new(series)?, labels, outliers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
    }

    #[test]
    fn zero_var_is_white_noise() {
        let zero = ProcessSpec::new(Family::Var { phi: [[0.0; 2]; 2] });
        let a = simulate(&zero, 200, 5).unwrap();
        let b = simulate(&ProcessSpec::white_noise(), 200, 5).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn var_autocovariance_matches_lyapunov() {
        let phi = mat(&PHI_BASE1);
        let mut gamma0 = Matrix2::identity();
        for _ in 0..200 {
            gamma0 = phi * gamma0 * phi.transpose() + Matrix2::identity();
        }
        let gamma1 = phi * gamma0;
        let s = simulate(&ProcessSpec::var1(), 50_000, 11).unwrap();
        let t = s.len();
        let mut sample = Matrix2::zeros();
        for k in 0..t - 1 {
            let (x1, x0) = (Vector2::from_row_slice(s.row(k + 1)), Vector2::from_row_slice(s.row(k)));
            sample += x1 * x0.transpose();
        }
        sample /= t as f64;
        assert!((sample - gamma1).abs().max() < 0.02, "{sample} vs {gamma1}");
    }

    #[test]
    fn bekk_processes_are_strictly_stable() {
        // both parameter sets have spectral radius of A⊗A + G⊗G above 1, so the
        // covariance is infinite; windowed medians of |X| must still agree
        for spec in [ProcessSpec::bekk1(), ProcessSpec::bekk2()] {
            let s = simulate(&spec, 50_000, 3).unwrap();
            assert!(s.values().iter().all(|v| v.is_finite()));
            for j in 0..2 {
                let col: Vec<f64> = s.column(j).iter().map(|v| v.abs()).collect();
                let quantile = |w: &[f64], p: f64| {
                    let mut v = w.to_vec();
                    v.sort_by(f64::total_cmp);
                    v[(p * (v.len() - 1) as f64) as usize]
                };
                let (a, b) = (quantile(&col[..25_000], 0.5), quantile(&col[25_000..], 0.5));
                assert!((a - b).abs() < 0.2 * a, "{} component {j}: {a} vs {b}", spec.family.name());
            }
        }
    }

    #[test]
    fn symmetric_square_root() {
        let m = Matrix2::new(4.0, 1.0, 1.0, 3.0);
        let r = sym_sqrt(&m).unwrap();
        assert!((r * r - m).abs().max() < 1e-12);
        assert!((r - r.transpose()).abs().max() == 0.0);
        assert!(matches!(sym_sqrt(&Matrix2::new(1.0, 2.0, 2.0, 1.0)), Err(Error::Simulation(_))));
    }

    #[test]
    fn mtc_examples() {
        let s = simulate(&ProcessSpec::var1(), 400, 2).unwrap();
        let spec = OutlierSpec::Mtc { t0: 200, w: vec![5.0, -5.0], eta: 0.99, reading: MtcReading::Printed };
        let c = contaminate_mtc(&s, &spec).unwrap();
        assert_eq!(&c.values()[..199 * 2], &s.values()[..199 * 2]);
        assert_eq!(c.get(199, 0), s.get(199, 0) + 5.0);
        let shock = 5.0 * 0.99f64.powi(100);
        assert!((shock - 1.83).abs() < 0.01);
        assert!((c.get(299, 0) - (s.get(199, 0) + shock)).abs() < 1e-12);
        assert!((c.get(299, 1) - (s.get(199, 1) - shock)).abs() < 1e-12);

        let alt = OutlierSpec::Mtc { t0: 200, w: vec![5.0, -5.0], eta: 0.99, reading: MtcReading::Transitory };
        let c = contaminate_mtc(&s, &alt).unwrap();
        assert!((c.get(299, 0) - (s.get(299, 0) + shock)).abs() < 1e-12);

        let zero = OutlierSpec::Mtc { t0: 200, w: vec![0.0, 0.0], eta: 0.99, reading: MtcReading::Printed };
        let flat = contaminate_mtc(&s, &zero).unwrap();
        assert!((199..400).all(|t| flat.row(t) == s.row(199)));
        let zero_alt = OutlierSpec::Mtc { t0: 200, w: vec![0.0, 0.0], eta: 0.99, reading: MtcReading::Transitory };
        assert_eq!(contaminate_mtc(&s, &zero_alt).unwrap().values(), s.values());

        let late = OutlierSpec::Mtc { t0: 401, w: vec![1.0, 1.0], eta: 0.5, reading: MtcReading::Printed };
        assert!(matches!(contaminate_mtc(&s, &late), Err(Error::Config(_))));
    }

    #[test]
    fn mio_prefix_and_noop() {
        let p = ProcessSpec::expar();
        let clean = simulate_stream(&p, 300, 8, 4).unwrap();
        let mio = OutlierSpec::Mio { t0: 150, law: InnovationLaw::ChiSquared { nu: 3.0 } };
        let dirty = contaminate_mio(&p, &mio, 300, 8, 4).unwrap();
        assert_eq!(&dirty.values()[..149 * 2], &clean.values()[..149 * 2]);
        assert_ne!(dirty.row(149), clean.row(149));
        let same = OutlierSpec::Mio { t0: 150, law: InnovationLaw::Gaussian };
        assert_eq!(contaminate_mio(&p, &same, 300, 8, 4).unwrap().values(), clean.values());
    }

    #[test]
    fn innovation_moments() {
        let n = 1_000_000;
        let mut rng = series_rng(1, 0);
        let draws: Vec<Vector2<f64>> = (0..n).map(|_| InnovationLaw::Gaussian.draw(&mut rng)).collect();
        let mut cov = Matrix2::zeros();
        let mut mean = Vector2::zeros();
        for d in &draws {
            mean += d;
            cov += d * d.transpose();
        }
        mean /= n as f64;
        cov = cov / n as f64 - mean * mean.transpose();
        assert!(mean.abs().max() < 0.01);
        assert!((cov - Matrix2::identity()).abs().max() < 0.02);

        let t3: Vec<f64> = (0..n).map(|_| InnovationLaw::StudentT { nu: 3.0 }.draw(&mut rng)[0]).collect();
        let (m, v) = moments(&t3);
        let kurt = t3.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64 / (v * v) - 3.0;
        assert!(kurt > 6.0, "{kurt}");

        let chi: Vec<f64> = (0..n).map(|_| InnovationLaw::ChiSquared { nu: 3.0 }.draw(&mut rng)[1]).collect();
        let (m, v) = moments(&chi);
        assert!((m - 3.0).abs() < 0.02 && (v - 6.0).abs() < 0.1, "{m} {v}");
        let small: Vec<f64> = (0..n).map(|_| InnovationLaw::ChiSquared { nu: 0.3 }.draw(&mut rng)[0]).collect();
        let (m, v) = moments(&small);
        assert!((m - 0.3).abs() < 0.01 && (v - 0.6).abs() < 0.03, "{m} {v}");
    }

    #[test]
    fn scenario_composition() {
        let opts = ScenarioOptions::default();
        let s11 = build_scenario(Scenario::S1_1, 100, 1, &opts).unwrap();
        assert_eq!(s11.dataset.len(), 11);
        assert_eq!(s11.outliers, vec![10]);
        assert_eq!(s11.dataset.series()[10].id(), "outlier-VARMA");
        assert_eq!(s11.labels[..5], [SeriesLabel::Cluster(1); 5]);
        assert_eq!(s11.labels[5..10], [SeriesLabel::Cluster(2); 5]);

        let s32 = build_scenario(Scenario::S3_2, 100, 1, &opts).unwrap();
        assert_eq!(s32.dataset.len(), 12);
        assert_eq!(s32.outliers, vec![10, 11]);
        assert!(s32.dataset.series()[0].id().starts_with("BEKK"));
        assert_eq!(s32.dataset.series()[11].id(), "outlier-BL");

        let mtc2 = build_scenario(Scenario::Mtc(2), 100, 1, &opts).unwrap();
        assert_eq!(mtc2.dataset.len(), 11);
        let plain = simulate_stream(&ProcessSpec::expar(), 100, 1, 10).unwrap();
        assert_eq!(mtc2.dataset.series()[10].row(49)[0], plain.row(49)[0] + 5.0);

        for sc in Scenario::ALL {
            let d = build_scenario(sc, 64, 9, &opts).unwrap();
            assert_eq!(d.labels.len(), d.dataset.len());
            assert_eq!(d.dataset.len(), sc.series_count());
            assert!(d.outliers.iter().all(|&i| d.labels[i] == SeriesLabel::Outlier));
            assert_eq!(sc.to_string().parse::<Scenario>().unwrap(), sc);
        }
        assert!("4.1".parse::<Scenario>().is_err());
        let pool = build_pool(Scenario::S2_2, 3, 64, 1, &opts).unwrap();
        assert_eq!(pool.dataset.len(), 12);
        assert_eq!(pool.outliers, (6..12).collect::<Vec<_>>());
        assert!(build_pool(Scenario::Mio(1), 3, 64, 1, &opts).is_err());
        assert_eq!("mtc 3".parse::<Scenario>().unwrap(), Scenario::Mtc(3));
    }

    #[test]
    fn deterministic_and_truth_json() {
        let opts = ScenarioOptions { innovation: InnovationLaw::StudentT { nu: 3.0 }, ..Default::default() };
        let a = build_scenario(Scenario::S2_2, 80, 42, &opts).unwrap();
        let b = build_scenario(Scenario::S2_2, 80, 42, &opts).unwrap();
        for (x, y) in a.dataset.series().iter().zip(b.dataset.series()) {
            assert_eq!(x.values(), y.values());
        }
        let truth: BTreeMap<String, String> = serde_json::from_str(&a.truth_json().unwrap()).unwrap();
        assert_eq!(truth.len(), 12);
        assert_eq!(truth["outlier-VAR"], "outlier");
        assert_eq!(truth["EXPAR1-3"], "1");
    }

    #[test]
    fn law_parsing() {
        assert_eq!("t3".parse::<InnovationLaw>().unwrap(), InnovationLaw::StudentT { nu: 3.0 });
        assert_eq!("gaussian".parse::<InnovationLaw>().unwrap(), InnovationLaw::Gaussian);
        assert_eq!("chisq0.3".parse::<InnovationLaw>().unwrap(), InnovationLaw::ChiSquared { nu: 0.3 });
        assert!("t0".parse::<InnovationLaw>().is_err());
    }
}
