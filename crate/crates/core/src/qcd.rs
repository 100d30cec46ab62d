//! Quantile cross-spectral density (QCD) features.
//!
//! Each component is mapped to its rank indicator series `I{F̂(X_t) ≤ τ}`; the
//! rank-based copula cross-periodogram of every pair of indicator series is
//! smoothed over the Fourier frequencies with a periodized kernel, and the
//! resulting complex tensor is flattened into a [`FeatureVector`].

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Dataset, MTSeries};

/// Version tag of the flattened feature layout `(j1, j2, k, i, i')`.
pub const LAYOUT_VERSION: u32 = 1;

/// Strictly increasing quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("at least one quantile level is required".into()));
        }
        if let Some(bad) = levels.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config(format!("quantile level {bad} is outside (0, 1)")));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("quantile levels must be strictly increasing".into()));
        }
        Ok(Self(levels))
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self(vec![0.1, 0.5, 0.9])
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(q: QuantileLevels) -> Self {
        q.0
    }
}

/// Fourier frequencies `2πs/T`, `s = 0..=⌊T/2⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    len: usize,
}

impl FrequencyGrid {
    pub fn new(len: usize) -> Self {
        Self { len }
    }

    /// Number of frequencies K = ⌊T/2⌋ + 1.
    pub fn count(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn frequency(&self, s: usize) -> f64 {
        2.0 * PI * s as f64 / self.len as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.count()).map(|s| self.frequency(s)).collect()
    }
}

/// Epanechnikov weight function rescaled to support [−π, π], with bandwidth `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingKernel {
    bandwidth: f64,
}

impl SmoothingKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth <= PI) {
            return Err(Error::Config(format!("bandwidth {bandwidth} is outside (0, π]")));
        }
        Ok(Self { bandwidth })
    }

    /// Default bandwidth `0.5 · T^(-1/4)`.
    pub fn default_for_len(len: usize) -> Self {
        Self { bandwidth: 0.5 * (len as f64).powf(-0.25) }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `W(x) = 3/(4π) · (1 − (x/π)²)` on [−π, π], zero outside. Integrates to 1.
    pub fn weight(x: f64) -> f64 {
        let z = x / PI;
        if z.abs() <= 1.0 {
            0.75 / PI * (1.0 - z * z)
        } else {
            0.0
        }
    }

    /// Periodized, rescaled kernel `W_T(u) = Σ_v h⁻¹ W((u + 2πv)/h)`.
    pub fn periodized(&self, u: f64) -> f64 {
        let h = self.bandwidth;
        let reach = PI * h;
        let lo = ((-reach - u) / (2.0 * PI)).ceil() as i64;
        let hi = ((reach - u) / (2.0 * PI)).floor() as i64;
        (lo..=hi).map(|v| Self::weight((u + 2.0 * PI * v as f64) / h) / h).sum()
    }
}

/// Bandwidth choice: the default rule or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl Bandwidth {
    pub fn kernel_for(&self, len: usize) -> Result<SmoothingKernel> {
        match *self {
            Bandwidth::Auto => Ok(SmoothingKernel::default_for_len(len)),
            Bandwidth::Fixed(h) => SmoothingKernel::new(h),
        }
    }
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        let h: f64 = s.parse().map_err(|_| Error::Config(format!("bad bandwidth '{s}'")))?;
        SmoothingKernel::new(h)?;
        Ok(Bandwidth::Fixed(h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcdConfig {
    pub levels: QuantileLevels,
    pub bandwidth: Bandwidth,
}

impl Default for QcdConfig {
    fn default() -> Self {
        Self { levels: QuantileLevels::default(), bandwidth: Bandwidth::Auto }
    }
}

/// Real and imaginary parts of the flattened smoothed QCD tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.re.len() + self.im.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Real parts followed by imaginary parts.
    pub fn to_flat(&self) -> Vec<f64> {
        self.re.iter().chain(&self.im).copied().collect()
    }
}

/// Flat index of `(j1, j2, k, i, i')` (all 0-based) in a feature part.
pub fn feature_index(dim: usize, levels: usize, n_freq: usize, j1: usize, j2: usize, k: usize, i: usize, ip: usize) -> usize {
    (((j1 * dim + j2) * n_freq + k) * levels + i) * levels + ip
}

/// Indicator `I{F̂(X_{t,j}) ≤ τ}` for every t, with F̂ the empirical CDF (ties share the max rank).
pub fn rank_indicator(series: &MTSeries, tau: f64, j: usize) -> Vec<f64> {
    let fractions = rank_fractions(&series.column(j));
    fractions.iter().map(|&f| if f <= tau { 1.0 } else { 0.0 }).collect()
}

/// `F̂(x_t) = #{s : x_s ≤ x_t} / T`.
fn rank_fractions(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && column[order[end + 1]] == column[order[start]] {
            end += 1;
        }
        let frac = (end + 1) as f64 / n as f64;
        for &idx in &order[start..=end] {
            out[idx] = frac;
        }
        start = end + 1;
    }
    out
}

/// `d(ω) = Σ_{t=1}^{T} x_t e^{−iωt}` evaluated directly.
fn dft_at(x: &[f64], omega: f64) -> Complex64 {
    x.iter()
        .enumerate()
        .map(|(t, &v)| v * Complex64::from_polar(1.0, -omega * (t + 1) as f64))
        .sum()
}

/// CCR-periodogram `(2πT)⁻¹ d^{j1}(ω, τ) d^{j2}(−ω, τ')` at an arbitrary frequency.
pub fn ccr_periodogram(series: &MTSeries, omega: f64, tau: f64, tau_p: f64, j1: usize, j2: usize) -> Complex64 {
    let len = series.len() as f64;
    let a = rank_indicator(series, tau, j1);
    let b = rank_indicator(series, tau_p, j2);
    dft_at(&a, omega) * dft_at(&b, -omega) / (2.0 * PI * len)
}

/// Smoothed CCR-periodogram tensor indexed by `(j1, j2, k, i, i')`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCcr {
    pub dim: usize,
    pub levels: usize,
    pub n_freq: usize,
    pub values: Vec<Complex64>,
}

impl SmoothedCcr {
    pub fn get(&self, j1: usize, j2: usize, k: usize, i: usize, ip: usize) -> Complex64 {
        self.values[feature_index(self.dim, self.levels, self.n_freq, j1, j2, k, i, ip)]
    }
}

/// DFTs `d^j(2πs/T, τ)`, s = 0..T−1, of every indicator series, indexed `[j][i][s]`.
fn indicator_dfts(series: &MTSeries, levels: &QuantileLevels) -> Vec<Vec<Vec<Complex64>>> {
    let len = series.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    (0..series.dim())
        .map(|j| {
            let fractions = rank_fractions(&series.column(j));
            levels
                .levels()
                .iter()
                .map(|&tau| {
                    let mut buf: Vec<Complex64> = fractions
                        .iter()
                        .map(|&f| Complex64::new(if f <= tau { 1.0 } else { 0.0 }, 0.0))
                        .collect();
                    fft.process(&mut buf);
                    // the FFT sums over t−1 = 0..T−1; shift to t = 1..T
                    for (s, v) in buf.iter_mut().enumerate() {
                        *v *= Complex64::from_polar(1.0, -2.0 * PI * s as f64 / len as f64);
                    }
                    buf
                })
                .collect()
        })
        .collect()
}

pub fn smoothed_ccr(
    series: &MTSeries,
    kernel: &SmoothingKernel,
    grid: &FrequencyGrid,
    levels: &QuantileLevels,
) -> Result<SmoothedCcr> {
    let len = series.len();
    if len < 4 {
        return Err(Error::Shape(format!("series length {len} is too short for spectral smoothing (need ≥ 4)")));
    }
    if grid.series_len() != len {
        return Err(Error::Shape(format!("frequency grid built for T={} but series has T={len}", grid.series_len())));
    }
    SmoothingKernel::new(kernel.bandwidth())?;

    let dim = series.dim();
    let r = levels.len();
    let n_freq = grid.count();
    let dfts = indicator_dfts(series, levels);

    // W_T(2πΔ/T) depends only on Δ = (k − s) mod T; keep the nonzero band.
    let band: Vec<(usize, f64)> = (0..len)
        .map(|delta| (delta, kernel.periodized(2.0 * PI * delta as f64 / len as f64)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let scale = (2.0 * PI / len as f64) / (2.0 * PI * len as f64);

    let mut values = vec![Complex64::new(0.0, 0.0); dim * dim * n_freq * r * r];
    // each (j1, j2) block is written by exactly one task; partitioned by output, not by summand
    values
        .par_chunks_mut(n_freq * r * r)
        .enumerate()
        .for_each(|(block, out)| {
            let (j1, j2) = (block / dim, block % dim);
            for k in 0..n_freq {
                for i in 0..r {
                    for ip in 0..r {
                        let (a, b) = (&dfts[j1][i], &dfts[j2][ip]);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &(delta, w) in &band {
                            let s = (k + len - delta) % len;
                            if s == 0 {
                                continue;
                            }
                            acc += w * a[s] * b[s].conj();
                        }
                        out[(k * r + i) * r + ip] = acc * scale;
                    }
                }
            }
        });
    Ok(SmoothedCcr { dim, levels: r, n_freq, values })
}

pub fn qcd_feature_vector(
    series: &MTSeries,
    kernel: &SmoothingKernel,
    grid: &FrequencyGrid,
    levels: &QuantileLevels,
) -> Result<FeatureVector> {
    let g = smoothed_ccr(series, kernel, grid, levels)?;
    Ok(FeatureVector {
        re: g.values.iter().map(|c| c.re).collect(),
        im: g.values.iter().map(|c| c.im).collect(),
    })
}

/// Features for every series of a dataset; all series must share the same length.
pub fn qcd_features(dataset: &Dataset, config: &QcdConfig) -> Result<(Vec<FeatureVector>, FeatureMeta)> {
    let len = dataset.common_len().ok_or_else(|| {
        Error::Shape("all series must have the same length before feature extraction".into())
    })?;
    let kernel = config.bandwidth.kernel_for(len)?;
    let grid = FrequencyGrid::new(len);
    let features = dataset
        .series()
        .par_iter()
        .map(|s| qcd_feature_vector(s, &kernel, &grid, &config.levels))
        .collect::<Result<Vec<_>>>()?;
    let meta = FeatureMeta {
        layout_version: LAYOUT_VERSION,
        series_len: len,
        dim: dataset.dim(),
        levels: config.levels.clone(),
        kernel: "epanechnikov".into(),
        bandwidth: kernel.bandwidth(),
        n_freq: grid.count(),
    };
    Ok((features, meta))
}

/// Euclidean distance over the concatenated real and imaginary parts.
pub fn d_qcd(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.re.len() != b.re.len() || a.im.len() != b.im.len() {
        return Err(Error::Shape(format!(
            "feature lengths differ: {}+{} vs {}+{}",
            a.re.len(),
            a.im.len(),
            b.re.len(),
            b.im.len()
        )));
    }
    let re: f64 = a.re.iter().zip(&b.re).map(|(x, y)| (x - y).powi(2)).sum();
    let im: f64 = a.im.iter().zip(&b.im).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((re + im).sqrt())
}

/// Pairwise `d_qcd` matrix.
pub fn distance_matrix(features: &[FeatureVector]) -> Result<Vec<Vec<f64>>> {
    let n = features.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = d_qcd(&features[i], &features[j])?;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

/// Sample cross-covariances of the indicator series at one lag, indexed `[j1][j2][i][i']`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCovariance {
    pub lag: i64,
    pub dim: usize,
    pub levels: usize,
    pub values: Vec<f64>,
}

impl QuantileCovariance {
    pub fn get(&self, j1: usize, j2: usize, i: usize, ip: usize) -> f64 {
        self.values[((j1 * self.dim + j2) * self.levels + i) * self.levels + ip]
    }
}

/// `γ̂(l) = T⁻¹ Σ_t (a_t − ā)(b_{t+l} − b̄)` over the overlapping range, for every
/// component pair and quantile pair, where `a`, `b` are rank indicator series.
pub fn quantile_cross_covariance(series: &MTSeries, lag: i64, levels: &QuantileLevels) -> Result<QuantileCovariance> {
    let len = series.len();
    if lag.unsigned_abs() as usize >= len {
        return Err(Error::Domain(format!("lag {lag} must satisfy |lag| < T = {len}")));
    }
    let dim = series.dim();
    let r = levels.len();
    let indicators: Vec<Vec<Vec<f64>>> = (0..dim)
        .map(|j| levels.levels().iter().map(|&tau| rank_indicator(series, tau, j)).collect())
        .collect();
    let mut values = Vec::with_capacity(dim * dim * r * r);
    for j1 in 0..dim {
        for j2 in 0..dim {
            for i in 0..r {
                for ip in 0..r {
                    let a = &indicators[j1][i];
                    let b = &indicators[j2][ip];
                    let ma = a.iter().sum::<f64>() / len as f64;
                    let mb = b.iter().sum::<f64>() / len as f64;
                    let (start, end) = if lag >= 0 { (0, len - lag as usize) } else { ((-lag) as usize, len) };
                    let sum: f64 = (start..end)
                        .map(|t| (a[t] - ma) * (b[(t as i64 + lag) as usize] - mb))
                        .sum();
                    values.push(sum / len as f64);
                }
            }
        }
    }
    Ok(QuantileCovariance { lag, dim, levels: r, values })
}

/// JSON sidecar describing a persisted feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub layout_version: u32,
    pub series_len: usize,
    pub dim: usize,
    pub levels: QuantileLevels,
    pub kernel: String,
    pub bandwidth: f64,
    pub n_freq: usize,
}

impl FeatureMeta {
    pub fn part_len(&self) -> usize {
        self.dim * self.dim * self.n_freq * self.levels.len() * self.levels.len()
    }
}

/// Sidecar path for a feature CSV: `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `series_id,j1,j2,k,i,iprime,re,im` rows (j and i indices 1-based, k = Fourier index s).
pub fn write_features_to<W: Write>(writer: W, ids: &[String], features: &[FeatureVector], meta: &FeatureMeta) -> Result<()> {
    if ids.len() != features.len() {
        return Err(Error::Shape("one id per feature vector is required".into()));
    }
    let r = meta.levels.len();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series_id", "j1", "j2", "k", "i", "iprime", "re", "im"])?;
    for (id, f) in ids.iter().zip(features) {
        if f.re.len() != meta.part_len() || f.im.len() != meta.part_len() {
            return Err(Error::Shape(format!("feature vector for '{id}' does not match the layout")));
        }
        for j1 in 0..meta.dim {
            for j2 in 0..meta.dim {
                for k in 0..meta.n_freq {
                    for i in 0..r {
                        for ip in 0..r {
                            let idx = feature_index(meta.dim, r, meta.n_freq, j1, j2, k, i, ip);
                            w.write_record([
                                id.clone(),
                                (j1 + 1).to_string(),
                                (j2 + 1).to_string(),
                                k.to_string(),
                                (i + 1).to_string(),
                                (ip + 1).to_string(),
                                f.re[idx].to_string(),
                                f.im[idx].to_string(),
                            ])?;
                        }
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_features(path: impl AsRef<Path>, ids: &[String], features: &[FeatureVector], meta: &FeatureMeta) -> Result<()> {
    let path = path.as_ref();
    write_features_to(std::fs::File::create(path)?, ids, features, meta)?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_features_from<R: Read>(reader: R, meta: &FeatureMeta) -> Result<(Vec<String>, Vec<FeatureVector>)> {
    if meta.layout_version != LAYOUT_VERSION {
        return Err(Error::Config(format!(
            "feature layout version {} is not supported (expected {LAYOUT_VERSION})",
            meta.layout_version
        )));
    }
    let r = meta.levels.len();
    let part = meta.part_len();
    let mut ids: Vec<String> = Vec::new();
    let mut parts: Vec<(Vec<Option<f64>>, Vec<f64>)> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != 8 {
            return Err(Error::Parse { row, msg: format!("expected 8 cells, found {}", rec.len()) });
        }
        let int = |c: usize, lo: usize, hi: usize| -> Result<usize> {
            rec[c]
                .parse::<usize>()
                .ok()
                .filter(|v| (lo..hi).contains(v))
                .ok_or_else(|| Error::Parse { row, msg: format!("index '{}' out of range", &rec[c]) })
        };
        let j1 = int(1, 1, meta.dim + 1)? - 1;
        let j2 = int(2, 1, meta.dim + 1)? - 1;
        let k = int(3, 0, meta.n_freq)?;
        let i = int(4, 1, r + 1)? - 1;
        let ip = int(5, 1, r + 1)? - 1;
        let num = |c: usize| -> Result<f64> {
            rec[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { row, msg: format!("non-numeric value '{}'", &rec[c]) })
        };
        let (re, im) = (num(6)?, num(7)?);
        let id = &rec[0];
        let pos = match ids.iter().position(|x| x == id) {
            Some(p) => p,
            None => {
                ids.push(id.to_string());
                parts.push((vec![None; part], vec![0.0; part]));
                ids.len() - 1
            }
        };
        let idx = feature_index(meta.dim, r, meta.n_freq, j1, j2, k, i, ip);
        if parts[pos].0[idx].replace(re).is_some() {
            return Err(Error::Parse { row, msg: "duplicate feature cell".into() });
        }
        parts[pos].1[idx] = im;
    }
    if ids.is_empty() {
        return Err(Error::Parse { row: 0, msg: "feature file has no rows".into() });
    }
    let mut features = Vec::with_capacity(ids.len());
    for (id, (re, im)) in ids.iter().zip(parts) {
        let re = re
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Parse { row: 0, msg: format!("series '{id}' has missing feature cells") })?;
        features.push(FeatureVector { re, im });
    }
    Ok((ids, features))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<FeatureVector>, FeatureMeta)> {
    let path = path.as_ref();
    let meta: FeatureMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let (ids, features) = read_features_from(std::fs::File::open(path)?, &meta)?;
    Ok((ids, features, meta))
}
