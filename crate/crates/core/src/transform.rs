//! Feature transforms applied before clustering: PCA of the raw feature matrix
//! and the lag-correlation alternative features.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcd::sidecar_path;
use crate::series::MTSeries;

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.90;

/// Stacks equal-length rows into an n×p matrix.
pub fn feature_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || p == 0 {
        return Err(Error::Shape("empty feature set".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(Error::Shape(format!("feature row {i} has length {}, expected {p}", rows[i].len())));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// p×q, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// Fraction of total variance carried by each retained component.
    pub explained: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// `mean + scores · loadingsᵀ`, row by row.
    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = scores * self.loadings.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

/// Fits PCA on an n×p matrix through the n×n Gram matrix of the centred data and
/// keeps the fewest components whose cumulative explained variance reaches
/// `variance_target`. Each loading column is signed so that its largest-magnitude
/// entry is positive.
pub fn fit_pca(features: &DMatrix<f64>, variance_target: f64) -> Result<PcaModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Config(format!("variance target {variance_target} is outside (0, 1]")));
    }
    let (n, p) = features.shape();
    if n < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 feature vectors, got {n}")));
    }
    let mean = features.row_mean().transpose();
    let mut centred = features.clone();
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let gram = &centred * centred.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]];
    if !(total > 0.0) || top <= f64::EPSILON * features.amax().powi(2) * (n * p) as f64 {
        return Err(Error::Degenerate("feature vectors have zero total variance".into()));
    }
    // numerical rank; eigenvalues below this are round-off of a zero direction
    let floor = top * 1e-12;
    let max_q = (n - 1).min(p);

    let mut explained = Vec::new();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut cumulative = 0.0;
    for &k in order.iter().take(max_q) {
        let lambda = eig.eigenvalues[k];
        if lambda <= floor {
            break;
        }
        let v = eig.eigenvectors.column(k);
        let mut u = centred.transpose() * v / lambda.sqrt();
        let norm = u.norm();
        u /= norm;
        let pivot = u.iamax();
        if u[pivot] < 0.0 {
            u = -u;
        }
        cols.push(u);
        explained.push(lambda / total);
        cumulative += lambda / total;
        if cumulative >= variance_target - 1e-12 {
            break;
        }
    }
    let loadings = DMatrix::from_columns(&cols);
    Ok(PcaModel { mean, loadings, explained })
}

/// Scores `(x − mean) · loadings` for every row.
pub fn transform_pca(model: &PcaModel, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if features.ncols() != model.n_features() {
        return Err(Error::Shape(format!(
            "features have length {}, PCA model expects {}",
            features.ncols(),
            model.n_features()
        )));
    }
    let mut centred = features.clone();
    for mut row in centred.row_iter_mut() {
        row -= model.mean.transpose();
    }
    Ok(centred * &model.loadings)
}

/// Convenience: fit on `features` and return the model together with its training scores.
pub fn pca_scores(features: &DMatrix<f64>, variance_target: f64) -> Result<(PcaModel, DMatrix<f64>)> {
    let model = fit_pca(features, variance_target)?;
    let scores = transform_pca(&model, features)?;
    Ok((model, scores))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PcaSidecar {
    n_features: usize,
    n_components: usize,
    explained: Vec<f64>,
    sign_convention: String,
}

/// Writes `index,mean,pc1..pcq` (one row per feature coordinate) plus a JSON sidecar.
pub fn write_pca(model: &PcaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(std::fs::File::create(path)?);
    let mut header = vec!["index".to_string(), "mean".to_string()];
    header.extend((1..=model.n_components()).map(|k| format!("pc{k}")));
    w.write_record(&header)?;
    for i in 0..model.n_features() {
        let mut rec = vec![i.to_string(), model.mean[i].to_string()];
        rec.extend(model.loadings.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let sidecar = PcaSidecar {
        n_features: model.n_features(),
        n_components: model.n_components(),
        explained: model.explained.clone(),
        sign_convention: "max-abs-entry-positive".into(),
    };
    let mut f = std::fs::File::create(sidecar_path(path))?;
    f.write_all(serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    Ok(())
}

pub fn read_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    let path = path.as_ref();
    let sidecar: PcaSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let mut rdr = csv::Reader::from_path(path)?;
    let (p, q) = (sidecar.n_features, sidecar.n_components);
    let mut mean = DVector::zeros(p);
    let mut loadings = DMatrix::zeros(p, q);
    let mut seen = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let parse = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse { row, msg: format!("bad value in column {c}") })
        };
        if rec.len() != q + 2 || row > p {
            return Err(Error::Parse { row, msg: "row does not match the PCA sidecar".into() });
        }
        mean[idx] = parse(1)?;
        for k in 0..q {
            loadings[(idx, k)] = parse(k + 2)?;
        }
        seen += 1;
    }
    if seen != p {
        return Err(Error::Parse { row: seen, msg: format!("expected {p} rows, found {seen}") });
    }
    Ok(PcaModel { mean, loadings, explained: sidecar.explained })
}

pub const DEFAULT_MAX_LAG: usize = 1;

/// Lag-correlation features: autocorrelations at lags `1..=max_lag` for each
/// component, then for each pair `j1 < j2` the cross-correlations
/// `corr(X_{t,j1}, X_{t+h,j2})` for `h = −max_lag..=max_lag`. Divisor T, full-series
/// means and standard deviations.
pub fn correlation_features(series: &MTSeries, max_lag: usize) -> Result<Vec<f64>> {
    let len = series.len();
    if max_lag == 0 || max_lag >= len {
        return Err(Error::Domain(format!("max lag {max_lag} must satisfy 1 ≤ l < T = {len}")));
    }
    let dim = series.dim();
    let mut centred = Vec::with_capacity(dim);
    let mut sds = Vec::with_capacity(dim);
    for j in 0..dim {
        let col = series.column(j);
        let mean = col.iter().sum::<f64>() / len as f64;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let sd = (c.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Domain(format!("component j={} has zero variance", j + 1)));
        }
        centred.push(c);
        sds.push(sd);
    }
    let lagged = |a: usize, b: usize, h: i64| -> f64 {
        let (x, y) = (&centred[a], &centred[b]);
        let sum: f64 = if h >= 0 {
            (0..len - h as usize).map(|t| x[t] * y[t + h as usize]).sum()
        } else {
            ((-h) as usize..len).map(|t| x[t] * y[t - (-h) as usize]).sum()
        };
        sum / len as f64 / (sds[a] * sds[b])
    };
    let mut out = Vec::new();
    for j in 0..dim {
        for h in 1..=max_lag as i64 {
            out.push(lagged(j, j, h));
        }
    }
    for j1 in 0..dim {
        for j2 in j1 + 1..dim {
            for h in -(max_lag as i64)..=max_lag as i64 {
                out.push(lagged(j1, j2, h));
            }
        }
    }
    Ok(out)
}
