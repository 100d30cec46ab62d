//! Multivariate time series containers, CSV ingestion and the
//! stationarity-oriented transforms (log-differencing, standardization).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One d-variate series of length T, stored row-major (row = time index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTSeries {
    id: String,
    len: usize,
    dim: usize,
    values: Vec<f64>,
}

impl MTSeries {
    /// Builds a series from row-major values. Requires T ≥ 2, d ≥ 1 and finite entries.
    pub fn new(id: impl Into<String>, len: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if len < 2 {
            return Err(Error::Shape(format!("series '{id}' has length {len}, need at least 2")));
        }
        if dim == 0 {
            return Err(Error::Shape(format!("series '{id}' has no components")));
        }
        if values.len() != len * dim {
            return Err(Error::Shape(format!(
                "series '{id}': expected {} values for {len}x{dim}, got {}",
                len * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "series '{id}' has a non-finite entry at t={}, j={}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        Ok(Self { id, len, dim, values })
    }

    /// Builds a series from a list of rows.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows of unequal width".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(id, rows.len(), dim, values)
    }

    /// Builds a series from component columns.
    pub fn from_columns(id: impl Into<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.len();
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("columns of unequal length".into()));
        }
        let mut values = Vec::with_capacity(len * dim);
        for t in 0..len {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(id, len, dim, values)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Series length T.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of components d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry at 0-based time `t` and component `j`.
    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.values[t * self.dim + j]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.get(t, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every entry, keeping the shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.id.clone(), self.len, self.dim, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// An ordered, non-empty collection of series sharing a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    series: Vec<MTSeries>,
}

impl Dataset {
    pub fn new(series: Vec<MTSeries>) -> Result<Self> {
        let Some(first) = series.first() else {
            return Err(Error::Shape("dataset has no series".into()));
        };
        let dim = first.dim();
        if let Some(bad) = series.iter().find(|s| s.dim() != dim) {
            return Err(Error::Shape(format!(
                "series '{}' has {} components, expected {dim}",
                bad.id(),
                bad.dim()
            )));
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &[MTSeries] {
        &self.series
    }

    pub fn into_series(self) -> Vec<MTSeries> {
        self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.series[0].dim()
    }

    /// The common length, if every series has the same T.
    pub fn common_len(&self) -> Option<usize> {
        let t = self.series[0].len();
        self.series.iter().all(|s| s.len() == t).then_some(t)
    }
}

/// CSV layout for datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `series_id,t,c1,...,cd`
    Wide,
    /// `series_id,t,component,value`
    Long,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            other => Err(Error::Config(format!("unknown layout '{other}' (expected wide|long)"))),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, layout: Layout) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, layout)
}

pub fn read_csv<R: Read>(reader: R, layout: Layout) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    match layout {
        Layout::Wide => read_wide(&mut rdr, &header),
        Layout::Long => read_long(&mut rdr, &header),
    }
}

fn parse_num(field: &str, row: usize, what: &str) -> Result<f64> {
    if field.is_empty() {
        return Err(Error::Parse { row, msg: format!("missing {what}") });
    }
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse { row, msg: format!("non-numeric {what} '{field}'") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, msg: format!("non-finite {what} '{field}'") });
    }
    Ok(v)
}

fn parse_time(field: &str, row: usize) -> Result<usize> {
    field
        .parse::<usize>()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| Error::Parse { row, msg: format!("time index '{field}' is not a positive integer") })
}

/// Rows grouped per series id, in order of first appearance.
struct Grouped<V> {
    order: Vec<String>,
    groups: HashMap<String, V>,
}

impl<V: Default> Grouped<V> {
    fn new() -> Self {
        Self { order: Vec::new(), groups: HashMap::new() }
    }

    fn entry(&mut self, id: &str) -> &mut V {
        if !self.groups.contains_key(id) {
            self.order.push(id.to_string());
        }
        self.groups.entry(id.to_string()).or_default()
    }
}

/// Checks that time indices are exactly 1..=T; `rows[t-1]` holds the data row for t.
fn check_times(id: &str, times: &HashMap<usize, usize>) -> Result<usize> {
    let len = times.len();
    if let Some((&t, &row)) = times.iter().filter(|(&t, _)| t > len).min_by_key(|(&t, _)| t) {
        return Err(Error::Parse {
            row,
            msg: format!("series '{id}': time index {t} leaves a gap (expected consecutive 1..={len})"),
        });
    }
    Ok(len)
}

fn read_wide<R: Read>(rdr: &mut csv::Reader<R>, header: &csv::StringRecord) -> Result<Dataset> {
    if header.len() < 3 {
        return Err(Error::Parse { row: 0, msg: "wide header needs series_id,t and at least one component".into() });
    }
    let dim = header.len() - 2;
    // per series: t -> (data row, values)
    let mut grouped: Grouped<HashMap<usize, (usize, Vec<f64>)>> = Grouped::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} cells, found {}", header.len(), rec.len()),
            });
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(Error::Parse { row, msg: "missing series_id".into() });
        }
        let t = parse_time(&rec[1], row)?;
        let vals = (0..dim)
            .map(|j| parse_num(&rec[j + 2], row, &format!("value for '{}'", &header[j + 2])))
            .collect::<Result<Vec<_>>>()?;
        let group = grouped.entry(id);
        if group.insert(t, (row, vals)).is_some() {
            return Err(Error::Parse { row, msg: format!("duplicate (series_id, t) = ({id}, {t})") });
        }
    }
    let mut out = Vec::with_capacity(grouped.order.len());
    for id in &grouped.order {
        let group = &grouped.groups[id];
        let rows: HashMap<usize, usize> = group.iter().map(|(&t, (r, _))| (t, *r)).collect();
        let len = check_times(id, &rows)?;
        let values = (1..=len).flat_map(|t| group[&t].1.iter().copied()).collect();
        out.push(MTSeries::new(id.clone(), len, dim, values).map_err(|e| Error::Parse {
            row: group.values().map(|(r, _)| *r).min().unwrap_or(0),
            msg: e.to_string(),
        })?);
    }
    Dataset::new(out).map_err(|e| Error::Parse { row: 0, msg: e.to_string() })
}

#[derive(Default)]
struct LongSeries {
    // (t, component) -> (row, value)
    cells: HashMap<(usize, String), (usize, f64)>,
    first_row: usize,
}

fn read_long<R: Read>(rdr: &mut csv::Reader<R>, header: &csv::StringRecord) -> Result<Dataset> {
    if header.len() != 4 {
        return Err(Error::Parse { row: 0, msg: "long header must be series_id,t,component,value".into() });
    }
    let mut grouped: Grouped<LongSeries> = Grouped::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse { row, msg: format!("expected 4 cells, found {}", rec.len()) });
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(Error::Parse { row, msg: "missing series_id".into() });
        }
        let t = parse_time(&rec[1], row)?;
        let comp = rec[2].to_string();
        if comp.is_empty() {
            return Err(Error::Parse { row, msg: "missing component".into() });
        }
        let value = parse_num(&rec[3], row, "value")?;
        let series = grouped.entry(id);
        if series.cells.is_empty() {
            series.first_row = row;
        }
        if series.cells.insert((t, comp.clone()), (row, value)).is_some() {
            return Err(Error::Parse { row, msg: format!("duplicate cell ({id}, {t}, {comp})") });
        }
    }

    let mut out = Vec::with_capacity(grouped.order.len());
    let mut expected_dim: Option<usize> = None;
    for id in &grouped.order {
        let s = &grouped.groups[id];
        let mut comps: Vec<&String> = s.cells.keys().map(|(_, c)| c).collect();
        comps.sort();
        comps.dedup();
        let dim = comps.len();
        match expected_dim {
            None => expected_dim = Some(dim),
            Some(d) if d != dim => {
                return Err(Error::Parse {
                    row: s.first_row,
                    msg: format!("series '{id}' has {dim} components, expected {d}"),
                })
            }
            _ => {}
        }
        let mut times: HashMap<usize, usize> = HashMap::new();
        for ((t, _), (row, _)) in &s.cells {
            let e = times.entry(*t).or_insert(*row);
            *e = (*e).min(*row);
        }
        let len = check_times(id, &times)?;
        let mut values = Vec::with_capacity(len * dim);
        for t in 1..=len {
            for c in &comps {
                match s.cells.get(&(t, (*c).clone())) {
                    Some((_, v)) => values.push(*v),
                    None => {
                        return Err(Error::Parse {
                            row: times[&t],
                            msg: format!("series '{id}' is missing component '{c}' at t={t}"),
                        })
                    }
                }
            }
        }
        out.push(
            MTSeries::new(id.clone(), len, dim, values)
                .map_err(|e| Error::Parse { row: s.first_row, msg: e.to_string() })?,
        );
    }
    Dataset::new(out).map_err(|e| Error::Parse { row: 0, msg: e.to_string() })
}

pub fn write_csv(dataset: &Dataset, layout: Layout, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(dataset, layout, file)
}

/// Writes a dataset in the given layout. Numbers use the shortest representation
/// that round-trips bit-exactly. Long layout names components `c1..cd`, zero-padded
/// so lexicographic order matches column order.
pub fn write_csv_to<W: Write>(dataset: &Dataset, layout: Layout, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let dim = dataset.dim();
    let names = component_names(dim);
    match layout {
        Layout::Wide => {
            let mut header = vec!["series_id".to_string(), "t".to_string()];
            header.extend(names.iter().cloned());
            w.write_record(&header)?;
            for s in dataset.series() {
                for t in 0..s.len() {
                    let mut rec = vec![s.id().to_string(), (t + 1).to_string()];
                    rec.extend(s.row(t).iter().map(|v| v.to_string()));
                    w.write_record(&rec)?;
                }
            }
        }
        Layout::Long => {
            w.write_record(["series_id", "t", "component", "value"])?;
            for s in dataset.series() {
                for t in 0..s.len() {
                    for (j, name) in names.iter().enumerate() {
                        w.write_record([s.id(), &(t + 1).to_string(), name, &s.get(t, j).to_string()])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn component_names(dim: usize) -> Vec<String> {
    let width = dim.to_string().len();
    (1..=dim).map(|j| format!("c{j:0width$}")).collect()
}

/// First differences of the natural logarithm: entry (t, j) = ln x(t+1, j) − ln x(t, j).
pub fn log_difference(series: &MTSeries) -> Result<MTSeries> {
    if let Some(pos) = series.values().iter().position(|&v| v <= 0.0) {
        return Err(Error::Domain(format!(
            "log-difference needs positive values; series '{}' has {} at t={}, j={}",
            series.id(),
            series.values()[pos],
            pos / series.dim() + 1,
            pos % series.dim() + 1
        )));
    }
    let (len, dim) = (series.len(), series.dim());
    let mut values = Vec::with_capacity((len - 1) * dim);
    for t in 0..len - 1 {
        for j in 0..dim {
            values.push(series.get(t + 1, j).ln() - series.get(t, j).ln());
        }
    }
    MTSeries::new(series.id(), len - 1, dim, values)
}

/// Rescales every component to zero mean and unit sample variance (divisor T−1).
pub fn standardize(series: &MTSeries) -> Result<MTSeries> {
    let (len, dim) = (series.len(), series.dim());
    let mut values = series.values().to_vec();
    for j in 0..dim {
        let col = series.column(j);
        let mean = col.iter().sum::<f64>() / len as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= f64::EPSILON * mean.abs() {
            return Err(Error::Domain(format!(
                "component j={} of series '{}' has zero variance",
                j + 1,
                series.id()
            )));
        }
        for t in 0..len {
            values[t * dim + j] = (col[t] - mean) / sd;
        }
    }
    MTSeries::new(series.id(), len, dim, values)
}
