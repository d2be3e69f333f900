//! Feature matrices scaled to the unit hypercube, plus CSV ingestion.
//!
//! Features are stored column-major: tree induction reads one column at a
//! time, while prediction reads single cells.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    columns: Vec<f64>,
    response: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Build from per-column vectors. Every entry must already lie in `[0, 1]`.
    pub fn from_columns(columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let p = columns.len();
        let n = response.len();
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidDataset(format!(
                "column {j} has {} rows but the response has {n}",
                c.len()
            )));
        }
        let flat = columns.into_iter().flatten().collect();
        Self::from_column_major(flat, n, p, response)
    }

    /// Build from row vectors. Every entry must already lie in `[0, 1]`.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDataset("ragged rows".into()));
        }
        if n != response.len() {
            return Err(Error::InvalidDataset(format!(
                "{n} feature rows but {} responses",
                response.len()
            )));
        }
        let mut flat = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                flat[j * n + i] = v;
            }
        }
        Self::from_column_major(flat, n, p, response)
    }

    /// Min-max scale raw row-major features into the unit hypercube.
    ///
    /// Constant columns map to 0.5. The returned scaler maps further rows
    /// (e.g. test points) with the same training statistics.
    pub fn scaled_from_row_major(
        raw: &[f64],
        p: usize,
        response: Vec<f64>,
    ) -> Result<(Self, ColumnScaler)> {
        if p == 0 || raw.len() % p != 0 {
            return Err(Error::InvalidDataset(format!(
                "{} values cannot form rows of {p} features",
                raw.len()
            )));
        }
        let n = raw.len() / p;
        let scaler = ColumnScaler::fit(raw, p)?;
        let mut flat = vec![0.0; n * p];
        for i in 0..n {
            for j in 0..p {
                flat[j * n + i] = scaler.scale(j, raw[i * p + j]).clamp(0.0, 1.0);
            }
        }
        Ok((Self::from_column_major(flat, n, p, response)?, scaler))
    }

    fn from_column_major(columns: Vec<f64>, n: usize, p: usize, response: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidDataset("need at least one feature".into()));
        }
        if response.len() != n || columns.len() != n * p {
            return Err(Error::InvalidDataset("feature rows and response length differ".into()));
        }
        if let Some(pos) = columns.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidDataset(format!(
                "feature value {} at row {}, column {} is outside [0, 1]",
                columns[pos],
                pos % n,
                pos / n
            )));
        }
        if response.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidDataset("response contains non-finite values".into()));
        }
        Ok(Self {
            n,
            p,
            columns,
            response,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} features",
                names.len(),
                self.p
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature * self.n + row]
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature * self.n..(feature + 1) * self.n]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.value(row, j)).collect()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Display name for a feature: its CSV header, or `X{j+1}`.
    pub fn feature_name(&self, feature: usize) -> String {
        match &self.feature_names {
            Some(names) => names[feature].clone(),
            None => format!("X{}", feature + 1),
        }
    }

    pub fn check_feature(&self, feature: usize) -> Result<()> {
        if feature >= self.p {
            return Err(Error::FeatureOutOfRange {
                index: feature,
                p: self.p,
            });
        }
        Ok(())
    }

    /// Same features, different response.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        if response.len() != self.n {
            return Err(Error::InvalidDataset(format!(
                "response has {} rows, dataset has {}",
                response.len(),
                self.n
            )));
        }
        if response.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidDataset("response contains non-finite values".into()));
        }
        Ok(Self {
            response,
            ..self.clone()
        })
    }

    /// The dataset with one feature removed (`X_{-j}`).
    pub fn without_feature(&self, feature: usize) -> Result<Self> {
        self.check_feature(feature)?;
        if self.p == 1 {
            return Err(Error::InvalidDataset(
                "cannot remove the only feature".into(),
            ));
        }
        let mut columns = Vec::with_capacity(self.n * (self.p - 1));
        for j in (0..self.p).filter(|&j| j != feature) {
            columns.extend_from_slice(self.column(j));
        }
        let feature_names = self.feature_names.as_ref().map(|names| {
            names
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != feature)
                .map(|(_, s)| s.clone())
                .collect()
        });
        Ok(Self {
            n: self.n,
            p: self.p - 1,
            columns,
            response: self.response.clone(),
            feature_names,
        })
    }

    /// Keep only the listed columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self> {
        let mut columns = Vec::with_capacity(self.n * features.len());
        for &j in features {
            self.check_feature(j)?;
            columns.extend_from_slice(self.column(j));
        }
        let mut out = Self::from_column_major(columns, self.n, features.len(), self.response.clone())?;
        if let Some(names) = &self.feature_names {
            out.feature_names = Some(features.iter().map(|&j| names[j].clone()).collect());
        }
        Ok(out)
    }

    /// Rows in the given order (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n) {
            return Err(Error::InvalidDataset(format!("row {bad} out of range")));
        }
        let m = rows.len();
        let mut columns = Vec::with_capacity(m * self.p);
        for j in 0..self.p {
            let col = self.column(j);
            columns.extend(rows.iter().map(|&r| col[r]));
        }
        let response = rows.iter().map(|&r| self.response[r]).collect();
        let mut out = Self::from_column_major(columns, m, self.p, response)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Replace a feature column. Values must lie in `[0, 1]`.
    pub fn with_feature_column(&self, feature: usize, values: &[f64]) -> Result<Self> {
        self.check_feature(feature)?;
        if values.len() != self.n {
            return Err(Error::InvalidDataset("replacement column has wrong length".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidDataset("replacement column leaves [0, 1]".into()));
        }
        let mut out = self.clone();
        out.columns[feature * self.n..(feature + 1) * self.n].copy_from_slice(values);
        Ok(out)
    }
}

/// Per-column min-max map learned from training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(raw: &[f64], p: usize) -> Result<Self> {
        let mut mins = vec![f64::INFINITY; p];
        let mut maxs = vec![f64::NEG_INFINITY; p];
        for (k, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidDataset(format!(
                    "non-finite feature value at row {}, column {}",
                    k / p,
                    k % p
                )));
            }
            let j = k % p;
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        Ok(Self { mins, ranges })
    }

    /// Scale one value of column `j`. Values outside the training range map
    /// outside `[0, 1]`; trees handle that fine.
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        if self.ranges[j] > 0.0 {
            (v - self.mins[j]) / self.ranges[j]
        } else {
            0.5
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.scale(j, v)).collect()
    }
}

/// Min-max scale a single vector into `[0, 1]` (constant → 0.5).
pub fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    values
        .iter()
        .map(|&v| if range > 0.0 { ((v - lo) / range).clamp(0.0, 1.0) } else { 0.5 })
        .collect()
}

/// A parsed CSV table: header names and string cells.
#[derive(Debug, Clone)]
pub struct CsvFrame {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvFrame {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = reader.headers()?.iter().map(str::to_owned).collect();
        let mut records = Vec::new();
        for rec in reader.records() {
            records.push(rec?.iter().map(str::to_owned).collect());
        }
        Ok(Self { headers, records })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidDataset(format!("column `{name}` not found in CSV header")))
    }

    fn numeric_column(&self, idx: usize) -> Result<Vec<f64>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                rec[idx].parse::<f64>().map_err(|_| {
                    Error::InvalidDataset(format!(
                        "row {} column `{}`: `{}` is not a number",
                        i + 1,
                        self.headers[idx],
                        rec[idx]
                    ))
                })
            })
            .collect()
    }

    pub fn string_column(&self, name: &str) -> Result<Vec<String>> {
        let idx = self.column_index(name)?;
        Ok(self.records.iter().map(|r| r[idx].clone()).collect())
    }

    /// Build a scaled dataset: `response` is the target, every other column
    /// not listed in `skip` is a feature.
    pub fn to_dataset(&self, response: &str, skip: &[&str]) -> Result<Dataset> {
        let ridx = self.column_index(response)?;
        for name in skip {
            self.column_index(name)?;
        }
        let feature_idx: Vec<usize> = (0..self.headers.len())
            .filter(|&k| k != ridx && !skip.contains(&self.headers[k].as_str()))
            .collect();
        if feature_idx.is_empty() {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        let y = self.numeric_column(ridx)?;
        let cols: Vec<Vec<f64>> = feature_idx
            .iter()
            .map(|&k| self.numeric_column(k))
            .collect::<Result<_>>()?;
        let n = y.len();
        let p = cols.len();
        let mut raw = vec![0.0; n * p];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                raw[i * p + j] = v;
            }
        }
        let (data, _) = Dataset::scaled_from_row_major(&raw, p, y)?;
        data.with_feature_names(feature_idx.iter().map(|&k| self.headers[k].clone()).collect())
    }
}
