//! Binary-classification datasets: CSV ingestion, the stratified
//! train/validation split and data-fraction subsampling.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::child_rng;

/// Fraction of each class held out for validation.
pub const VALID_FRACTION: f64 = 0.3;

/// Largest share one class may hold.
pub const MAX_CLASS_SHARE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<u8>,
    train: Vec<usize>,
    valid: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from row-major features and 0/1 labels, splitting it
    /// 70/30 per class with a seeded shuffle.
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        seed: u64,
    ) -> Result<Self> {
        let p = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Data(format!("row {i} has {} features, expected {p}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} holds non-finite value {v}")));
            }
            features.extend_from_slice(row);
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {l} is not binary")));
        }
        let (train, valid) = stratified_split(&labels, VALID_FRACTION, seed)?;
        Ok(Self {
            name: name.into(),
            feature_names,
            features,
            labels,
            train,
            valid,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.features[i * p..(i + 1) * p]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features() + j]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn valid_indices(&self) -> &[usize] {
        &self.valid
    }

    /// Share of class 1 among `indices`.
    pub fn positive_rate(&self, indices: &[usize]) -> f64 {
        let pos = indices.iter().filter(|&&i| self.labels[i] == 1).count();
        pos as f64 / indices.len() as f64
    }

    /// Keeps `⌈r·n⌉` of the `n` training rows, allocated across classes in
    /// proportion to their counts. The validation rows are untouched.
    pub fn subsample(&self, r: f64, seed: u64) -> Result<Dataset> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidArgument(format!("fidelity must be in (0, 1], got {r}")));
        }
        if r == 1.0 {
            return Ok(self.clone());
        }
        let n = self.train.len();
        let target = ((r * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let by_class = self.split_by_class(&self.train);
        let quotas = proportional_quotas(&[by_class[0].len(), by_class[1].len()], target);
        let mut kept = Vec::with_capacity(target);
        for (class, (mut rows, quota)) in by_class.into_iter().zip(quotas).enumerate() {
            if quota == 0 {
                return Err(Error::Data(format!(
                    "fidelity {r} leaves no class-{class} rows in `{}`",
                    self.name
                )));
            }
            rows.shuffle(&mut child_rng(seed, "fidelity", class as u64));
            kept.extend_from_slice(&rows[..quota]);
        }
        kept.sort_unstable();
        let mut out = self.clone();
        out.train = kept;
        Ok(out)
    }

    fn split_by_class(&self, indices: &[usize]) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for &i in indices {
            out[self.labels[i] as usize].push(i);
        }
        out
    }

    /// Writes features and a trailing `label` column.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a headed CSV. Columns whose cells all parse as numbers are used
    /// as is; columns with no numeric cell are integer-encoded by sorted
    /// label. The label column must hold exactly two distinct values, which
    /// map to 0 and 1 in numeric (else lexical) order.
    pub fn load_csv(path: &Path, label_column: &str, seed: u64) -> Result<Dataset> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let label_idx = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::Data(format!("no column named `{label_column}`")))?;
        let mut cells: Vec<Vec<String>> = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            cells.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        if cells.is_empty() {
            return Err(Error::Data(format!("{} has no data rows", path.display())));
        }
        let n = cells.len();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut names = Vec::new();
        for (j, name) in headers.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let raw: Vec<&str> = cells.iter().map(|r| r[j].as_str()).collect();
            columns.push(encode_column(name, &raw)?);
            names.push(name.clone());
        }
        let raw_labels: Vec<&str> = cells.iter().map(|r| r[label_idx].as_str()).collect();
        let labels = encode_labels(&raw_labels)?;
        let rows = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let share = labels.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
        if share.max(1.0 - share) > MAX_CLASS_SHARE {
            return Err(Error::Data(format!(
                "class balance {share:.3} outside [{:.1}, {:.1}]",
                1.0 - MAX_CLASS_SHARE,
                MAX_CLASS_SHARE
            )));
        }
        Dataset::new(name, names, rows, labels, seed)
    }
}

fn encode_column(name: &str, raw: &[&str]) -> Result<Vec<f64>> {
    if let Some(i) = raw.iter().position(|c| c.is_empty()) {
        return Err(Error::Data(format!("column `{name}` row {i} is empty")));
    }
    let parsed: Vec<Option<f64>> = raw
        .iter()
        .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let numeric = parsed.iter().filter(|v| v.is_some()).count();
    if numeric == raw.len() {
        return Ok(parsed.into_iter().flatten().collect());
    }
    if numeric > 0 {
        let i = parsed.iter().position(Option::is_none).unwrap_or(0);
        return Err(Error::Data(format!(
            "column `{name}` row {i}: cannot parse `{}` as a number",
            raw[i]
        )));
    }
    let levels: Vec<&str> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    Ok(raw
        .iter()
        .map(|c| levels.binary_search(c).unwrap_or_default() as f64)
        .collect())
}

fn encode_labels(raw: &[&str]) -> Result<Vec<u8>> {
    let mut distinct: Vec<&str> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.len() != 2 {
        return Err(Error::Data(format!(
            "label column needs exactly 2 classes, found {}",
            distinct.len()
        )));
    }
    if let (Ok(a), Ok(b)) = (distinct[0].parse::<f64>(), distinct[1].parse::<f64>()) {
        if b < a {
            distinct.swap(0, 1);
        }
    }
    Ok(raw.iter().map(|c| u8::from(*c == distinct[1])).collect())
}

/// Splits indices per class; each class sends `round(fraction·count)` rows,
/// at least one and never all, to validation.
fn stratified_split(labels: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for class in 0..2u8 {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < 2 {
            return Err(Error::Data(format!(
                "class {class} has {} rows; both classes need 2 or more",
                rows.len()
            )));
        }
        rows.shuffle(&mut child_rng(seed, "split", u64::from(class)));
        let n_valid = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        valid.extend_from_slice(&rows[..n_valid]);
        train.extend_from_slice(&rows[n_valid..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

/// Splits `total` across groups in proportion to `counts` by largest
/// remainder, ties to the earlier group.
fn proportional_quotas(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let exact: Vec<f64> = counts.iter().map(|&c| total as f64 * c as f64 / n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut left = total - quotas.iter().sum::<usize>();
    for &g in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quotas[g] < counts[g] {
            quotas[g] += 1;
            left -= 1;
        }
    }
    quotas
}
