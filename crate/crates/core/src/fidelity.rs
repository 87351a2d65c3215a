//! Similarity between a low-fidelity sweep and the full-fidelity sweep over
//! the same configurations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Min–max normalization of one list. A constant list maps to all ones.
pub fn normalize(y: &[f64]) -> Vec<f64> {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi == lo {
        return vec![1.0; y.len()];
    }
    y.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < min_len {
        return Err(Error::InsufficientData(format!("need at least {min_len} values")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite metric".into()));
    }
    Ok(())
}

pub fn correlation_score(y0: &[f64], y1: &[f64]) -> Result<f64> {
    check_pair(y0, y1, 2)?;
    let n = y0.len() as f64;
    let m0 = y0.iter().sum::<f64>() / n;
    let m1 = y1.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y0.iter().zip(y1) {
        let (da, db) = (a - m0, b - m1);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Indices of the top ⌈m/10⌉ values, lower index first among ties.
pub fn top_decile(y: &[f64]) -> Vec<usize> {
    let k = y.len().div_ceil(10);
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    idx.truncate(k);
    idx
}

fn mean_normalized_over(top_of: &[f64], scored: &[f64]) -> f64 {
    let norm = normalize(scored);
    let top = top_decile(top_of);
    top.iter().map(|&i| norm[i]).sum::<f64>() / top.len() as f64
}

/// Mean normalized `y1` over the top decile of `y0`.
pub fn precision_score(y0: &[f64], y1: &[f64]) -> Result<f64> {
    check_pair(y0, y1, 1)?;
    Ok(mean_normalized_over(y0, y1))
}

/// Mean normalized `y0` over the top decile of `y1`.
pub fn recall_score(y0: &[f64], y1: &[f64]) -> Result<f64> {
    check_pair(y0, y1, 1)?;
    Ok(mean_normalized_over(y1, y0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub fidelity: f64,
    pub correlation: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Metrics of one configuration list at several fidelities; every list is
/// aligned by configuration index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySweep {
    pub levels: Vec<(f64, Vec<f64>)>,
}

impl FidelitySweep {
    /// Builds a sweep from `(config id, fidelity, metric)` rows. Every
    /// fidelity must cover the same configuration ids.
    pub fn from_rows(rows: &[(String, f64, f64)]) -> Result<Self> {
        let mut ids: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut fids: Vec<f64> = rows.iter().map(|r| r.1).collect();
        fids.sort_by(f64::total_cmp);
        fids.dedup();
        let mut levels = Vec::new();
        for f in fids {
            let mut vals = vec![None; ids.len()];
            for (id, fr, m) in rows.iter().filter(|r| r.1 == f) {
                let i = ids.binary_search(&id.as_str()).expect("id collected above");
                if vals[i].replace(*m).is_some() {
                    return Err(Error::Data(format!("duplicate row for `{id}` at fidelity {fr}")));
                }
            }
            let vals: Option<Vec<f64>> = vals.into_iter().collect();
            levels.push((
                f,
                vals.ok_or_else(|| Error::Data(format!("fidelity {f} does not cover every config")))?,
            ));
        }
        Ok(Self { levels })
    }
}

/// One row per fidelity below 1 comparing it against the full-fidelity list.
pub fn score_table(sweep: &FidelitySweep) -> Result<Vec<ScoreRow>> {
    let full = sweep
        .levels
        .iter()
        .find(|(f, _)| *f == 1.0)
        .map(|(_, y)| y)
        .ok_or(Error::MissingFullFidelity)?;
    sweep
        .levels
        .iter()
        .filter(|(f, _)| *f != 1.0)
        .map(|(f, y)| {
            Ok(ScoreRow {
                fidelity: *f,
                correlation: correlation_score(y, full)?,
                precision: precision_score(y, full)?,
                recall: recall_score(y, full)?,
            })
        })
        .collect()
}
