//! Experiment histories and their JSON-lines files.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::error::{Error, Result};
use crate::priors::{Evaluation, TaskHistory};
use crate::space::Configuration;

/// One evaluation in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub strategy: Strategy,
    /// Position in the history, from 0.
    pub seq: usize,
    /// 0 for the initial design, then the optimizer iteration.
    pub iteration: usize,
    pub config: Configuration,
    pub fidelity: f64,
    /// `None` for a failed evaluation.
    pub metric: Option<f64>,
    /// Budget units charged.
    pub cost: f64,
    pub work: u64,
    /// Measured seconds; left out of files unless explicitly requested, so
    /// that reruns produce identical bytes.
    pub wall_time: Option<f64>,
    /// Cumulative budget consumed after this record.
    pub budget_after: f64,
}

impl HistoryRecord {
    /// The metric with failures as negative infinity.
    pub fn score(&self) -> f64 {
        self.metric.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_full_fidelity(&self) -> bool {
        self.fidelity == 1.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentHistory {
    pub records: Vec<HistoryRecord>,
}

impl ExperimentHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn consumed(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.budget_after)
    }

    pub fn total_wall_time(&self) -> f64 {
        self.records.iter().filter_map(|r| r.wall_time).sum()
    }

    pub fn total_work(&self) -> u64 {
        self.records.iter().map(|r| r.work).sum()
    }

    /// Running maximum of full-fidelity scores, one entry per record; `None`
    /// until the first full-fidelity observation.
    pub fn best_seen_trace(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.records
            .iter()
            .map(|r| {
                if r.is_full_fidelity() {
                    let s = r.score();
                    best = Some(best.map_or(s, |b| b.max(s)));
                }
                best
            })
            .collect()
    }

    /// Successful full-fidelity evaluations as a prior-learning input.
    pub fn to_task_history(&self, task: &str) -> TaskHistory {
        TaskHistory {
            task: task.to_string(),
            evaluations: self
                .records
                .iter()
                .filter(|r| r.is_full_fidelity())
                .filter_map(|r| {
                    r.metric.map(|metric| Evaluation {
                        config: r.config.clone(),
                        metric,
                    })
                })
                .collect(),
        }
    }

    /// The same history with measured times removed.
    pub fn without_wall_time(&self) -> Self {
        let mut out = self.clone();
        out.records.iter_mut().for_each(|r| r.wall_time = None);
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| {
                Error::Data(format!("{}:{}: {e}", path.display(), i + 1))
            })?);
        }
        Ok(Self { records })
    }
}

/// Appends records to a JSON-lines file as they arrive, flushing each.
pub struct HistoryWriter {
    out: BufWriter<File>,
    keep_wall_time: bool,
}

impl HistoryWriter {
    /// Creates (truncating) `path`.
    pub fn create(path: &Path, keep_wall_time: bool) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            keep_wall_time,
        })
    }

    /// Opens `path` for appending.
    pub fn append(path: &Path, keep_wall_time: bool) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: BufWriter::new(file),
            keep_wall_time,
        })
    }

    pub fn write(&mut self, record: &HistoryRecord) -> Result<()> {
        if self.keep_wall_time {
            serde_json::to_writer(&mut self.out, record)?;
        } else {
            let mut r = record.clone();
            r.wall_time = None;
            serde_json::to_writer(&mut self.out, &r)?;
        }
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}
