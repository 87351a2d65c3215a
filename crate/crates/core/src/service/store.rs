//! Ranked suggestion records and their open → served → closed lifecycle.

use serde::{Deserialize, Serialize};

use crate::gp::{expected_improvement, Direction, GpModel};
use crate::space::{Configuration, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuggestionState {
    Open,
    Served,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionRecord {
    pub id: u64,
    pub config: Configuration,
    /// EI under model `model_version`; `None` for fallback samples.
    pub score: Option<f64>,
    pub model_version: u64,
    pub state: SuggestionState,
}

/// An immutable fitted model. Scores are comparable only within one
/// version.
#[derive(Debug)]
pub struct ModelSnapshot {
    pub version: u64,
    /// The space the model's unit coordinates refer to.
    pub space: SearchSpace,
    pub gp: GpModel,
    pub best_y: f64,
}

impl ModelSnapshot {
    /// EI of `config`, or `None` when it cannot be placed in this model's
    /// coordinates.
    pub fn score(&self, config: &Configuration) -> Option<f64> {
        let v = self.space.encode(config).ok()?;
        expected_improvement(&self.gp, &v, self.best_y, Direction::Max).ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Store {
    /// Every record in creation order.
    pub records: Vec<SuggestionRecord>,
    pub next_id: u64,
    /// Next index into the fallback sampler.
    pub fallback_next: u32,
    pub model_version: u64,
}

impl Store {
    pub fn push(&mut self, config: Configuration, score: Option<f64>, model_version: u64) -> usize {
        self.records.push(SuggestionRecord {
            id: self.next_id,
            config,
            score,
            model_version,
            state: SuggestionState::Open,
        });
        self.next_id += 1;
        self.records.len() - 1
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut SuggestionRecord> {
        self.records.iter_mut().find(|r| r.id == id)
    }

    pub fn open_count(&self) -> usize {
        self.records.iter().filter(|r| r.state == SuggestionState::Open).count()
    }

    /// Re-scores open records under `snapshot` and returns the index of the
    /// best; scored records beat unscored ones and ties go to the earliest.
    /// Without a snapshot the earliest open record wins.
    pub fn rank_open(&mut self, snapshot: Option<&ModelSnapshot>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.records.iter_mut().enumerate() {
            if r.state != SuggestionState::Open {
                continue;
            }
            let key = match snapshot {
                Some(s) => {
                    r.score = s.score(&r.config);
                    r.model_version = s.version;
                    r.score.unwrap_or(f64::NEG_INFINITY)
                }
                None => 0.0,
            };
            if best.is_none_or(|(_, b)| key > b) {
                best = Some((i, key));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Drops every open record and adds `fresh` in its place.
    pub fn replace_open(&mut self, fresh: Vec<(Configuration, f64)>, model_version: u64) {
        self.records.retain(|r| r.state != SuggestionState::Open);
        for (config, score) in fresh {
            self.push(config, Some(score), model_version);
        }
    }

    /// Closes open records that `space` does not contain; returns how many.
    pub fn close_outside(&mut self, space: &SearchSpace) -> usize {
        let mut n = 0;
        for r in &mut self.records {
            if r.state == SuggestionState::Open && !space.contains(&r.config) {
                r.state = SuggestionState::Closed;
                n += 1;
            }
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Value;

    fn config(x: f64) -> Configuration {
        let mut c = Configuration::default();
        c.insert("x", Value::Float(x));
        c
    }

    #[test]
    fn unscored_store_serves_in_order() {
        let mut s = Store::default();
        for x in [0.1, 0.2, 0.3] {
            s.push(config(x), None, 0);
        }
        assert_eq!(s.rank_open(None), Some(0));
        s.records[0].state = SuggestionState::Served;
        assert_eq!(s.rank_open(None), Some(1));
        s.records[1].state = SuggestionState::Closed;
        s.records[2].state = SuggestionState::Served;
        assert_eq!(s.rank_open(None), None);
    }

    #[test]
    fn replace_keeps_served_and_closed() {
        let mut s = Store::default();
        for x in [0.1, 0.2, 0.3] {
            s.push(config(x), None, 0);
        }
        s.records[0].state = SuggestionState::Served;
        s.records[1].state = SuggestionState::Closed;
        s.replace_open(vec![(config(0.5), 0.2), (config(0.6), 0.1)], 3);
        let ids: Vec<u64> = s.records.iter().map(|r| r.id).collect();
        assert_eq!(ids, [0, 1, 3, 4]);
        assert_eq!(s.open_count(), 2);
        assert!(s.records[2..].iter().all(|r| r.model_version == 3));
    }
}
