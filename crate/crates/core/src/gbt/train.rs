//! Second-order boosting of regression trees on the logistic loss.
//!
//! Trees are grown level by level with an exact greedy split search: every
//! node keeps its rows presorted by each feature, so one scan per feature
//! finds the best threshold.

use std::sync::Once;
use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::child_rng;
use crate::space::Configuration;

/// Smallest denominator used for a leaf weight, so saturated leaves stay finite.
const MIN_LEAF_HESSIAN: f64 = 1e-6;

/// Parameters accepted for search-space compatibility that the trainer ignores.
pub const IGNORED_PARAMETERS: [&str; 5] = ["max_delta_step", "alpha", "tree_method", "max_bin", "grow_policy"];

static IGNORED_NOTICE: Once = Once::new();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtHyperparams {
    pub eta: f64,
    pub max_depth: usize,
    pub num_boost_round: usize,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub subsample: f64,
}

impl Default for GbtHyperparams {
    fn default() -> Self {
        Self {
            eta: 0.3,
            max_depth: 6,
            num_boost_round: 100,
            gamma: 0.0,
            min_child_weight: 1.0,
            lambda: 1.0,
            subsample: 1.0,
        }
    }
}

impl GbtHyperparams {
    /// Reads hyperparameters from a configuration; absent ones keep their
    /// defaults.
    pub fn from_config(config: &Configuration) -> Result<Self> {
        let mut hp = Self::default();
        let num = |name: &str| config.get_f64(name);
        if let Some(v) = num("eta") {
            hp.eta = v;
        }
        if let Some(v) = num("max_depth") {
            hp.max_depth = v as usize;
        }
        if let Some(v) = num("num_boost_round") {
            hp.num_boost_round = v as usize;
        }
        if let Some(v) = num("gamma") {
            hp.gamma = v;
        }
        if let Some(v) = num("min_child_weight") {
            hp.min_child_weight = v;
        }
        if let Some(v) = num("lambda") {
            hp.lambda = v;
        }
        if let Some(v) = num("subsample") {
            hp.subsample = v;
        }
        if IGNORED_PARAMETERS.iter().any(|p| config.get(p).is_some()) {
            IGNORED_NOTICE.call_once(|| {
                log::info!(
                    "the trainer ignores {}; they stay in the space for sampling only",
                    IGNORED_PARAMETERS.join(", ")
                );
            });
        }
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &str, v: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid_param(name, format!("value {v} is out of range")))
            }
        };
        check(self.eta.is_finite() && self.eta >= 0.0, "eta", self.eta)?;
        check(self.max_depth >= 1, "max_depth", self.max_depth as f64)?;
        check(self.num_boost_round >= 1, "num_boost_round", self.num_boost_round as f64)?;
        check(self.gamma.is_finite() && self.gamma >= 0.0, "gamma", self.gamma)?;
        check(
            self.min_child_weight.is_finite() && self.min_child_weight >= 0.0,
            "min_child_weight",
            self.min_child_weight,
        )?;
        check(self.lambda.is_finite() && self.lambda >= 0.0, "lambda", self.lambda)?;
        check(self.subsample > 0.0 && self.subsample <= 1.0, "subsample", self.subsample)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStopConfig {
    pub patience: usize,
    pub enabled: bool,
}

impl EarlyStopConfig {
    pub const DEFAULT_PATIENCE: usize = 10;

    pub fn disabled() -> Self {
        Self {
            patience: Self::DEFAULT_PATIENCE,
            enabled: false,
        }
    }

    pub fn with_patience(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(Error::InvalidArgument("patience must be >= 1".into()));
        }
        Ok(Self {
            patience,
            enabled: true,
        })
    }
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// A regression tree; node 0 is the root. Rows with `x[feature] < threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
                Node::Leaf(v) => return v,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf(_) => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub base_margin: f64,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.margin(x) > 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: Ensemble,
    /// `curve[t]` is the validation accuracy after `t` rounds; `curve[0]`
    /// belongs to the constant base model.
    pub curve: Vec<f64>,
    pub rounds_used: usize,
    pub wall_time: f64,
    /// Row-feature visits during split search, a machine-independent cost.
    pub work: u64,
}

impl TrainResult {
    pub fn accuracy(&self) -> f64 {
        self.curve[self.rounds_used]
    }
}

pub fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

/// Logistic loss `ln(1 + e^m) - y·m` of margin `m`.
pub fn logistic_loss(m: f64, y: f64) -> f64 {
    let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
    softplus - y * m
}

/// First and second derivative of [`logistic_loss`] in the margin.
pub fn logistic_grad_hess(m: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(m);
    (p - y, p * (1.0 - p))
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    hp: &'a GbtHyperparams,
    goes_left: Vec<bool>,
    work: u64,
}

struct Pending {
    node: usize,
    depth: usize,
    sorted: Vec<Vec<u32>>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -self.hp.eta * g / (h + self.hp.lambda).max(MIN_LEAF_HESSIAN)
    }

    fn find_split(&mut self, sorted: &[Vec<u32>], g: f64, h: f64) -> Option<BestSplit> {
        let lambda = self.hp.lambda;
        let mcw = self.hp.min_child_weight;
        let parent = g * g / (h + lambda).max(MIN_LEAF_HESSIAN);
        let mut best: Option<BestSplit> = None;
        for (f, rows) in sorted.iter().enumerate() {
            let col = &self.columns[f];
            self.work += rows.len() as u64;
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..rows.len().saturating_sub(1) {
                let r = rows[k] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                let (a, b) = (col[r], col[rows[k + 1] as usize]);
                if a >= b {
                    continue;
                }
                let hr = h - hl;
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gr = g - gl;
                let gain = 0.5
                    * (gl * gl / (hl + lambda).max(MIN_LEAF_HESSIAN) + gr * gr / (hr + lambda).max(MIN_LEAF_HESSIAN)
                        - parent)
                    - self.hp.gamma;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = a + 0.5 * (b - a);
                    let threshold = if mid > a { mid } else { b };
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, sorted: Vec<Vec<u32>>) -> Tree {
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut level = vec![Pending {
            node: 0,
            depth: 0,
            sorted,
        }];
        while !level.is_empty() {
            let mut next = Vec::new();
            for p in level {
                let (g, h) = p.sorted[0].iter().fold((0.0, 0.0), |(g, h), &r| {
                    (g + self.grad[r as usize], h + self.hess[r as usize])
                });
                let split = if p.depth < self.hp.max_depth && p.sorted[0].len() > 1 {
                    self.find_split(&p.sorted, g, h)
                } else {
                    None
                };
                let Some(s) = split else {
                    nodes[p.node] = Node::Leaf(self.leaf_weight(g, h));
                    continue;
                };
                let col = &self.columns[s.feature];
                for &r in &p.sorted[0] {
                    self.goes_left[r as usize] = col[r as usize] < s.threshold;
                }
                let mut left_lists = Vec::with_capacity(p.sorted.len());
                let mut right_lists = Vec::with_capacity(p.sorted.len());
                for rows in p.sorted {
                    let (l, r): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(|&r| self.goes_left[r as usize]);
                    left_lists.push(l);
                    right_lists.push(r);
                }
                let left = nodes.len();
                nodes.push(Node::Leaf(0.0));
                nodes.push(Node::Leaf(0.0));
                nodes[p.node] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                next.push(Pending {
                    node: left,
                    depth: p.depth + 1,
                    sorted: left_lists,
                });
                next.push(Pending {
                    node: left + 1,
                    depth: p.depth + 1,
                    sorted: right_lists,
                });
            }
            level = next;
        }
        Tree { nodes }
    }
}

fn accuracy(margins: &[f64], labels: &[u8]) -> f64 {
    let hits = margins
        .iter()
        .zip(labels)
        .filter(|(m, y)| u8::from(**m > 0.0) == **y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Trains on the dataset's training rows and scores every round on its
/// validation rows. With early stopping enabled, training halts once
/// `patience` rounds pass without a strict improvement over the best
/// validation accuracy so far (the base model included); the model keeps
/// every round it trained.
pub fn train(data: &Dataset, hp: &GbtHyperparams, early_stop: EarlyStopConfig, seed: u64) -> Result<TrainResult> {
    let start = Instant::now();
    hp.validate()?;
    if early_stop.enabled && early_stop.patience == 0 {
        return Err(Error::InvalidArgument("patience must be >= 1".into()));
    }
    let train_rows = data.train_indices();
    let valid_rows = data.valid_indices();
    let y: Vec<u8> = train_rows.iter().map(|&i| data.labels()[i]).collect();
    let yv: Vec<u8> = valid_rows.iter().map(|&i| data.labels()[i]).collect();
    let n = y.len();
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Degenerate(format!(
            "training rows of `{}` hold a single class",
            data.name
        )));
    }
    let p = data.n_features();
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|j| train_rows.iter().map(|&i| data.value(i, j)).collect())
        .collect();
    let presorted: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            order
        })
        .collect();

    let rate = positives as f64 / n as f64;
    let base_margin = (rate / (1.0 - rate)).ln();
    let mut margin = vec![base_margin; n];
    let mut valid_margin = vec![base_margin; yv.len()];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(hp.num_boost_round);
    let mut curve = Vec::with_capacity(hp.num_boost_round + 1);
    curve.push(accuracy(&valid_margin, &yv));
    let (mut best, mut best_round) = (curve[0], 0usize);
    let mut work = 0u64;
    let mut in_sample = vec![true; n];
    let sample_size = ((hp.subsample * n as f64).ceil() as usize).clamp(1, n);

    for round in 1..=hp.num_boost_round {
        for i in 0..n {
            let (g, h) = logistic_grad_hess(margin[i], f64::from(y[i]));
            grad[i] = g;
            hess[i] = h;
        }
        let sorted = if sample_size < n {
            in_sample.iter_mut().for_each(|s| *s = false);
            let mut rng = child_rng(seed, "gbt-rows", round as u64);
            for i in sample(&mut rng, n, sample_size) {
                in_sample[i] = true;
            }
            presorted
                .iter()
                .map(|o| o.iter().copied().filter(|&r| in_sample[r as usize]).collect())
                .collect()
        } else {
            presorted.clone()
        };
        let mut builder = TreeBuilder {
            columns: &columns,
            grad: &grad,
            hess: &hess,
            hp,
            goes_left: vec![false; n],
            work: 0,
        };
        let tree = builder.build(sorted);
        work += builder.work;
        let mut x = vec![0.0; p];
        for (i, m) in margin.iter_mut().enumerate() {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj = columns[j][i];
            }
            *m += tree.predict(&x);
        }
        for (m, &i) in valid_margin.iter_mut().zip(valid_rows) {
            *m += tree.predict(data.row(i));
        }
        trees.push(tree);
        let acc = accuracy(&valid_margin, &yv);
        curve.push(acc);
        if acc > best {
            best = acc;
            best_round = round;
        }
        if early_stop.enabled && round - best_round >= early_stop.patience {
            break;
        }
    }

    let rounds_used = trees.len();
    Ok(TrainResult {
        model: Ensemble { base_margin, trees },
        curve,
        rounds_used,
        wall_time: start.elapsed().as_secs_f64(),
        work,
    })
}
