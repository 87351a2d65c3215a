//! Individual hyperparameter importances from a functional ANOVA of a
//! random-forest surrogate.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::child_rng;
use crate::space::{Configuration, SearchSpace};

pub const MIN_RECORDS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub config: Configuration,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap_fraction: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 64,
            max_depth: 64,
            min_leaf: 3,
            bootstrap_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub parameter: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// One entry per parameter, in the space's declared order.
    pub scores: Vec<Importance>,
    /// Variance fraction not attributed to any single parameter.
    pub residual: f64,
    pub degenerate: bool,
}

impl ImportanceReport {
    pub fn score(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.parameter == name).map(|s| s.score)
    }
}

/// Parameter names by descending score; ties keep declared order.
pub fn rank_parameters(report: &ImportanceReport) -> Vec<String> {
    let mut order: Vec<&Importance> = report.scores.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    order.into_iter().map(|s| s.parameter.clone()).collect()
}

#[derive(Debug, Clone, Copy)]
enum Axis {
    /// Ordered coordinate on `[0, 1]`.
    Ordered,
    /// Category index in `0..k`.
    Categorical(usize),
}

#[derive(Debug, Clone)]
enum Split {
    Threshold(f64),
    Category(usize),
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Branch {
        dim: usize,
        split: Split,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Leaf region: an interval per ordered axis, a category mask per
/// categorical axis.
#[derive(Debug, Clone)]
enum Extent {
    Interval(f64, f64),
    Categories(Vec<bool>),
}

impl Extent {
    fn measure(&self) -> f64 {
        match self {
            Extent::Interval(a, b) => b - a,
            Extent::Categories(m) => m.iter().filter(|x| **x).count() as f64 / m.len() as f64,
        }
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    axes: &'a [Axis],
    cfg: ForestConfig,
}

fn sum_sq(y: &[f64], idx: &[usize]) -> (f64, f64) {
    idx.iter().fold((0.0, 0.0), |(s, q), &i| (s + y[i], q + y[i] * y[i]))
}

impl TreeBuilder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        Node::Leaf(idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64)
    }

    fn build(&self, idx: Vec<usize>, depth: usize) -> Node {
        let n = idx.len();
        let min_leaf = self.cfg.min_leaf.max(1);
        if depth >= self.cfg.max_depth || n < 2 * min_leaf {
            return self.leaf(&idx);
        }
        let (total, total_sq) = sum_sq(self.y, &idx);
        let parent_sse = total_sq - total * total / n as f64;
        if parent_sse <= 1e-12 * (1.0 + total_sq) {
            return self.leaf(&idx);
        }
        // Best split maximizes S_L²/n_L + S_R²/n_R. Scores equal up to
        // round-off usually mean the same partition reached through different
        // axes; those are ranked by the width of the gap the threshold sits
        // in, which keeps the forest equivariant under axis permutations.
        let base = total * total / n as f64;
        let mut best: Option<(f64, f64, usize, Split)> = None;
        let better = |best: &Option<(f64, f64, usize, Split)>, score: f64, gap: f64| match best {
            None => true,
            Some((s, g, _, _)) => {
                let tol = 1e-10 * s.abs().max(1e-300);
                score > s + tol || ((score - s).abs() <= tol && gap > *g)
            }
        };
        for (dim, axis) in self.axes.iter().enumerate() {
            match axis {
                Axis::Ordered => {
                    let mut sorted = idx.clone();
                    sorted.sort_by(|&a, &b| self.x[a][dim].total_cmp(&self.x[b][dim]));
                    let mut left = 0.0;
                    for k in 0..n - 1 {
                        left += self.y[sorted[k]];
                        let (nl, nr) = (k + 1, n - k - 1);
                        let (a, b) = (self.x[sorted[k]][dim], self.x[sorted[k + 1]][dim]);
                        if nl < min_leaf || nr < min_leaf || a == b {
                            continue;
                        }
                        let right = total - left;
                        let score = left * left / nl as f64 + right * right / nr as f64;
                        if better(&best, score, b - a) {
                            best = Some((score, b - a, dim, Split::Threshold(0.5 * (a + b))));
                        }
                    }
                }
                Axis::Categorical(k) => {
                    let mut sums = vec![(0.0, 0usize); *k];
                    for &i in &idx {
                        let c = self.x[i][dim] as usize;
                        sums[c].0 += self.y[i];
                        sums[c].1 += 1;
                    }
                    for (c, &(s, cnt)) in sums.iter().enumerate() {
                        let (nl, nr) = (cnt, n - cnt);
                        if nl < min_leaf || nr < min_leaf {
                            continue;
                        }
                        let r = total - s;
                        let score = s * s / nl as f64 + r * r / nr as f64;
                        if better(&best, score, 0.0) {
                            best = Some((score, 0.0, dim, Split::Category(c)));
                        }
                    }
                }
            }
        }
        let Some((score, _, dim, split)) = best else {
            return self.leaf(&idx);
        };
        if score - base <= 1e-12 * parent_sse.max(1e-300) {
            return self.leaf(&idx);
        }
        let goes_left = |i: usize| match split {
            Split::Threshold(t) => self.x[i][dim] <= t,
            Split::Category(c) => self.x[i][dim] as usize == c,
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| goes_left(i));
        Node::Branch {
            dim,
            split,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }
}

fn collect_leaves(node: &Node, extents: &mut Vec<Extent>, out: &mut Vec<(Vec<Extent>, f64)>) {
    match node {
        Node::Leaf(v) => out.push((extents.clone(), *v)),
        Node::Branch {
            dim,
            split,
            left,
            right,
        } => {
            let saved = extents[*dim].clone();
            match (split, &saved) {
                (Split::Threshold(t), Extent::Interval(a, b)) => {
                    extents[*dim] = Extent::Interval(*a, t.clamp(*a, *b));
                    collect_leaves(left, extents, out);
                    extents[*dim] = Extent::Interval(t.clamp(*a, *b), *b);
                    collect_leaves(right, extents, out);
                }
                (Split::Category(c), Extent::Categories(mask)) => {
                    let mut only = vec![false; mask.len()];
                    only[*c] = mask[*c];
                    extents[*dim] = Extent::Categories(only);
                    collect_leaves(left, extents, out);
                    let mut rest = mask.clone();
                    rest[*c] = false;
                    extents[*dim] = Extent::Categories(rest);
                    collect_leaves(right, extents, out);
                }
                _ => unreachable!("split kind matches axis kind"),
            }
            extents[*dim] = saved;
        }
    }
}

/// Total variance and per-axis main-effect variances of a piecewise-constant
/// tree under the uniform measure on the domain.
fn tree_variances(root: &Node, axes: &[Axis]) -> (f64, Vec<f64>) {
    let mut initial: Vec<Extent> = axes
        .iter()
        .map(|a| match a {
            Axis::Ordered => Extent::Interval(0.0, 1.0),
            Axis::Categorical(k) => Extent::Categories(vec![true; *k]),
        })
        .collect();
    let mut leaves = Vec::new();
    collect_leaves(root, &mut initial, &mut leaves);
    let leaves: Vec<(Vec<Extent>, f64, f64)> = leaves
        .into_iter()
        .map(|(e, v)| {
            let vol = e.iter().map(Extent::measure).product::<f64>();
            (e, v, vol)
        })
        .filter(|(_, _, vol)| *vol > 0.0)
        .collect();
    let mean: f64 = leaves.iter().map(|(_, v, vol)| v * vol).sum();
    let total: f64 = leaves.iter().map(|(_, v, vol)| vol * (v - mean).powi(2)).sum();

    let mut main = vec![0.0; axes.len()];
    for (j, axis) in axes.iter().enumerate() {
        // Cells on axis j with their measure and a membership test.
        let cells: Vec<(f64, Box<dyn Fn(&Extent) -> bool>)> = match axis {
            Axis::Ordered => {
                let mut cuts: Vec<f64> = vec![0.0, 1.0];
                for (e, _, _) in &leaves {
                    if let Extent::Interval(a, b) = e[j] {
                        cuts.push(a);
                        cuts.push(b);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                cuts.windows(2)
                    .filter(|w| w[1] > w[0])
                    .map(|w| {
                        let mid = 0.5 * (w[0] + w[1]);
                        let test: Box<dyn Fn(&Extent) -> bool> = Box::new(move |e| match e {
                            Extent::Interval(a, b) => *a <= mid && mid < *b,
                            _ => false,
                        });
                        (w[1] - w[0], test)
                    })
                    .collect()
            }
            Axis::Categorical(k) => (0..*k)
                .map(|c| {
                    let test: Box<dyn Fn(&Extent) -> bool> = Box::new(move |e| match e {
                        Extent::Categories(m) => m[c],
                        _ => false,
                    });
                    (1.0 / *k as f64, test)
                })
                .collect(),
        };
        let mut var = 0.0;
        for (width, inside) in &cells {
            let marginal: f64 = leaves
                .iter()
                .filter(|(e, _, _)| inside(&e[j]))
                .map(|(e, v, vol)| v * vol / e[j].measure())
                .sum();
            var += width * (marginal - mean).powi(2);
        }
        main[j] = var;
    }
    (total, main)
}

pub fn compute_importances(
    records: &[EvaluationRecord],
    space: &SearchSpace,
    forest: ForestConfig,
    seed: u64,
) -> Result<ImportanceReport> {
    if records.len() < MIN_RECORDS {
        return Err(Error::InsufficientData(format!(
            "{} records, need at least {MIN_RECORDS}",
            records.len()
        )));
    }
    if forest.n_trees == 0 || !(forest.bootstrap_fraction > 0.0 && forest.bootstrap_fraction <= 1.0) {
        return Err(Error::InvalidArgument("forest needs n_trees >= 1 and a fraction in (0, 1]".into()));
    }
    if records.iter().any(|r| !r.metric.is_finite()) {
        return Err(Error::InvalidArgument("non-finite metric".into()));
    }
    let axes: Vec<Axis> = space
        .parameters()
        .iter()
        .map(|p| p.n_choices().map_or(Axis::Ordered, Axis::Categorical))
        .collect();
    let x: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let t = space.to_transformed(&r.config)?;
            let u = space.encode(&r.config)?;
            Ok(axes
                .iter()
                .enumerate()
                .map(|(j, a)| match a {
                    Axis::Ordered => u[j],
                    Axis::Categorical(_) => t[j],
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let y: Vec<f64> = records.iter().map(|r| r.metric).collect();
    let names: Vec<String> = space.parameters().iter().map(|p| p.name.clone()).collect();

    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return Ok(ImportanceReport {
            scores: names.into_iter().map(|parameter| Importance { parameter, score: 0.0 }).collect(),
            residual: 0.0,
            degenerate: true,
        });
    }

    let n = records.len();
    let draw = ((forest.bootstrap_fraction * n as f64).round() as usize).max(1);
    let per_tree: Vec<Option<Vec<f64>>> = (0..forest.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = child_rng(seed, "fanova-tree", t as u64);
            let idx: Vec<usize> = (0..draw).map(|_| rng.random_range(0..n)).collect();
            let builder = TreeBuilder {
                x: &x,
                y: &y,
                axes: &axes,
                cfg: forest,
            };
            let root = builder.build(idx, 0);
            let (total, main) = tree_variances(&root, &axes);
            (total > 0.0).then(|| main.into_iter().map(|v| v / total).collect())
        })
        .collect();
    let usable: Vec<&Vec<f64>> = per_tree.iter().flatten().collect();
    if usable.is_empty() {
        return Ok(ImportanceReport {
            scores: names.into_iter().map(|parameter| Importance { parameter, score: 0.0 }).collect(),
            residual: 0.0,
            degenerate: true,
        });
    }
    let mut scores = vec![0.0; axes.len()];
    for s in &usable {
        for (acc, v) in scores.iter_mut().zip(s.iter()) {
            *acc += v;
        }
    }
    for s in &mut scores {
        *s = (*s / usable.len() as f64).max(0.0);
    }
    let residual = (1.0 - scores.iter().sum::<f64>()).max(0.0);
    Ok(ImportanceReport {
        scores: names
            .into_iter()
            .zip(scores)
            .map(|(parameter, score)| Importance { parameter, score })
            .collect(),
        residual,
        degenerate: false,
    })
}
