//! Seeded two-class synthetic tasks and the registry of bundled ones.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{child_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Gaussian clusters labelled by a nonlinear score thresholded near the
    /// median.
    Mixture,
    Moons,
    Circles,
    Xor,
    Spiral,
    /// Each class is its own set of Gaussian blobs.
    Blobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub p: usize,
    /// Fraction of each class whose label is flipped.
    pub noise: f64,
    pub seed: u64,
    pub shape: Shape,
}

impl SyntheticSpec {
    pub fn new(m: usize, p: usize, noise: f64, seed: u64) -> Self {
        Self {
            m,
            p,
            noise,
            seed,
            shape: Shape::Mixture,
        }
    }

    pub fn with_shape(self, shape: Shape) -> Self {
        Self { shape, ..self }
    }
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Generates a dataset with `m` rows and `p` features. The class ratio lies
/// in `[0.4, 0.6]`; exactly `round(noise·n_c)` labels of each class `c` are
/// flipped.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.m < 50 || spec.p < 2 {
        return Err(Error::InvalidArgument(format!(
            "synthetic tasks need m >= 50 and p >= 2, got m = {}, p = {}",
            spec.m, spec.p
        )));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::InvalidArgument(format!("noise must be in [0, 1], got {}", spec.noise)));
    }
    let mut rng = child_rng(spec.seed, "synthetic", 0);
    let (mut rows, mut labels) = match spec.shape {
        Shape::Mixture => mixture(spec, &mut rng),
        Shape::Blobs => blobs(spec, &mut rng),
        shape => planar(spec, shape, &mut rng),
    };
    let mut flipped = Vec::new();
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..spec.m).filter(|&i| labels[i] == class).collect();
        let flips = (spec.noise * members.len() as f64).round() as usize;
        members.shuffle(&mut rng);
        flipped.extend_from_slice(&members[..flips]);
    }
    for i in flipped {
        labels[i] = 1 - labels[i];
    }
    for row in &mut rows {
        for v in row.iter_mut() {
            // Six significant digits keep task files compact and exact.
            *v = format!("{v:.6e}").parse().expect("formatted float parses");
        }
    }
    let names = (0..spec.p).map(|j| format!("x{j}")).collect();
    let name = format!("synthetic-{:?}-{}x{}-{}", spec.shape, spec.m, spec.p, spec.seed).to_lowercase();
    Dataset::new(name, names, rows, labels, spec.seed)
}

fn mixture(spec: &SyntheticSpec, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    let (m, p) = (spec.m, spec.p);
    let k = 3 + p / 2;
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| 1.5 * normal(rng)).collect()).collect();
    let spreads: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.0)).collect();
    let mut w: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    let freq = rng.random_range(1.0..1.6);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let c = rng.random_range(0..k);
            (0..p).map(|j| centers[c][j] + spreads[c] * normal(rng)).collect()
        })
        .collect();
    let score: Vec<f64> = rows
        .iter()
        .map(|x| {
            let lin: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            lin + 0.8 * (freq * x[0]).sin() + 0.4 * x[1] * x[2 % p]
        })
        .collect();
    let share: f64 = rng.random_range(0.42..0.48);
    let mirrored: bool = rng.random();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let cut = (share * m as f64).round() as usize;
    let mut labels = vec![0u8; m];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = u8::from((rank < cut) == mirrored);
    }
    (rows, labels)
}

fn blobs(spec: &SyntheticSpec, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    let p = spec.p;
    let centers: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|_| (0..3).map(|_| (0..p).map(|_| 1.2 * normal(rng)).collect()).collect())
        .collect();
    let labels: Vec<u8> = (0..spec.m).map(|i| (i % 2) as u8).collect();
    let rows = labels
        .iter()
        .map(|&l| {
            let c = &centers[l as usize][rng.random_range(0..3)];
            c.iter().map(|v| v + 0.8 * normal(rng)).collect()
        })
        .collect();
    (rows, labels)
}

/// Two informative coordinates carrying a planar pattern; the remaining
/// `p - 2` coordinates are standard-normal distractors.
fn planar(spec: &SyntheticSpec, shape: Shape, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    let labels: Vec<u8> = (0..spec.m).map(|i| (i % 2) as u8).collect();
    let rows = labels
        .iter()
        .map(|&l| {
            let (a, b) = match shape {
                Shape::Moons => {
                    let t = rng.random_range(0.0..PI);
                    if l == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    }
                }
                Shape::Circles => {
                    let t = rng.random_range(0.0..2.0 * PI);
                    let r = if l == 0 { 1.0 } else { 0.55 };
                    (r * t.cos(), r * t.sin())
                }
                Shape::Xor => {
                    let a: f64 = rng.random_range(0.05..1.0);
                    let b: f64 = rng.random_range(0.05..1.0);
                    let flip = if rng.random() { -1.0 } else { 1.0 };
                    let sign_b = if l == 0 { flip } else { -flip };
                    (flip * a, sign_b * b)
                }
                Shape::Spiral => {
                    let t = rng.random_range(0.25..1.0f64).sqrt() * 3.0 * PI;
                    let r = t / (3.0 * PI);
                    let phase = if l == 0 { 0.0 } else { PI };
                    (r * (t + phase).cos(), r * (t + phase).sin())
                }
                Shape::Mixture | Shape::Blobs => unreachable!("handled by dedicated generators"),
            };
            let jitter = match shape {
                Shape::Spiral => 0.04,
                Shape::Xor => 0.05,
                _ => 0.12,
            };
            let mut row = vec![a + jitter * normal(rng), b + jitter * normal(rng)];
            row.extend((2..spec.p).map(|_| normal(rng)));
            row
        })
        .collect();
    (rows, labels)
}
