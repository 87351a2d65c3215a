use std::path::Path;

use super::data::Dataset;
use super::synthetic::{make_synthetic, Shape, SyntheticSpec};
use crate::error::{Error, Result};

/// Seed used for the train/validation split of CSV tasks.
const CSV_SPLIT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy)]
pub struct TaskInfo {
    pub name: &'static str,
    pub spec: SyntheticSpec,
    /// `train` tasks feed prior learning; `eval` tasks are held out.
    pub role: &'static str,
}

const fn task(name: &'static str, role: &'static str, m: usize, p: usize, noise: f64, seed: u64, shape: Shape) -> TaskInfo {
    TaskInfo {
        name,
        spec: SyntheticSpec {
            m,
            p,
            noise,
            seed,
            shape,
        },
        role,
    }
}

pub const BUNDLED_TASKS: [TaskInfo; 25] = [
    task("train-01", "train", 500, 4, 0.05, 101, Shape::Mixture),
    task("train-02", "train", 600, 6, 0.08, 102, Shape::Mixture),
    task("train-03", "train", 400, 3, 0.02, 103, Shape::Mixture),
    task("train-04", "train", 700, 8, 0.10, 104, Shape::Mixture),
    task("train-05", "train", 500, 5, 0.04, 105, Shape::Mixture),
    task("train-06", "train", 600, 2, 0.06, 106, Shape::Mixture),
    task("train-07", "train", 500, 4, 0.05, 107, Shape::Moons),
    task("train-08", "train", 600, 5, 0.08, 108, Shape::Circles),
    task("train-09", "train", 500, 3, 0.03, 109, Shape::Xor),
    task("train-10", "train", 600, 4, 0.05, 110, Shape::Spiral),
    task("train-11", "train", 500, 6, 0.10, 111, Shape::Blobs),
    task("train-12", "train", 800, 7, 0.07, 112, Shape::Mixture),
    task("train-13", "train", 450, 4, 0.12, 113, Shape::Moons),
    task("train-14", "train", 650, 3, 0.04, 114, Shape::Spiral),
    task("train-15", "train", 550, 5, 0.06, 115, Shape::Xor),
    task("train-16", "train", 700, 4, 0.09, 116, Shape::Circles),
    task("train-17", "train", 600, 6, 0.05, 117, Shape::Blobs),
    task("moons", "eval", 800, 4, 0.06, 201, Shape::Moons),
    task("circles", "eval", 800, 4, 0.06, 202, Shape::Circles),
    task("xor", "eval", 800, 4, 0.05, 203, Shape::Xor),
    task("spiral", "eval", 800, 4, 0.04, 204, Shape::Spiral),
    task("blobs", "eval", 800, 6, 0.08, 205, Shape::Blobs),
    task("large-a", "eval", 3000, 6, 0.06, 301, Shape::Mixture),
    task("large-b", "eval", 3000, 5, 0.06, 302, Shape::Spiral),
    task("large-c", "eval", 2400, 6, 0.08, 303, Shape::Blobs),
];

pub fn bundled_task_names() -> Vec<&'static str> {
    BUNDLED_TASKS.iter().map(|t| t.name).collect()
}

pub fn bundled_task(name: &str) -> Result<Dataset> {
    let info = BUNDLED_TASKS
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("no bundled task named `{name}`")))?;
    let mut d = make_synthetic(&info.spec)?;
    d.name = info.name.to_string();
    Ok(d)
}

/// Resolves `synthetic:<name>` to a bundled task and anything else to a CSV
/// file whose label column is `label`.
pub fn load_task(spec: &str) -> Result<Dataset> {
    match spec.strip_prefix("synthetic:") {
        Some(name) => bundled_task(name),
        None => Dataset::load_csv(Path::new(spec), "label", CSV_SPLIT_SEED),
    }
}
