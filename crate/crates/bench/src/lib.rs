//! Deterministic fixtures shared by the benchmarks.

use mulch_core::fanova::EvaluationRecord;
use mulch_core::gp::{GpModel, LengthscaleBox};
use mulch_core::sobol::Sobol;
use mulch_core::{SampleMode, SearchSpace};

/// A smooth test function on the unit cube.
pub fn branin_like(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| (3.0 * v + i as f64).sin() * (1.0 + 0.5 * v))
        .sum()
}

/// `n` scrambled Sobol points in `[0, 1]^d` with their function values.
pub fn gp_data(n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x = Sobol::new(d, 17).expect("dimension supported").points(n);
    let y = x.iter().map(|p| branin_like(p)).collect();
    (x, y)
}

pub fn fitted_gp(n: usize, d: usize) -> GpModel {
    let (x, y) = gp_data(n, d);
    GpModel::fit(x, y, &LengthscaleBox::default_for(d), 4, 0).expect("fixture fits")
}

/// Quasi-random evaluations of a smooth function over `space`.
pub fn evaluations(space: &SearchSpace, n: usize) -> Vec<EvaluationRecord> {
    space
        .sample(n, SampleMode::Quasi, 5)
        .expect("space samples")
        .into_iter()
        .map(|config| {
            let u = space.encode(&config).expect("sampled configs encode");
            EvaluationRecord {
                metric: branin_like(&u),
                config,
            }
        })
        .collect()
}
