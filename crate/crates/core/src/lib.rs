pub mod engine;
pub mod error;
pub mod fanova;
pub mod fidelity;
pub mod gbt;
pub mod gp;
pub mod linalg;
pub mod mulch_mf;
pub mod objective;
pub mod optim;
pub mod priors;
pub mod rng;
pub mod service;
pub mod sobol;
mod sobol_table;
pub mod space;

pub use error::{Error, Result};
pub use space::{Configuration, Domain, Parameter, Preset, SampleMode, SearchSpace, Transform, Value};
