//! Typed hyperparameter domains, configurations and the maps between native
//! values, transformed coordinates and the unit cube.
//!
//! Three coordinate systems are used throughout the crate:
//!
//! * native: the value handed to the objective (`eta = 0.01`);
//! * transformed: the scale on which bounds are stated and priors are fit
//!   (`eta` exponent `-2`, integers as reals, categoricals as indices);
//! * unit: the `[0, 1]^d` cube the GP works in.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::sobol::Sobol;

/// Slack allowed when checking a value against its bounds in transformed
/// coordinates, to absorb `log10(10^x) != x` round-off.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    #[serde(rename = "none")]
    None,
    /// Bounds are base-10 exponents of the native value.
    #[serde(rename = "log10-exponent")]
    Log10Exponent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Continuous {
        lower: f64,
        upper: f64,
        transform: Transform,
    },
    Integer {
        lower: i64,
        upper: i64,
    },
    Categorical {
        choices: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

/// One point of a search space, keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: BTreeMap<String, Value>,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_f64)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) {
        self.values.insert(name.into(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameter", into = "RawParameter")]
pub struct Parameter {
    pub name: String,
    pub domain: Domain,
}

impl Parameter {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Result<Self> {
        Self::new(
            name,
            Domain::Continuous {
                lower,
                upper,
                transform: Transform::None,
            },
        )
    }

    pub fn log10(name: &str, lower_exp: f64, upper_exp: f64) -> Result<Self> {
        Self::new(
            name,
            Domain::Continuous {
                lower: lower_exp,
                upper: upper_exp,
                transform: Transform::Log10Exponent,
            },
        )
    }

    pub fn integer(name: &str, lower: i64, upper: i64) -> Result<Self> {
        Self::new(name, Domain::Integer { lower, upper })
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Result<Self> {
        Self::new(
            name,
            Domain::Categorical {
                choices: choices.iter().map(|c| c.to_string()).collect(),
            },
        )
    }

    pub fn new(name: &str, domain: Domain) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::invalid_param(name, "empty name"));
        }
        match &domain {
            Domain::Continuous { lower, upper, .. } => {
                if !lower.is_finite() || !upper.is_finite() || lower >= upper {
                    return Err(Error::invalid_param(
                        name,
                        format!("continuous bounds need lower < upper, got [{lower}, {upper}]"),
                    ));
                }
            }
            Domain::Integer { lower, upper } => {
                if lower > upper {
                    return Err(Error::invalid_param(
                        name,
                        format!("integer bounds need lower <= upper, got [{lower}, {upper}]"),
                    ));
                }
            }
            Domain::Categorical { choices } => {
                if choices.is_empty() {
                    return Err(Error::invalid_param(name, "no choices"));
                }
                for (i, c) in choices.iter().enumerate() {
                    if choices[..i].contains(c) {
                        return Err(Error::invalid_param(name, format!("duplicate choice `{c}`")));
                    }
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            domain,
        })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.domain, Domain::Categorical { .. })
    }

    /// Number of categories, or `None` for ordered parameters.
    pub fn n_choices(&self) -> Option<usize> {
        match &self.domain {
            Domain::Categorical { choices } => Some(choices.len()),
            _ => None,
        }
    }

    /// Range in transformed coordinates. Integers cover `[lo - 0.5, hi + 0.5]`
    /// and categoricals `[-0.5, K - 0.5]` so that a uniform density on the
    /// support rounds to a uniform distribution over the values.
    pub fn support(&self) -> (f64, f64) {
        match &self.domain {
            Domain::Continuous { lower, upper, .. } => (*lower, *upper),
            Domain::Integer { lower, upper } => (*lower as f64 - 0.5, *upper as f64 + 0.5),
            Domain::Categorical { choices } => (-0.5, choices.len() as f64 - 0.5),
        }
    }

    /// Bounds of the affine map onto the unit interval.
    fn unit_bounds(&self) -> (f64, f64) {
        match &self.domain {
            Domain::Continuous { lower, upper, .. } => (*lower, *upper),
            Domain::Integer { lower, upper } => (*lower as f64, *upper as f64),
            Domain::Categorical { choices } => (0.0, (choices.len() - 1) as f64),
        }
    }

    /// Native value to transformed coordinate, checking the domain.
    pub fn to_transformed(&self, value: &Value) -> Result<f64> {
        let out_of_domain = || Error::OutOfDomain {
            name: self.name.clone(),
            value: value.to_string(),
        };
        match &self.domain {
            Domain::Continuous {
                lower,
                upper,
                transform,
            } => {
                let v = value.as_f64().ok_or_else(out_of_domain)?;
                let t = match transform {
                    Transform::None => v,
                    Transform::Log10Exponent if v > 0.0 => v.log10(),
                    Transform::Log10Exponent => return Err(out_of_domain()),
                };
                if !(t >= lower - BOUND_SLACK && t <= upper + BOUND_SLACK) {
                    return Err(out_of_domain());
                }
                Ok(t.clamp(*lower, *upper))
            }
            Domain::Integer { lower, upper } => {
                let v = match value {
                    Value::Int(v) => *v,
                    Value::Float(f) if f.fract() == 0.0 && f.is_finite() => *f as i64,
                    _ => return Err(out_of_domain()),
                };
                if v < *lower || v > *upper {
                    return Err(out_of_domain());
                }
                Ok(v as f64)
            }
            Domain::Categorical { choices } => {
                let s = value.as_str().ok_or_else(out_of_domain)?;
                choices
                    .iter()
                    .position(|c| c == s)
                    .map(|i| i as f64)
                    .ok_or_else(out_of_domain)
            }
        }
    }

    /// Transformed coordinate to native value. Out-of-range inputs are
    /// clamped; integers and categories round to nearest, ties to even.
    pub fn from_transformed(&self, t: f64) -> Value {
        match &self.domain {
            Domain::Continuous {
                lower,
                upper,
                transform,
            } => {
                let t = t.clamp(*lower, *upper);
                match transform {
                    Transform::None => Value::Float(t),
                    Transform::Log10Exponent => Value::Float(10f64.powf(t)),
                }
            }
            Domain::Integer { lower, upper } => {
                let r = t.round_ties_even().clamp(*lower as f64, *upper as f64);
                Value::Int(r as i64)
            }
            Domain::Categorical { choices } => {
                let r = t.round_ties_even().clamp(0.0, (choices.len() - 1) as f64);
                Value::Str(choices[r as usize].clone())
            }
        }
    }

    pub fn encode_value(&self, value: &Value) -> Result<f64> {
        let t = self.to_transformed(value)?;
        let (lo, hi) = self.unit_bounds();
        Ok(if hi > lo { (t - lo) / (hi - lo) } else { 0.0 })
    }

    pub fn decode_value(&self, u: f64) -> Value {
        let (lo, hi) = self.unit_bounds();
        self.from_transformed(lo + u.clamp(0.0, 1.0) * (hi - lo))
    }

    /// Maps a uniform variate on `[0, 1)` to a value distributed uniformly
    /// over the domain (uniform over integers and categories).
    pub fn value_from_uniform(&self, u: f64) -> Value {
        match &self.domain {
            Domain::Continuous { lower, upper, .. } => {
                self.from_transformed(lower + u * (upper - lower))
            }
            Domain::Integer { lower, upper } => {
                let span = (upper - lower + 1) as f64;
                let k = ((u * span).floor() as i64).clamp(0, upper - lower);
                Value::Int(lower + k)
            }
            Domain::Categorical { choices } => {
                let k = ((u * choices.len() as f64).floor() as usize).min(choices.len() - 1);
                Value::Str(choices[k].clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParameter {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transform: Option<Transform>,
}

impl TryFrom<RawParameter> for Parameter {
    type Error = Error;

    fn try_from(raw: RawParameter) -> Result<Self> {
        let name = raw.name.as_str();
        let bounds = || -> Result<(f64, f64)> {
            match (raw.lower, raw.upper) {
                (Some(l), Some(u)) => Ok((l, u)),
                _ => Err(Error::invalid_param(name, "missing lower/upper")),
            }
        };
        let transform = raw.transform.unwrap_or(Transform::None);
        let domain = match raw.kind.as_str() {
            "continuous" | "double" | "float" => {
                let (lower, upper) = bounds()?;
                Domain::Continuous {
                    lower,
                    upper,
                    transform,
                }
            }
            "integer" | "int" => {
                if transform != Transform::None {
                    return Err(Error::invalid_param(
                        name,
                        "log10-exponent is only allowed for continuous parameters",
                    ));
                }
                let (lower, upper) = bounds()?;
                if lower.fract() != 0.0 || upper.fract() != 0.0 {
                    return Err(Error::invalid_param(name, "integer bounds must be integral"));
                }
                Domain::Integer {
                    lower: lower as i64,
                    upper: upper as i64,
                }
            }
            "categorical" => {
                if transform != Transform::None {
                    return Err(Error::invalid_param(
                        name,
                        "log10-exponent is only allowed for continuous parameters",
                    ));
                }
                Domain::Categorical {
                    choices: raw
                        .choices
                        .ok_or_else(|| Error::invalid_param(name, "missing choices"))?,
                }
            }
            other => return Err(Error::invalid_param(name, format!("unknown kind `{other}`"))),
        };
        Parameter::new(name, domain)
    }
}

impl From<Parameter> for RawParameter {
    fn from(p: Parameter) -> Self {
        let mut raw = RawParameter {
            name: p.name,
            kind: String::new(),
            lower: None,
            upper: None,
            choices: None,
            transform: None,
        };
        match p.domain {
            Domain::Continuous {
                lower,
                upper,
                transform,
            } => {
                raw.kind = "continuous".into();
                raw.lower = Some(lower);
                raw.upper = Some(upper);
                raw.transform = Some(transform);
            }
            Domain::Integer { lower, upper } => {
                raw.kind = "integer".into();
                raw.lower = Some(lower as f64);
                raw.upper = Some(upper as f64);
            }
            Domain::Categorical { choices } => {
                raw.kind = "categorical".into();
                raw.choices = Some(choices);
            }
        }
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Pseudo,
    Quasi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SearchSpace {
    parameters: Vec<Parameter>,
}

#[derive(Deserialize)]
struct RawSpace {
    parameters: Vec<Parameter>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        SearchSpace::new(raw.parameters)
    }
}

/// The 12-dimensional boosted-tree space, in descending importance order.
fn xgb12_rows() -> Vec<Parameter> {
    let rows = [
        Parameter::log10("eta", -5.0, 1.0),
        Parameter::integer("max_depth", 1, 32),
        Parameter::continuous("max_delta_step", 0.0, 10.0),
        Parameter::continuous("alpha", 0.0, 10.0),
        Parameter::integer("num_boost_round", 1, 500),
        Parameter::continuous("gamma", 0.0, 5.0),
        Parameter::continuous("lambda", 0.0, 10.0),
        Parameter::continuous("subsample", 0.5, 1.0),
        Parameter::continuous("min_child_weight", 1.0, 5.0),
        Parameter::categorical("tree_method", &["approx", "hist"]),
        Parameter::integer("max_bin", 128, 512),
        Parameter::categorical("grow_policy", &["depthwise", "lossguide"]),
    ];
    rows.into_iter()
        .map(|r| r.expect("preset rows are valid"))
        .collect()
}

pub const MULCH5: [&str; 5] = [
    "eta",
    "gamma",
    "max_depth",
    "min_child_weight",
    "num_boost_round",
];

/// Named preset spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Xgb12,
    Mulch5,
    Top(usize),
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xgb12" => return Ok(Preset::Xgb12),
            "mulch5" => return Ok(Preset::Mulch5),
            _ => {}
        }
        let k = s
            .strip_prefix("top(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("top:"))
            .or_else(|| s.strip_prefix("top"))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))?;
        k.parse()
            .map(Preset::Top)
            .map_err(|_| Error::UnknownPreset(s.to_string()))
    }
}

pub fn default_space(preset: Preset) -> Result<SearchSpace> {
    let rows = xgb12_rows();
    let params = match preset {
        Preset::Xgb12 => rows,
        Preset::Mulch5 => rows
            .into_iter()
            .filter(|p| MULCH5.contains(&p.name.as_str()))
            .collect(),
        Preset::Top(k) => {
            if !(1..=12).contains(&k) {
                return Err(Error::InvalidArgument(format!(
                    "top(k) needs k in [1, 12], got {k}"
                )));
            }
            rows.into_iter().take(k).collect()
        }
    };
    SearchSpace::new(params)
}

impl SearchSpace {
    pub fn new(parameters: Vec<Parameter>) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::InvalidSpace("no parameters".into()));
        }
        for (i, p) in parameters.iter().enumerate() {
            if parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidSpace(format!("duplicate parameter `{}`", p.name)));
            }
        }
        Ok(Self { parameters })
    }

    pub fn preset(name: &str) -> Result<Self> {
        default_space(name.parse()?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub(crate) fn parameter_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.parameters.iter_mut().find(|p| p.name == name)
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: config.values.len(),
            });
        }
        for p in &self.parameters {
            let v = config.get(&p.name).ok_or_else(|| Error::OutOfDomain {
                name: p.name.clone(),
                value: "<missing>".into(),
            })?;
            p.to_transformed(v)?;
        }
        Ok(())
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        self.validate(config).is_ok()
    }

    /// Per-parameter transformed coordinates, in declaration order.
    pub fn to_transformed(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.parameters
            .iter()
            .map(|p| {
                let v = config.get(&p.name).ok_or_else(|| Error::OutOfDomain {
                    name: p.name.clone(),
                    value: "<missing>".into(),
                })?;
                p.to_transformed(v)
            })
            .collect()
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.validate(config)?;
        self.parameters
            .iter()
            .map(|p| p.encode_value(&config.values[&p.name]))
            .collect()
    }

    pub fn decode(&self, vector: &[f64]) -> Result<Configuration> {
        if vector.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: vector.len(),
            });
        }
        let mut config = Configuration::default();
        for (p, &u) in self.parameters.iter().zip(vector) {
            config.insert(p.name.clone(), p.decode_value(u));
        }
        Ok(config)
    }

    /// Projects a unit vector onto the nearest representable configuration.
    pub fn snap(&self, vector: &[f64]) -> Result<Vec<f64>> {
        self.encode(&self.decode(vector)?)
    }

    pub fn from_uniform(&self, u: &[f64]) -> Configuration {
        let mut config = Configuration::default();
        for (p, &x) in self.parameters.iter().zip(u) {
            config.insert(p.name.clone(), p.value_from_uniform(x));
        }
        config
    }

    pub fn sample(&self, n: usize, mode: SampleMode, seed: u64) -> Result<Vec<Configuration>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let d = self.dim();
        Ok(match mode {
            SampleMode::Pseudo => {
                let mut rng = rng_from(seed);
                (0..n)
                    .map(|_| {
                        let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                        self.from_uniform(&u)
                    })
                    .collect()
            }
            SampleMode::Quasi => {
                let sobol = Sobol::new(d, seed)?;
                (0..n as u32)
                    .map(|i| self.from_uniform(&sobol.point(i)))
                    .collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(pairs: &[(&str, Value)]) -> Configuration {
        let mut c = Configuration::default();
        for (k, v) in pairs {
            c.insert(*k, v.clone());
        }
        c
    }

    #[test]
    fn xgb12_matches_table() {
        let s = default_space(Preset::Xgb12).unwrap();
        assert_eq!(s.dim(), 12);
        let eta = s.parameter("eta").unwrap();
        assert_eq!(
            eta.domain,
            Domain::Continuous {
                lower: -5.0,
                upper: 1.0,
                transform: Transform::Log10Exponent
            }
        );
        assert_eq!(
            s.parameter("max_depth").unwrap().domain,
            Domain::Integer { lower: 1, upper: 32 }
        );
        assert_eq!(
            s.parameter("num_boost_round").unwrap().domain,
            Domain::Integer { lower: 1, upper: 500 }
        );
        assert_eq!(s.parameters()[11].name, "grow_policy");
    }

    #[test]
    fn presets() {
        let top1 = SearchSpace::preset("top(1)").unwrap();
        assert_eq!(top1.dim(), 1);
        assert_eq!(top1.parameters()[0].name, "eta");
        let m5 = SearchSpace::preset("mulch5").unwrap();
        let mut names: Vec<_> = m5.parameters().iter().map(|p| p.name.as_str()).collect();
        names.sort();
        assert_eq!(
            names,
            ["eta", "gamma", "max_depth", "min_child_weight", "num_boost_round"]
        );
        assert_eq!(SearchSpace::preset("top3").unwrap().parameters()[2].name, "max_delta_step");
        assert!(SearchSpace::preset("top(0)").is_err());
        assert!(SearchSpace::preset("top(13)").is_err());
        assert!(matches!(SearchSpace::preset("xgb99"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn parameter_invariants() {
        assert!(Parameter::continuous("a", 1.0, 1.0).is_err());
        assert!(Parameter::integer("a", 3, 2).is_err());
        assert!(Parameter::integer("a", 3, 3).is_ok());
        assert!(Parameter::categorical("a", &[]).is_err());
        assert!(Parameter::categorical("a", &["x", "x"]).is_err());
        assert!(SearchSpace::new(vec![
            Parameter::integer("a", 0, 1).unwrap(),
            Parameter::integer("a", 0, 1).unwrap()
        ])
        .is_err());
        let bad = r#"{"parameters":[{"name":"k","kind":"integer","lower":1,"upper":4,"transform":"log10-exponent"}]}"#;
        assert!(SearchSpace::from_json(bad).is_err());
        let frac = r#"{"parameters":[{"name":"k","kind":"integer","lower":1.5,"upper":4}]}"#;
        assert!(SearchSpace::from_json(frac).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = default_space(Preset::Xgb12).unwrap();
        let back = SearchSpace::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn encode_examples() {
        let s = default_space(Preset::Xgb12).unwrap();
        let eta = s.parameter("eta").unwrap();
        assert!((eta.encode_value(&Value::Float(1e-2)).unwrap() - 0.5).abs() < 1e-12);
        let md = s.parameter("max_depth").unwrap();
        assert_eq!(md.encode_value(&Value::Int(1)).unwrap(), 0.0);
        assert!(eta.encode_value(&Value::Float(100.0)).is_err());
        assert!(md.encode_value(&Value::Int(33)).is_err());
    }

    #[test]
    fn decode_examples() {
        let s = default_space(Preset::Mulch5).unwrap();
        let c = s.decode(&[0.0; 5]).unwrap();
        assert_eq!(c.get("max_depth"), Some(&Value::Int(1)));
        assert_eq!(c.get("num_boost_round"), Some(&Value::Int(1)));
        assert_eq!(c.get("gamma"), Some(&Value::Float(0.0)));
        assert_eq!(c.get("min_child_weight"), Some(&Value::Float(1.0)));
        assert!((c.get_f64("eta").unwrap() - 1e-5).abs() < 1e-18);
        assert!(s.decode(&[0.0; 4]).is_err());

        // 0.5 on [1, 32] lands on 16.5; enumerate the rule: nearest integer,
        // halves go to the even neighbour.
        let md = Parameter::integer("m", 1, 32).unwrap();
        let target = 1.0 + 0.5 * 31.0;
        let expected = (1..=32)
            .min_by(|a, b| {
                let da = (*a as f64 - target).abs();
                let db = (*b as f64 - target).abs();
                da.partial_cmp(&db).unwrap().then((a % 2).cmp(&(b % 2)))
            })
            .unwrap();
        assert_eq!(expected, 16);
        assert_eq!(md.decode_value(0.5), Value::Int(expected));

        let tm = Parameter::categorical("t", &["approx", "hist"]).unwrap();
        assert_eq!(tm.decode_value(1.0), Value::Str("hist".into()));
        let single = Parameter::categorical("t", &["only"]).unwrap();
        assert_eq!(single.encode_value(&Value::Str("only".into())).unwrap(), 0.0);
    }

    #[test]
    fn quasi_sample_of_xgb12() {
        let s = default_space(Preset::Xgb12).unwrap();
        let configs = s.sample(1024, SampleMode::Quasi, 7).unwrap();
        assert_eq!(configs.len(), 1024);
        for c in &configs {
            s.validate(c).unwrap();
            let eta = c.get_f64("eta").unwrap();
            assert!((1e-5 * (1.0 - 1e-12)..=10.0 * (1.0 + 1e-12)).contains(&eta));
        }
        for i in 0..configs.len() {
            for j in 0..i {
                assert_ne!(configs[i], configs[j]);
            }
        }
        assert_eq!(configs, s.sample(1024, SampleMode::Quasi, 7).unwrap());
    }

    #[test]
    fn degenerate_integer_range() {
        let s = SearchSpace::new(vec![Parameter::integer("k", 3, 3).unwrap()]).unwrap();
        let c = s.sample(5, SampleMode::Pseudo, 99).unwrap();
        assert!(c.iter().all(|c| c.get("k") == Some(&Value::Int(3))));
    }

    #[test]
    fn pseudo_sample_mean() {
        let s = SearchSpace::new(vec![Parameter::continuous("x", 0.0, 1.0).unwrap()]).unwrap();
        let c = s.sample(100_000, SampleMode::Pseudo, 1).unwrap();
        let mean = c.iter().map(|c| c.get_f64("x").unwrap()).sum::<f64>() / 1e5;
        // Independent check of the same stream: the sampler must be a plain
        // affine map of the underlying uniform draws.
        let mut rng = rng_from(1);
        let oracle = (0..100_000).map(|_| rng.random::<f64>()).sum::<f64>() / 1e5;
        assert!((mean - oracle).abs() < 1e-12);
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn integer_and_categorical_sampling_is_uniform() {
        let s = SearchSpace::new(vec![
            Parameter::integer("k", 1, 4).unwrap(),
            Parameter::categorical("c", &["a", "b", "c"]).unwrap(),
        ])
        .unwrap();
        let configs = s.sample(1 << 12, SampleMode::Quasi, 5).unwrap();
        let mut ks = [0usize; 4];
        let mut cs = [0usize; 3];
        for c in &configs {
            if let Some(Value::Int(k)) = c.get("k") {
                ks[(*k - 1) as usize] += 1;
            }
            let i = ["a", "b", "c"]
                .iter()
                .position(|x| Some(*x) == c.get("c").unwrap().as_str())
                .unwrap();
            cs[i] += 1;
        }
        assert!(ks.iter().all(|&k| k == 1024), "{ks:?}");
        assert!(cs.iter().all(|&c| (c as f64 - 4096.0 / 3.0).abs() < 2.0), "{cs:?}");
    }

    #[test]
    fn configuration_json() {
        let c = cfg(&[
            ("eta", Value::Float(0.1)),
            ("max_depth", Value::Int(3)),
            ("tree_method", Value::Str("hist".into())),
        ]);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"eta":0.1,"max_depth":3,"tree_method":"hist"}"#);
        let back: Configuration = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn encode_decode_round_trip(seed in any::<u64>()) {
            let s = default_space(Preset::Xgb12).unwrap();
            let c = &s.sample(1, SampleMode::Pseudo, seed).unwrap()[0];
            let v = s.encode(c).unwrap();
            let back = s.decode(&v).unwrap();
            for p in s.parameters() {
                match p.domain {
                    Domain::Continuous { .. } => {
                        let a = p.to_transformed(&c.values[&p.name]).unwrap();
                        let b = p.to_transformed(&back.values[&p.name]).unwrap();
                        prop_assert!((a - b).abs() <= 1e-12);
                    }
                    _ => prop_assert_eq!(&c.values[&p.name], &back.values[&p.name]),
                }
            }
            let v2 = s.encode(&back).unwrap();
            let v3 = s.encode(&s.decode(&v2).unwrap()).unwrap();
            prop_assert_eq!(v2, v3);
        }

        #[test]
        fn sampled_configs_validate(seed in any::<u64>(), quasi in any::<bool>()) {
            let s = default_space(Preset::Xgb12).unwrap();
            let mode = if quasi { SampleMode::Quasi } else { SampleMode::Pseudo };
            for c in s.sample(4, mode, seed).unwrap() {
                prop_assert!(s.contains(&c));
                prop_assert!(s.encode(&c).unwrap().iter().all(|u| (0.0..=1.0).contains(u)));
            }
        }

        #[test]
        fn decode_is_total_on_the_cube(v in proptest::collection::vec(0.0f64..=1.0, 5)) {
            let s = default_space(Preset::Mulch5).unwrap();
            let c = s.decode(&v).unwrap();
            prop_assert!(s.contains(&c));
        }
    }
}
