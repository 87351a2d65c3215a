//! Per-parameter densities on transformed coordinates, truncated and
//! renormalized to a bounded support.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `params = [L, U]`.
    QuantileUniform,
    /// `params = [α, β, a, b]`: Beta(α, β) mapped affinely onto `[a, b]`.
    Beta,
    /// `params = [shape, scale, location]`.
    Gamma,
    /// `params = [location, scale]`.
    HalfCauchy,
    /// `params` are category probabilities in declaration order.
    Categorical,
}

impl Family {
    pub const CONTINUOUS_MLE: [Family; 3] = [Family::Beta, Family::Gamma, Family::HalfCauchy];

    pub fn name(self) -> &'static str {
        match self {
            Family::QuantileUniform => "quantile-uniform",
            Family::Beta => "beta",
            Family::Gamma => "gamma",
            Family::HalfCauchy => "half-cauchy",
            Family::Categorical => "categorical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDensity {
    pub family: Family,
    pub params: Vec<f64>,
    /// Transformed-coordinate interval the density is renormalized to.
    pub support: (f64, f64),
}

fn check_params(family: Family, params: &[f64]) -> Result<()> {
    let bad = |msg: &str| Err(Error::InvalidArgument(format!("{}: {msg}", family.name())));
    let pos = |v: f64| v.is_finite() && v > 0.0;
    match family {
        Family::QuantileUniform => {
            if params.len() != 2 || !(params[0] < params[1]) || !params[0].is_finite() || !params[1].is_finite() {
                return bad("needs [L, U] with L < U");
            }
        }
        Family::Beta => {
            if params.len() != 4 || !pos(params[0]) || !pos(params[1]) || !(params[2] < params[3]) {
                return bad("needs [alpha, beta, a, b] with positive shapes and a < b");
            }
        }
        Family::Gamma => {
            if params.len() != 3 || !pos(params[0]) || !pos(params[1]) || !params[2].is_finite() {
                return bad("needs [shape, scale, location] with positive shape and scale");
            }
        }
        Family::HalfCauchy => {
            if params.len() != 2 || !params[0].is_finite() || !pos(params[1]) {
                return bad("needs [location, scale] with positive scale");
            }
        }
        Family::Categorical => {
            if params.is_empty() || params.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad("needs nonnegative probabilities");
            }
            let total: f64 = params.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return bad("probabilities must sum to 1");
            }
        }
    }
    Ok(())
}

impl ParamDensity {
    pub fn new(family: Family, params: Vec<f64>, support: (f64, f64)) -> Result<Self> {
        check_params(family, &params)?;
        if !(support.0 <= support.1) {
            return Err(Error::InvalidArgument(format!("bad support {support:?}")));
        }
        let d = Self { family, params, support };
        if d.family != Family::Categorical && !(d.mass() > 0.0) {
            return Err(Error::Degenerate(format!(
                "{} puts no mass on {:?}",
                family.name(),
                support
            )));
        }
        Ok(d)
    }

    pub fn uniform(support: (f64, f64)) -> Self {
        Self {
            family: Family::QuantileUniform,
            params: vec![support.0, support.1],
            support,
        }
    }

    /// Same family and parameters renormalized to another support.
    pub fn with_support(&self, support: (f64, f64)) -> Result<Self> {
        Self::new(self.family, self.params.clone(), support)
    }

    /// Untruncated CDF of the base distribution.
    pub fn base_cdf(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::QuantileUniform => ((x - p[0]) / (p[1] - p[0])).clamp(0.0, 1.0),
            Family::Beta => {
                let z = (x - p[2]) / (p[3] - p[2]);
                if z <= 0.0 {
                    0.0
                } else if z >= 1.0 {
                    1.0
                } else {
                    beta_reg(p[0], p[1], z)
                }
            }
            Family::Gamma => {
                let z = x - p[2];
                if z <= 0.0 { 0.0 } else { gamma_lr(p[0], z / p[1]) }
            }
            Family::HalfCauchy => {
                let z = x - p[0];
                if z <= 0.0 {
                    0.0
                } else {
                    std::f64::consts::FRAC_2_PI * (z / p[1]).atan()
                }
            }
            Family::Categorical => {
                // Step CDF over indices 0..K.
                let k = (x + 0.5).floor();
                if k < 0.0 {
                    0.0
                } else {
                    p.iter().take(k as usize).sum::<f64>().min(1.0)
                }
            }
        }
    }

    /// Untruncated log density of the base distribution.
    pub fn base_ln_pdf(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::QuantileUniform => {
                if x >= p[0] && x <= p[1] {
                    -(p[1] - p[0]).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Beta => {
                let w = p[3] - p[2];
                let z = (x - p[2]) / w;
                if !(0.0..=1.0).contains(&z) {
                    return f64::NEG_INFINITY;
                }
                (p[0] - 1.0) * z.ln() + (p[1] - 1.0) * (1.0 - z).ln() - ln_beta(p[0], p[1]) - w.ln()
            }
            Family::Gamma => {
                let z = x - p[2];
                if z < 0.0 {
                    return f64::NEG_INFINITY;
                }
                (p[0] - 1.0) * z.ln() - z / p[1] - ln_gamma(p[0]) - p[0] * p[1].ln()
            }
            Family::HalfCauchy => {
                let z = x - p[0];
                if z < 0.0 {
                    return f64::NEG_INFINITY;
                }
                (2.0 / (std::f64::consts::PI * p[1] * (1.0 + (z / p[1]).powi(2)))).ln()
            }
            Family::Categorical => {
                let k = x.round();
                if k < 0.0 || k as usize >= p.len() {
                    f64::NEG_INFINITY
                } else {
                    p[k as usize].ln()
                }
            }
        }
    }

    /// Base probability mass inside the support.
    pub fn mass(&self) -> f64 {
        if self.family == Family::Categorical {
            return 1.0;
        }
        self.base_cdf(self.support.1) - self.base_cdf(self.support.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.support.0 && x <= self.support.1
    }

    /// Truncated density; for categoricals, the probability of index `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let v = self.base_ln_pdf(x).exp();
        if self.family == Family::Categorical { v } else { v / self.mass() }
    }

    /// Inverse of the truncated CDF, in transformed coordinates.
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support;
        let p = &self.params;
        match self.family {
            Family::QuantileUniform => {
                let (a, b) = (p[0].max(lo), p[1].min(hi));
                a + u * (b - a)
            }
            Family::HalfCauchy => {
                let f_lo = self.base_cdf(lo);
                let f_hi = self.base_cdf(hi);
                let target = f_lo + u * (f_hi - f_lo);
                (p[0] + p[1] * (target * std::f64::consts::FRAC_PI_2).tan()).clamp(lo, hi)
            }
            Family::Categorical => {
                let mut cum = 0.0;
                for (k, pk) in p.iter().enumerate() {
                    cum += pk;
                    if u < cum {
                        return k as f64;
                    }
                }
                (p.len() - 1) as f64
            }
            Family::Beta | Family::Gamma => {
                let f_lo = self.base_cdf(lo);
                let f_hi = self.base_cdf(hi);
                let target = f_lo + u * (f_hi - f_lo);
                let (mut a, mut b) = (lo, hi);
                for _ in 0..64 {
                    let m = 0.5 * (a + b);
                    if self.base_cdf(m) < target {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson integration, independent of the CDF code paths.
    pub(crate) fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32,
        ) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
        }
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
    }

    fn check_normalized(d: &ParamDensity) {
        let (lo, hi) = d.support;
        let total = integrate(&|x| d.pdf(x), lo, hi, 1e-10);
        assert!((total - 1.0).abs() < 1e-6, "{d:?} integrates to {total}");
    }

    #[test]
    fn truncated_densities_integrate_to_one() {
        let s = (0.0, 5.0);
        check_normalized(&ParamDensity::new(Family::QuantileUniform, vec![1.0, 2.5], s).unwrap());
        check_normalized(&ParamDensity::new(Family::Beta, vec![2.0, 5.0, 0.0, 5.0], s).unwrap());
        check_normalized(&ParamDensity::new(Family::Gamma, vec![3.0, 0.5, 0.0], s).unwrap());
        check_normalized(&ParamDensity::new(Family::Gamma, vec![2.0, 4.0, 0.0], s).unwrap());
        check_normalized(&ParamDensity::new(Family::HalfCauchy, vec![0.0, 0.7], s).unwrap());
        check_normalized(&ParamDensity::new(Family::Beta, vec![2.0, 3.0, 0.0, 5.0], (1.0, 3.0)).unwrap());
    }

    #[test]
    fn quantile_inverts_truncated_cdf() {
        let s = (0.0, 5.0);
        for d in [
            ParamDensity::new(Family::Beta, vec![2.0, 5.0, 0.0, 5.0], s).unwrap(),
            ParamDensity::new(Family::Gamma, vec![3.0, 0.5, 0.0], s).unwrap(),
            ParamDensity::new(Family::HalfCauchy, vec![0.0, 0.7], s).unwrap(),
            ParamDensity::new(Family::QuantileUniform, vec![1.0, 2.5], s).unwrap(),
        ] {
            for u in [0.01, 0.3, 0.5, 0.9, 0.999] {
                let x = d.quantile(u);
                let f = (d.base_cdf(x) - d.base_cdf(s.0)) / d.mass();
                assert!((f - u).abs() < 1e-9, "{:?} u={u} f={f}", d.family);
            }
        }
    }

    #[test]
    fn categorical_quantile_and_pdf() {
        let d = ParamDensity::new(Family::Categorical, vec![0.25, 0.75], (-0.5, 1.5)).unwrap();
        assert_eq!(d.quantile(0.2), 0.0);
        assert_eq!(d.quantile(0.3), 1.0);
        assert_eq!(d.pdf(1.0), 0.75);
        assert!(ParamDensity::new(Family::Categorical, vec![0.5, 0.6], (-0.5, 1.5)).is_err());
    }

    #[test]
    fn rejects_support_without_mass() {
        assert!(ParamDensity::new(Family::QuantileUniform, vec![0.0, 1.0], (2.0, 3.0)).is_err());
        assert!(ParamDensity::new(Family::QuantileUniform, vec![1.0, 1.0], (0.0, 3.0)).is_err());
    }
}
