//! Serializable distribution descriptions whose parameters may depend on the
//! observation index `i`, plus the parameterization switches.
//!
//! A template is `{"family": name, "params": [...]}` where every parameter is
//! a number or an expression in `i` (see [`crate::expr`]). Parameter order
//! per family:
//!
//! | family | params |
//! |---|---|
//! | `logistic`, `laplace`, `cauchy` | location, scale |
//! | `normal` | mean, variance (or standard deviation) |
//! | `exponential` | rate |
//! | `weibull` | shape, scale (or scale, shape) |
//! | `gamma` | shape, rate (or shape, scale) |
//! | `inverse-gaussian` | mean, shape (or shape, mean) |
//! | `bivariate-normal` | m1, m2, c11, c12, c22 |
//! | `bivariate-t` | dof, l1, l2, s11, s12, s22 |
//! | `bivariate-logistic` | loc1, scale1, loc2, scale2 |
//! | `noisy-logistic` | location, scale, noise variance |
//! | `point` | coordinates |
//! | `product` | none; `components` lists the factors |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family, MixtureSpec};
use crate::expr::Expr;
use crate::weights::WeightScheme;
use crate::{Error, Result};

macro_rules! switch {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
        pub enum $name {
            #[default]
            $(#[serde(rename = $text)] $variant),+
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown value `{other}` (expected one of: {})",
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }
    };
}

switch!(
    /// Meaning of the second normal parameter.
    NormalParam { Variance => "variance", StdDev => "stddev" }
);
switch!(
    /// Meaning of the second gamma parameter.
    GammaParam { Rate => "rate", Scale => "scale" }
);
switch!(
    /// Order of the Weibull parameters.
    WeibullParam { ShapeScale => "shape-scale", ScaleShape => "scale-shape" }
);
switch!(
    /// Order of the inverse Gaussian parameters.
    InverseGaussianParam { MeanShape => "mean-shape", ShapeMean => "shape-mean" }
);

/// How template parameters map onto the canonical parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Conventions {
    pub normal_second_param: NormalParam,
    pub gamma_second_param: GammaParam,
    pub weibull_order: WeibullParam,
    pub inverse_gaussian_order: InverseGaussianParam,
}

/// A number or an expression in `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Expr(String),
}

impl ParamValue {
    pub fn eval(&self, i: usize) -> Result<f64> {
        match self {
            ParamValue::Number(v) => Ok(*v),
            ParamValue::Expr(src) => Ok(Expr::parse(src)?.eval(i)),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Expr(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistTemplate {
    pub family: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<DistTemplate>,
}

impl DistTemplate {
    pub fn new(family: &str, params: Vec<ParamValue>) -> Self {
        Self {
            family: family.to_string(),
            params,
            components: Vec::new(),
        }
    }

    pub fn product(components: Vec<DistTemplate>) -> Self {
        Self {
            family: "product".into(),
            params: Vec::new(),
            components,
        }
    }

    /// The distribution at index `i` (1-based).
    pub fn instantiate(&self, i: usize, conv: &Conventions) -> Result<DistributionSpec> {
        let p = self
            .params
            .iter()
            .map(|v| v.eval(i))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| Error::Config(format!("family `{}`: {e}", self.family)))?;
        let want = |k: usize| -> Result<()> {
            if p.len() == k {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "family `{}` takes {k} parameters, got {}",
                    self.family,
                    p.len()
                )))
            }
        };
        let family = match self.family.as_str() {
            "logistic" => {
                want(2)?;
                Family::Logistic { location: p[0], scale: p[1] }
            }
            "laplace" => {
                want(2)?;
                Family::Laplace { location: p[0], scale: p[1] }
            }
            "cauchy" => {
                want(2)?;
                Family::Cauchy { location: p[0], scale: p[1] }
            }
            "normal" => {
                want(2)?;
                let variance = match conv.normal_second_param {
                    NormalParam::Variance => p[1],
                    NormalParam::StdDev => p[1] * p[1],
                };
                Family::Normal { mean: p[0], variance }
            }
            "exponential" => {
                want(1)?;
                Family::Exponential { rate: p[0] }
            }
            "weibull" => {
                want(2)?;
                let (shape, scale) = match conv.weibull_order {
                    WeibullParam::ShapeScale => (p[0], p[1]),
                    WeibullParam::ScaleShape => (p[1], p[0]),
                };
                Family::Weibull { shape, scale }
            }
            "gamma" => {
                want(2)?;
                let rate = match conv.gamma_second_param {
                    GammaParam::Rate => p[1],
                    GammaParam::Scale => 1.0 / p[1],
                };
                Family::Gamma { shape: p[0], rate }
            }
            "inverse-gaussian" => {
                want(2)?;
                let (mean, shape) = match conv.inverse_gaussian_order {
                    InverseGaussianParam::MeanShape => (p[0], p[1]),
                    InverseGaussianParam::ShapeMean => (p[1], p[0]),
                };
                Family::InverseGaussian { mean, shape }
            }
            "bivariate-normal" => {
                want(5)?;
                Family::BivariateNormal {
                    mean: [p[0], p[1]],
                    cov: [[p[2], p[3]], [p[3], p[4]]],
                }
            }
            "bivariate-t" => {
                want(6)?;
                if p[0].fract() != 0.0 || p[0] < 1.0 || p[0] > u32::MAX as f64 {
                    return Err(Error::Config(format!(
                        "bivariate-t degrees of freedom must be a positive integer, got {}",
                        p[0]
                    )));
                }
                Family::BivariateT {
                    dof: p[0] as u32,
                    location: [p[1], p[2]],
                    scale: [[p[3], p[4]], [p[4], p[5]]],
                }
            }
            "bivariate-logistic" => {
                want(4)?;
                Family::BivariateLogistic {
                    loc1: p[0],
                    scale1: p[1],
                    loc2: p[2],
                    scale2: p[3],
                }
            }
            "noisy-logistic" => {
                want(3)?;
                Family::NoisyLogistic {
                    location: p[0],
                    scale: p[1],
                    noise_variance: p[2],
                }
            }
            "point" => Family::PointMass(p),
            "product" => {
                if self.components.is_empty() {
                    return Err(Error::Config("`product` needs a `components` list".into()));
                }
                Family::Product(
                    self.components
                        .iter()
                        .map(|c| c.instantiate(i, conv))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            other => return Err(Error::Config(format!("unknown family `{other}`"))),
        };
        if self.family != "product" && !self.components.is_empty() {
            return Err(Error::Config(format!("family `{}` does not take components", self.family)));
        }
        DistributionSpec::new(family).map_err(|e| Error::Config(format!("index {i}: {e}")))
    }

    /// `F_1, …, F_n`.
    pub fn sequence(&self, n: usize, conv: &Conventions) -> Result<Vec<DistributionSpec>> {
        (1..=n).map(|i| self.instantiate(i, conv)).collect()
    }

    /// `Σ α_i F_i` with `F_i` the instance at index `i`.
    pub fn mixture(&self, weights: &WeightScheme, conv: &Conventions) -> Result<MixtureSpec> {
        MixtureSpec::new(self.sequence(weights.len(), conv)?, weights.clone())
    }
}

/// A null mixture as supplied in a file: either one explicit component per
/// observation or a generator rule evaluated at `i = 1, …, n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<DistTemplate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<DistTemplate>,
    #[serde(default)]
    pub conventions: Option<Conventions>,
}

impl NullFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: NullFile = serde_json::from_str(text)?;
        match (&f.components, &f.generator) {
            (Some(_), None) | (None, Some(_)) => Ok(f),
            _ => Err(Error::Config(
                "null file needs exactly one of `components` or `generator`".into(),
            )),
        }
    }

    /// Builds `G_n`. Conventions in the file take precedence over `conv`.
    pub fn build(&self, weights: &WeightScheme, conv: &Conventions) -> Result<MixtureSpec> {
        let conv = self.conventions.as_ref().unwrap_or(conv);
        match (&self.components, &self.generator) {
            (Some(list), None) => {
                if list.len() != weights.len() {
                    return Err(Error::Config(format!(
                        "null lists {} components for {} observations",
                        list.len(),
                        weights.len()
                    )));
                }
                let comps = list
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t.instantiate(k + 1, conv))
                    .collect::<Result<Vec<_>>>()?;
                MixtureSpec::new(comps, weights.clone())
            }
            (None, Some(g)) => g.mixture(weights, conv),
            _ => Err(Error::Config("null file needs exactly one of `components` or `generator`".into())),
        }
    }
}
