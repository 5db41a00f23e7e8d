//! Observation weights `α_1, …, α_n` (and `β_1, …, β_r` for a second sample).

use serde::{Deserialize, Serialize};

use crate::numeric::neumaier_sum;
use crate::{Error, Result};

/// Tolerance on `|Σ α_i − 1|`.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Default `kappa_hat` above which [`diagnostics`] warns.
pub const DEFAULT_KAPPA_WARNING: f64 = 10.0;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    weights: Vec<f64>,
    uniform: bool,
}

impl WeightScheme {
    /// Validates an explicit weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Weights("at least one weight is required".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::Weights(format!("weight {} is {w}; weights must be finite and >= 0", i + 1)));
        }
        let sum = neumaier_sum(weights.iter().copied());
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Weights(format!("weights sum to {sum}, not 1")));
        }
        let uniform = weights.iter().all(|w| *w == weights[0]);
        Ok(Self { weights, uniform })
    }

    /// `α_i = 1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Weights("n must be >= 1".into()));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
            uniform: true,
        })
    }

    /// `α_i ∝ i`, i.e. `α_i = 2i / (n(n+1))`.
    pub fn linear(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Weights("n must be >= 1".into()));
        }
        let total = n as f64 * (n as f64 + 1.0) / 2.0;
        Self::new((1..=n).map(|i| i as f64 / total).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// True when every weight is identical (`1/n`). Uniform schemes evaluate
    /// empirical distribution functions by counting.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Cumulative sums, for index sampling. The last entry is forced to 1.
    pub(crate) fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut cum: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        cum
    }

    pub fn diagnostics(&self) -> WeightDiagnostics {
        diagnostics(self)
    }
}

/// Finite-n counterparts of the asymptotic weight conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    /// `√n · max_i α_i`; should be small.
    pub root_n_max: f64,
    /// `n · Σ α_i²`; always `≥ 1`, equal to 1 exactly for uniform weights.
    pub kappa_hat: f64,
    /// Present when `kappa_hat` exceeds the warning threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn diagnostics(w: &WeightScheme) -> WeightDiagnostics {
    diagnostics_with_threshold(w, DEFAULT_KAPPA_WARNING)
}

pub fn diagnostics_with_threshold(w: &WeightScheme, kappa_threshold: f64) -> WeightDiagnostics {
    let n = w.len() as f64;
    let (root_n_max, kappa_hat) = if w.is_uniform() {
        (1.0 / n.sqrt(), 1.0)
    } else {
        let max = w.weights.iter().copied().fold(0.0, f64::max);
        let sq = neumaier_sum(w.weights.iter().map(|a| a * a));
        (n.sqrt() * max, n * sq)
    };
    let warning = (kappa_hat > kappa_threshold).then(|| {
        let msg = format!(
            "kappa_hat = {kappa_hat:.4} exceeds {kappa_threshold}; the weights are far from the regime \
             where the tests have their asymptotic guarantees"
        );
        log::warn!("{msg}");
        msg
    });
    WeightDiagnostics {
        root_n_max,
        kappa_hat,
        warning,
    }
}

/// Weight specification as accepted in configuration files and on the
/// command line: `"uniform"`, `"linear"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightSpec {
    #[default]
    Uniform,
    Linear,
    Explicit(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawWeightSpec {
    Name(String),
    List(Vec<f64>),
}

impl Serialize for WeightSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WeightSpec::Uniform => RawWeightSpec::Name("uniform".into()),
            WeightSpec::Linear => RawWeightSpec::Name("linear".into()),
            WeightSpec::Explicit(v) => RawWeightSpec::List(v.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawWeightSpec::deserialize(d)? {
            RawWeightSpec::Name(n) if n == "uniform" => Ok(WeightSpec::Uniform),
            RawWeightSpec::Name(n) if n == "linear" => Ok(WeightSpec::Linear),
            RawWeightSpec::Name(n) => Err(serde::de::Error::custom(format!(
                "unknown weight scheme `{n}` (expected \"uniform\", \"linear\" or a list)"
            ))),
            RawWeightSpec::List(v) => Ok(WeightSpec::Explicit(v)),
        }
    }
}

impl WeightSpec {
    pub fn build(&self, n: usize) -> Result<WeightScheme> {
        match self {
            WeightSpec::Uniform => WeightScheme::uniform(n),
            WeightSpec::Linear => WeightScheme::linear(n),
            WeightSpec::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::Weights(format!("{} weights given for {n} observations", v.len())));
                }
                WeightScheme::new(v.clone())
            }
        }
    }
}

impl std::str::FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(WeightSpec::Uniform),
            "linear" => Ok(WeightSpec::Linear),
            other => other
                .trim_start_matches('[')
                .trim_end_matches(']')
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Weights(format!("cannot parse weight `{t}`")))
                })
                .collect::<Result<Vec<_>>>()
                .map(WeightSpec::Explicit),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_four() {
        let w = WeightScheme::uniform(4).unwrap();
        assert_eq!(w.as_slice(), &[0.25; 4]);
        let d = w.diagnostics();
        assert_eq!(d.root_n_max, 0.5);
        assert_eq!(d.kappa_hat, 1.0);
    }

    #[test]
    fn uniform_small_and_hundred() {
        assert_eq!(WeightScheme::uniform(1).unwrap().diagnostics().kappa_hat, 1.0);
        assert_eq!(WeightScheme::uniform(3).unwrap().diagnostics().kappa_hat, 1.0);
        assert_eq!(WeightScheme::uniform(100).unwrap().diagnostics().root_n_max, 0.1);
        assert!(WeightScheme::uniform(0).is_err());
    }

    #[test]
    fn linear_three() {
        let w = WeightScheme::linear(3).unwrap();
        assert_relative_eq!(w.get(0), 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(w.diagnostics().kappa_hat, 7.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_kappa_limit() {
        // (2/3)(2n+1)/(n+1) → 4/3
        let w = WeightScheme::linear(1_000_000).unwrap();
        assert!((w.diagnostics().kappa_hat - 4.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(WeightScheme::new(vec![0.5, 0.6]).is_err());
        assert!(WeightScheme::new(vec![1.5, -0.5]).is_err());
        assert!(WeightScheme::new(vec![0.5, 0.5 + 2e-12]).is_err());
        assert!(WeightScheme::new(vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn warning_threshold() {
        let mut v = vec![0.0; 100];
        v[0] = 1.0;
        let w = WeightScheme::new(v).unwrap();
        let d = w.diagnostics();
        assert_relative_eq!(d.kappa_hat, 100.0);
        assert!(d.warning.is_some());
        assert!(WeightScheme::uniform(5).unwrap().diagnostics().warning.is_none());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("uniform".parse::<WeightSpec>().unwrap(), WeightSpec::Uniform);
        assert_eq!("0.25, 0.75".parse::<WeightSpec>().unwrap(), WeightSpec::Explicit(vec![0.25, 0.75]));
        let json: WeightSpec = serde_json::from_str("\"linear\"").unwrap();
        assert_eq!(json, WeightSpec::Linear);
        let json: WeightSpec = serde_json::from_str("[0.5, 0.5]").unwrap();
        assert_eq!(json.build(2).unwrap().as_slice(), &[0.5, 0.5]);
        assert!(serde_json::from_str::<WeightSpec>("\"bogus\"").is_err());
        assert!(WeightSpec::Explicit(vec![1.0]).build(2).is_err());
    }

    proptest! {
        #[test]
        fn kappa_hat_at_least_one(raw in proptest::collection::vec(0.0f64..10.0, 1..60)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let w = WeightScheme::new(raw.iter().map(|v| v / total).collect());
            prop_assume!(w.is_ok());
            let d = w.unwrap().diagnostics();
            prop_assert!(d.kappa_hat >= 1.0 - 1e-12);
        }

        #[test]
        fn uniform_kappa_exact(n in 1usize..5000) {
            prop_assert_eq!(WeightScheme::uniform(n).unwrap().diagnostics().kappa_hat, 1.0);
        }
    }
}
