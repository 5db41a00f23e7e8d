//! Distribution families and finite mixtures: CDF, log-density, quantile and
//! sampling.
//!
//! Parameterizations are fixed here: `Normal` takes a variance, `Gamma` a
//! rate, `Weibull` is shape–scale and `InverseGaussian` is mean–shape. Other
//! readings are mapped onto these by [`crate::template::Conventions`].

use std::f64::consts::{LN_2, PI};

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, InverseGaussian, StandardNormal};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::numeric::{
    bisect_increasing, bvn_cdf, bvt_cdf, gauss_hermite, ln_norm_cdf, log_sum_exp, norm_cdf,
    norm_ln_pdf, norm_quantile,
};
use crate::weights::WeightScheme;
use crate::{Error, Result, Sample};

/// Anything that can be evaluated as a distribution function on `ℝ̄^m`.
pub trait Cdf: Sync {
    fn dim(&self) -> usize;

    /// `F(x)`. The caller guarantees `x.len() == self.dim()`; `±∞` entries
    /// are allowed.
    fn cdf_at(&self, x: &[f64]) -> f64;

    /// For step functions: the per-axis coordinates at which `F` can jump.
    /// `None` for distributions with a continuous part.
    fn jump_coordinates(&self) -> Option<Vec<Vec<f64>>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Logistic { location: f64, scale: f64 },
    Laplace { location: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    Normal { mean: f64, variance: f64 },
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGaussian { mean: f64, shape: f64 },
    BivariateNormal { mean: [f64; 2], cov: [[f64; 2]; 2] },
    /// Bivariate t with `dof` degrees of freedom and scale matrix `scale`.
    BivariateT { dof: u32, location: [f64; 2], scale: [[f64; 2]; 2] },
    /// Gumbel's bivariate logistic, `F(x, y) = 1 / (1 + e^{-x'} + e^{-y'})`.
    BivariateLogistic { loc1: f64, scale1: f64, loc2: f64, scale2: f64 },
    /// Independent blocks; coordinates are concatenated in order.
    Product(Vec<DistributionSpec>),
    /// `Y + Z` with `Y ~ Logistic(location, scale)` and independent
    /// `Z ~ N(0, noise_variance)`.
    NoisyLogistic { location: f64, scale: f64, noise_variance: f64 },
    /// Dirac mass at a point.
    PointMass(Vec<f64>),
}

/// A validated distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    family: Family,
    dim: usize,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {v}")))
    }
}

fn check_matrix(name: &str, m: &[[f64; 2]; 2]) -> Result<()> {
    let [[a, b], [c, d]] = *m;
    if ![a, b, c, d].iter().all(|v| v.is_finite()) {
        return Err(Error::Parameter(format!("{name} has non-finite entries")));
    }
    if b != c {
        return Err(Error::Parameter(format!("{name} is not symmetric")));
    }
    if a <= 0.0 || d <= 0.0 || a * d - b * b <= 0.0 {
        return Err(Error::Parameter(format!("{name} is not positive definite")));
    }
    Ok(())
}

/// Lower Cholesky factor `(l11, l21, l22)` of a 2×2 SPD matrix.
fn cholesky2(m: &[[f64; 2]; 2]) -> (f64, f64, f64) {
    let l11 = m[0][0].sqrt();
    let l21 = m[1][0] / l11;
    let l22 = (m[1][1] - l21 * l21).sqrt();
    (l11, l21, l22)
}

/// Standardized arguments and correlation for a 2×2 location/scale pair.
fn standardize2(x: &[f64], loc: &[f64; 2], m: &[[f64; 2]; 2]) -> (f64, f64, f64) {
    let s1 = m[0][0].sqrt();
    let s2 = m[1][1].sqrt();
    ((x[0] - loc[0]) / s1, (x[1] - loc[1]) / s2, m[0][1] / (s1 * s2))
}

/// Quadratic form `dᵀ M⁻¹ d` and `ln det M` for a 2×2 SPD matrix.
fn quad_form2(x: &[f64], loc: &[f64; 2], m: &[[f64; 2]; 2]) -> (f64, f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    let d0 = x[0] - loc[0];
    let d1 = x[1] - loc[1];
    let q = (m[1][1] * d0 * d0 - 2.0 * m[0][1] * d0 * d1 + m[0][0] * d1 * d1) / det;
    (q, det.ln())
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

impl DistributionSpec {
    pub fn new(family: Family) -> Result<Self> {
        let dim = match &family {
            Family::Logistic { location, scale }
            | Family::Laplace { location, scale }
            | Family::Cauchy { location, scale } => {
                finite("location", *location)?;
                positive("scale", *scale)?;
                1
            }
            Family::Normal { mean, variance } => {
                finite("mean", *mean)?;
                positive("variance", *variance)?;
                1
            }
            Family::Exponential { rate } => {
                positive("rate", *rate)?;
                1
            }
            Family::Weibull { shape, scale } => {
                positive("shape", *shape)?;
                positive("scale", *scale)?;
                1
            }
            Family::Gamma { shape, rate } => {
                positive("shape", *shape)?;
                positive("rate", *rate)?;
                1
            }
            Family::InverseGaussian { mean, shape } => {
                positive("mean", *mean)?;
                positive("shape", *shape)?;
                1
            }
            Family::BivariateNormal { mean, cov } => {
                finite("mean", mean[0])?;
                finite("mean", mean[1])?;
                check_matrix("covariance matrix", cov)?;
                2
            }
            Family::BivariateT { dof, location, scale } => {
                if *dof == 0 {
                    return Err(Error::Parameter("degrees of freedom must be >= 1".into()));
                }
                finite("location", location[0])?;
                finite("location", location[1])?;
                check_matrix("scale matrix", scale)?;
                2
            }
            Family::BivariateLogistic { loc1, scale1, loc2, scale2 } => {
                finite("loc1", *loc1)?;
                finite("loc2", *loc2)?;
                positive("scale1", *scale1)?;
                positive("scale2", *scale2)?;
                2
            }
            Family::Product(parts) => {
                if parts.is_empty() {
                    return Err(Error::Parameter("product needs at least one component".into()));
                }
                if parts.iter().any(|p| matches!(p.family, Family::PointMass(_))) {
                    return Err(Error::Parameter("point masses cannot be product components".into()));
                }
                parts.iter().map(|p| p.dim).sum()
            }
            Family::NoisyLogistic { location, scale, noise_variance } => {
                finite("location", *location)?;
                positive("scale", *scale)?;
                if !(noise_variance.is_finite() && *noise_variance >= 0.0) {
                    return Err(Error::Parameter(format!(
                        "noise variance must be finite and >= 0, got {noise_variance}"
                    )));
                }
                1
            }
            Family::PointMass(p) => {
                if p.is_empty() {
                    return Err(Error::Parameter("point mass needs at least one coordinate".into()));
                }
                for v in p {
                    finite("point mass coordinate", *v)?;
                }
                p.len()
            }
        };
        Ok(Self { family, dim })
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Logistic { location, scale })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Laplace { location, scale })
    }

    pub fn cauchy(location: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Cauchy { location, scale })
    }

    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Family::Normal { mean, variance })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Weibull { shape, scale })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::new(Family::Gamma { shape, rate })
    }

    pub fn inverse_gaussian(mean: f64, shape: f64) -> Result<Self> {
        Self::new(Family::InverseGaussian { mean, shape })
    }

    pub fn point_mass(at: Vec<f64>) -> Result<Self> {
        Self::new(Family::PointMass(at))
    }

    pub fn product(parts: Vec<DistributionSpec>) -> Result<Self> {
        Self::new(Family::Product(parts))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.family, Family::PointMass(_))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("NaN evaluation point".into()));
        }
        Ok(())
    }

    /// `F(x)` with dimension checking.
    pub fn cdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.cdf_unchecked(x))
    }

    fn cdf_unchecked(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::Product(parts) => {
                let mut offset = 0;
                let mut p = 1.0;
                for part in parts {
                    p *= part.cdf_unchecked(&x[offset..offset + part.dim]);
                    offset += part.dim;
                }
                p
            }
            Family::PointMass(at) => {
                if x.iter().zip(at).all(|(xi, ai)| xi >= ai) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::BivariateNormal { mean, cov } => {
                let (h, k, r) = standardize2(x, mean, cov);
                bvn_cdf(h, k, r)
            }
            Family::BivariateT { dof, location, scale } => {
                let (h, k, r) = standardize2(x, location, scale);
                bvt_cdf(*dof, h, k, r)
            }
            Family::BivariateLogistic { loc1, scale1, loc2, scale2 } => {
                let a = (-(x[0] - loc1) / scale1).exp();
                let b = (-(x[1] - loc2) / scale2).exp();
                1.0 / (1.0 + a + b)
            }
            _ => self.cdf1(x[0]),
        }
    }

    fn cdf1(&self, x: f64) -> f64 {
        match self.family {
            Family::Logistic { location, scale } => 1.0 / (1.0 + (-(x - location) / scale).exp()),
            Family::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Family::Cauchy { location, scale } => 0.5 + ((x - location) / scale).atan() / PI,
            Family::Normal { mean, variance } => norm_cdf((x - mean) / variance.sqrt()),
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Family::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    1.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Family::InverseGaussian { mean, shape } => {
                if x <= 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    1.0
                } else {
                    let r = (shape / x).sqrt();
                    let a = r * (x / mean - 1.0);
                    let b = r * (x / mean + 1.0);
                    let second = (2.0 * shape / mean + ln_norm_cdf(-b)).exp();
                    (norm_cdf(a) + second).min(1.0)
                }
            }
            Family::NoisyLogistic { location, scale, noise_variance } => {
                if x.is_infinite() || noise_variance == 0.0 {
                    return 1.0 / (1.0 + (-(x - location) / scale).exp());
                }
                let (nodes, weights) = gauss_hermite();
                let sd = (2.0 * noise_variance).sqrt();
                let s: f64 = nodes
                    .iter()
                    .zip(weights)
                    .map(|(t, w)| w / (1.0 + (-(x - sd * t - location) / scale).exp()))
                    .sum();
                (s / PI.sqrt()).clamp(0.0, 1.0)
            }
            _ => unreachable!("multivariate family in univariate cdf"),
        }
    }

    /// Natural log of the density; `−∞` off the support.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if x.iter().any(|v| v.is_infinite()) {
            return Err(Error::Input("density is undefined at infinite coordinates".into()));
        }
        self.log_density_unchecked(x)
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> Result<f64> {
        Ok(match &self.family {
            Family::Product(parts) => {
                let mut offset = 0;
                let mut s = 0.0;
                for part in parts {
                    s += part.log_density_unchecked(&x[offset..offset + part.dim])?;
                    offset += part.dim;
                }
                s
            }
            Family::PointMass(_) => {
                return Err(Error::Parameter("a point mass has no density".into()));
            }
            Family::BivariateNormal { mean, cov } => {
                let (q, ln_det) = quad_form2(x, mean, cov);
                -(2.0 * PI).ln() - 0.5 * ln_det - 0.5 * q
            }
            Family::BivariateT { dof, location, scale } => {
                let nu = *dof as f64;
                let (q, ln_det) = quad_form2(x, location, scale);
                ln_gamma(0.5 * (nu + 2.0)) - ln_gamma(0.5 * nu) - (nu * PI).ln() - 0.5 * ln_det
                    - 0.5 * (nu + 2.0) * (q / nu).ln_1p()
            }
            Family::BivariateLogistic { loc1, scale1, loc2, scale2 } => {
                let z1 = (x[0] - loc1) / scale1;
                let z2 = (x[1] - loc2) / scale2;
                LN_2 - z1 - z2 - scale1.ln() - scale2.ln() - 3.0 * log_sum_exp([0.0, -z1, -z2])
            }
            _ => self.log_density1(x[0]),
        })
    }

    fn log_density1(&self, x: f64) -> f64 {
        match self.family {
            Family::Logistic { location, scale } => {
                let z = ((x - location) / scale).abs();
                -z - 2.0 * (-z).exp().ln_1p() - scale.ln()
            }
            Family::Laplace { location, scale } => -((x - location) / scale).abs() - (2.0 * scale).ln(),
            Family::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                -(PI * scale).ln() - z.mul_add(z, 1.0).ln()
            }
            Family::Normal { mean, variance } => norm_ln_pdf((x - mean) / variance.sqrt()) - 0.5 * variance.ln(),
            Family::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Family::Weibull { shape, scale } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    edge_density(shape, (shape / scale).ln())
                } else {
                    let z = x / scale;
                    (shape / scale).ln() + (shape - 1.0) * z.ln() - z.powf(shape)
                }
            }
            Family::Gamma { shape, rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    edge_density(shape, rate.ln())
                } else {
                    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
                }
            }
            Family::InverseGaussian { mean, shape } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let d = x - mean;
                    0.5 * (shape / (2.0 * PI * x * x * x)).ln() - shape * d * d / (2.0 * mean * mean * x)
                }
            }
            Family::NoisyLogistic { location, scale, noise_variance } => {
                if noise_variance == 0.0 {
                    let plain = DistributionSpec {
                        family: Family::Logistic { location, scale },
                        dim: 1,
                    };
                    return plain.log_density1(x);
                }
                let (nodes, weights) = gauss_hermite();
                let sd = (2.0 * noise_variance).sqrt();
                let terms = nodes.iter().zip(weights).map(|(t, w)| {
                    let z = ((x - sd * t - location) / scale).abs();
                    w.ln() - z - 2.0 * (-z).exp().ln_1p() - scale.ln()
                });
                log_sum_exp(terms.collect::<Vec<_>>()) - 0.5 * PI.ln()
            }
            _ => unreachable!("multivariate family in univariate density"),
        }
    }

    /// Quantile function for univariate families.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.dim != 1 || matches!(self.family, Family::Product(_) | Family::PointMass(_)) {
            return Err(Error::Parameter("quantile is defined for univariate continuous families only".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        match self.family {
            Family::Logistic { location, scale } => location + scale * (p / (1.0 - p)).ln(),
            Family::Laplace { location, scale } => {
                if p < 0.5 {
                    location + scale * (2.0 * p).ln()
                } else {
                    location - scale * (2.0 * (1.0 - p)).ln()
                }
            }
            Family::Cauchy { location, scale } => {
                if p == 0.0 {
                    f64::NEG_INFINITY
                } else if p == 1.0 {
                    f64::INFINITY
                } else {
                    location + scale * (PI * (p - 0.5)).tan()
                }
            }
            Family::Normal { mean, variance } => mean + variance.sqrt() * norm_quantile(p),
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
            Family::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Family::Gamma { .. } | Family::InverseGaussian { .. } => self.numeric_quantile(p, Some(0.0)),
            Family::NoisyLogistic { .. } => self.numeric_quantile(p, None),
            _ => unreachable!("quantile of a non-univariate family"),
        }
    }

    fn numeric_quantile(&self, p: f64, lower: Option<f64>) -> f64 {
        if p <= 0.0 {
            return lower.unwrap_or(f64::NEG_INFINITY);
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let f = |x: f64| self.cdf1(x);
        let (mut lo, mut hi) = match lower {
            Some(l) => (l, l + 1.0),
            None => (-1.0, 1.0),
        };
        if lower.is_none() {
            while f(lo) > p && lo > -1e300 {
                hi = lo;
                lo *= 2.0;
            }
        }
        while f(hi) < p && hi < 1e300 {
            lo = hi;
            hi *= 2.0;
        }
        bisect_increasing(f, p, lo, hi)
    }

    /// Appends one draw to `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match &self.family {
            Family::Logistic { .. }
            | Family::Laplace { .. }
            | Family::Cauchy { .. }
            | Family::Exponential { .. }
            | Family::Weibull { .. } => {
                let u = open01(rng);
                out.push(self.quantile_unchecked(u));
            }
            Family::Normal { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                out.push(mean + variance.sqrt() * z);
            }
            Family::Gamma { shape, rate } => {
                let g = Gamma::new(*shape, 1.0 / rate).expect("validated gamma parameters");
                out.push(g.sample(rng));
            }
            Family::InverseGaussian { mean, shape } => {
                let ig = InverseGaussian::new(*mean, *shape).expect("validated inverse Gaussian parameters");
                out.push(ig.sample(rng));
            }
            Family::NoisyLogistic { location, scale, noise_variance } => {
                let u = open01(rng);
                let z: f64 = rng.sample(StandardNormal);
                out.push(location + scale * (u / (1.0 - u)).ln() + noise_variance.sqrt() * z);
            }
            Family::BivariateNormal { mean, cov } => {
                let (l11, l21, l22) = cholesky2(cov);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                out.push(mean[0] + l11 * z1);
                out.push(mean[1] + l21 * z1 + l22 * z2);
            }
            Family::BivariateT { dof, location, scale } => {
                let (l11, l21, l22) = cholesky2(scale);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let nu = *dof as f64;
                let w = ChiSquared::new(nu).expect("validated degrees of freedom").sample(rng);
                let f = (w / nu).sqrt();
                out.push(location[0] + l11 * z1 / f);
                out.push(location[1] + (l21 * z1 + l22 * z2) / f);
            }
            Family::BivariateLogistic { loc1, scale1, loc2, scale2 } => {
                // X by marginal inversion; Y | X by inverting
                // F(y | x) = ((1 + a) / (1 + a + b))², a = e^{-x'}, b = e^{-y'}.
                let u1 = open01(rng);
                let u2 = open01(rng);
                let a = (1.0 - u1) / u1;
                let b = (1.0 + a) * (1.0 / u2.sqrt() - 1.0);
                out.push(loc1 - scale1 * a.ln());
                out.push(loc2 - scale2 * b.ln());
            }
            Family::Product(parts) => {
                for part in parts {
                    part.draw_into(rng, out);
                }
            }
            Family::PointMass(at) => out.extend_from_slice(at),
        }
    }

    /// `k` independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Sample {
        let mut values = Vec::with_capacity(k * self.dim);
        for _ in 0..k {
            self.draw_into(rng, &mut values);
        }
        Sample::from_raw(self.dim, values)
    }
}

/// Log-density at the left edge `0` of a `[0, ∞)` family whose density
/// behaves like `x^{shape-1}` there.
fn edge_density(shape: f64, ln_at_one: f64) -> f64 {
    if shape < 1.0 {
        f64::INFINITY
    } else if shape == 1.0 {
        ln_at_one
    } else {
        f64::NEG_INFINITY
    }
}

impl Cdf for DistributionSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cdf_at(&self, x: &[f64]) -> f64 {
        self.cdf_unchecked(x)
    }

    fn jump_coordinates(&self) -> Option<Vec<Vec<f64>>> {
        match &self.family {
            Family::PointMass(at) => Some(at.iter().map(|v| vec![*v]).collect()),
            _ => None,
        }
    }
}

/// `Σ α_i F_i` for components of a common dimension. Components are either
/// all continuous or all point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<DistributionSpec>,
    weights: WeightScheme,
    cumulative: Vec<f64>,
    dim: usize,
    discrete: bool,
}

impl MixtureSpec {
    pub fn new(components: Vec<DistributionSpec>, weights: WeightScheme) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Parameter("a mixture needs at least one component".into()));
        }
        if components.len() != weights.len() {
            return Err(Error::Parameter(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let dim = components[0].dim;
        if let Some(c) = components.iter().find(|c| c.dim != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: c.dim,
            });
        }
        let discrete = components[0].is_point_mass();
        if components.iter().any(|c| c.is_point_mass() != discrete) {
            return Err(Error::Parameter(
                "mixtures of point masses and continuous components are not supported".into(),
            ));
        }
        let cumulative = weights.cumulative();
        Ok(Self {
            components,
            weights,
            cumulative,
            dim,
            discrete,
        })
    }

    /// A single distribution viewed as a one-component mixture.
    pub fn single(spec: DistributionSpec) -> Self {
        Self::new(vec![spec], WeightScheme::uniform(1).expect("n = 1")).expect("single component")
    }

    pub fn components(&self) -> &[DistributionSpec] {
        &self.components
    }

    pub fn weights(&self) -> &WeightScheme {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// True when every component is a point mass.
    pub fn is_discrete(&self) -> bool {
        self.discrete
    }

    /// Atoms and their masses, for discrete mixtures.
    pub fn atoms(&self) -> Option<Vec<(&[f64], f64)>> {
        if !self.discrete {
            return None;
        }
        Some(
            self.components
                .iter()
                .zip(self.weights.as_slice())
                .map(|(c, w)| match &c.family {
                    Family::PointMass(at) => (at.as_slice(), *w),
                    _ => unreachable!(),
                })
                .collect(),
        )
    }

    pub fn cdf(&self, x: &[f64]) -> Result<f64> {
        self.components[0].check_dim(x)?;
        Ok(self.cdf_at(x))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.components[0].check_dim(x)?;
        if x.iter().any(|v| v.is_infinite()) {
            return Err(Error::Input("density is undefined at infinite coordinates".into()));
        }
        let mut terms = Vec::with_capacity(self.len());
        for (c, w) in self.components.iter().zip(self.weights.as_slice()) {
            if *w > 0.0 {
                terms.push(w.ln() + c.log_density_unchecked(x)?);
            }
        }
        Ok(log_sum_exp(terms))
    }

    /// Index of a component drawn with probabilities `α`.
    pub fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1)
    }

    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> usize {
        let i = self.draw_component(rng);
        self.components[i].draw_into(rng, out);
        i
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Sample {
        self.sample_traced(rng, k).0
    }

    /// `k` draws together with the component index behind each draw.
    pub fn sample_traced<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> (Sample, Vec<usize>) {
        let mut values = Vec::with_capacity(k * self.dim);
        let mut trace = Vec::with_capacity(k);
        for _ in 0..k {
            trace.push(self.draw_into(rng, &mut values));
        }
        (Sample::from_raw(self.dim, values), trace)
    }
}

impl Cdf for MixtureSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cdf_at(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (c, w) in self.components.iter().zip(self.weights.as_slice()) {
            if *w > 0.0 {
                s += w * c.cdf_unchecked(x);
            }
        }
        s.clamp(0.0, 1.0)
    }

    fn jump_coordinates(&self) -> Option<Vec<Vec<f64>>> {
        let atoms = self.atoms()?;
        Some(
            (0..self.dim)
                .map(|j| atoms.iter().map(|(p, _)| p[j]).collect())
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn univariate_catalogue() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::logistic(0.3, 1.2).unwrap(),
            DistributionSpec::laplace(-1.0, 0.5).unwrap(),
            DistributionSpec::cauchy(1.5, 2.5).unwrap(),
            DistributionSpec::normal(0.5, 1.7).unwrap(),
            DistributionSpec::exponential(1.3).unwrap(),
            DistributionSpec::weibull(1.5, 0.7).unwrap(),
            DistributionSpec::weibull(0.6, 2.0).unwrap(),
            DistributionSpec::gamma(0.5, 0.8).unwrap(),
            DistributionSpec::gamma(3.0, 2.0).unwrap(),
            DistributionSpec::inverse_gaussian(2.0 / 3.0, 1.5).unwrap(),
            DistributionSpec::inverse_gaussian(2.0, 1.2).unwrap(),
            DistributionSpec::new(Family::NoisyLogistic {
                location: 0.2,
                scale: 1.0,
                noise_variance: 0.3,
            })
            .unwrap(),
        ]
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let x = a + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn spot_values() {
        assert_eq!(DistributionSpec::logistic(0.0, 1.0).unwrap().cdf(&[0.0]).unwrap(), 0.5);
        let e1 = DistributionSpec::exponential(1.0).unwrap();
        assert_eq!(e1.cdf(&[f64::INFINITY]).unwrap(), 1.0);
        assert_eq!(e1.log_density(&[0.0]).unwrap(), 0.0);
        assert_eq!(e1.log_density(&[-1.0]).unwrap(), f64::NEG_INFINITY);
        assert!(e1.log_density(&[f64::INFINITY]).is_err());
        assert!(e1.cdf(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn exponential_mixture() {
        let m = MixtureSpec::new(
            vec![DistributionSpec::exponential(1.0).unwrap(), DistributionSpec::exponential(2.0).unwrap()],
            WeightScheme::uniform(2).unwrap(),
        )
        .unwrap();
        let x = 2f64.ln();
        assert_relative_eq!(m.cdf(&[x]).unwrap(), 0.625, epsilon = 1e-15);
        // Oracle: integrate the mixture density.
        let dens = |t: f64| 0.5 * (-t).exp() + (-2.0 * t).exp();
        assert_relative_eq!(simpson(&dens, 0.0, x, 2000), 0.625, epsilon = 1e-12);
        let ld = m.log_density(&[1.0]).unwrap();
        assert_relative_eq!(ld, (0.5 * (-1f64).exp() + (-2f64).exp()).ln(), epsilon = 1e-14);
        // Finite-difference of the CDF.
        let h = 1e-5;
        let fd = (m.cdf(&[1.0 + h]).unwrap() - m.cdf(&[1.0 - h]).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd.ln(), ld, epsilon = 1e-8);
    }

    #[test]
    fn invalid_parameters() {
        assert!(DistributionSpec::logistic(0.0, 0.0).is_err());
        assert!(DistributionSpec::normal(f64::NAN, 1.0).is_err());
        assert!(DistributionSpec::gamma(-1.0, 1.0).is_err());
        assert!(DistributionSpec::new(Family::BivariateNormal {
            mean: [0.0, 0.0],
            cov: [[1.0, 2.0], [2.0, 1.0]]
        })
        .is_err());
        assert!(DistributionSpec::new(Family::BivariateNormal {
            mean: [0.0, 0.0],
            cov: [[1.0, 0.5], [0.4, 1.0]]
        })
        .is_err());
    }

    #[test]
    fn monotone_and_limits() {
        let grid: Vec<f64> = (-200..=200).map(|k| k as f64 * 0.05).collect();
        for d in univariate_catalogue() {
            let mut prev = 0.0;
            for &x in &grid {
                let v = d.cdf(&[x]).unwrap();
                assert!(v >= prev - 1e-15, "{d:?} not monotone at {x}");
                assert!((0.0..=1.0).contains(&v));
                prev = v;
            }
            assert_eq!(d.cdf(&[f64::NEG_INFINITY]).unwrap(), 0.0, "{d:?}");
            assert_relative_eq!(d.cdf(&[f64::INFINITY]).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cdf_of_quantile_is_identity() {
        for d in univariate_catalogue() {
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let x = d.quantile(p).unwrap();
                assert!((d.cdf(&[x]).unwrap() - p).abs() < 1e-9, "{d:?} at p={p}");
            }
        }
    }

    #[test]
    fn densities_integrate_to_cdf() {
        for d in univariate_catalogue() {
            let a = d.quantile(0.2).unwrap();
            let b = d.quantile(0.7).unwrap();
            let f = |t: f64| d.log_density(&[t]).unwrap().exp();
            let mass = simpson(&f, a, b, 4000);
            assert!((mass - 0.5).abs() < 1e-7, "{d:?}: {mass}");
        }
    }

    fn dkw_sup(d: &DistributionSpec, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = d.sample(&mut rng, 10_000);
        let mut xs = s.column(0);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                let u = d.cdf(&[*x]).unwrap();
                (u - i as f64 / n).abs().max(((i + 1) as f64 / n - u).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sampling_matches_cdf() {
        // DKW: P(sup > ε) ≤ 2 exp(-2nε²); ε = 0.02, n = 10⁴ gives < 0.001.
        for (k, d) in univariate_catalogue().iter().enumerate() {
            let sup = dkw_sup(d, 100 + k as u64);
            assert!(sup < 0.02, "{d:?}: {sup}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = MixtureSpec::new(
            vec![DistributionSpec::normal(0.0, 1.0).unwrap(), DistributionSpec::gamma(2.0, 1.0).unwrap()],
            WeightScheme::new(vec![0.3, 0.7]).unwrap(),
        )
        .unwrap();
        let a = m.sample(&mut ChaCha8Rng::seed_from_u64(9), 100);
        let b = m.sample(&mut ChaCha8Rng::seed_from_u64(9), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_mixture_weights() {
        let m = MixtureSpec::new(
            vec![DistributionSpec::normal(0.0, 1.0).unwrap(), DistributionSpec::normal(5.0, 1.0).unwrap()],
            WeightScheme::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let (_, trace) = m.sample_traced(&mut ChaCha8Rng::seed_from_u64(3), 500);
        assert!(trace.iter().all(|&i| i == 0));
    }

    fn bivariate_catalogue() -> Vec<(DistributionSpec, DistributionSpec, DistributionSpec)> {
        vec![
            (
                DistributionSpec::new(Family::BivariateNormal {
                    mean: [0.5, -0.2],
                    cov: [[2.0, 1.0], [1.0, 2.0]],
                })
                .unwrap(),
                DistributionSpec::normal(0.5, 2.0).unwrap(),
                DistributionSpec::normal(-0.2, 2.0).unwrap(),
            ),
            (
                DistributionSpec::new(Family::BivariateT {
                    dof: 1,
                    location: [0.3, 0.3],
                    scale: [[2.0, 1.0], [1.0, 2.0]],
                })
                .unwrap(),
                DistributionSpec::cauchy(0.3, 2f64.sqrt()).unwrap(),
                DistributionSpec::cauchy(0.3, 2f64.sqrt()).unwrap(),
            ),
            (
                DistributionSpec::new(Family::BivariateLogistic {
                    loc1: 0.7,
                    scale1: 1.0,
                    loc2: -0.4,
                    scale2: 2.0,
                })
                .unwrap(),
                DistributionSpec::logistic(0.7, 1.0).unwrap(),
                DistributionSpec::logistic(-0.4, 2.0).unwrap(),
            ),
        ]
    }

    #[test]
    fn bivariate_marginals() {
        for (joint, m1, m2) in bivariate_catalogue() {
            for k in -20..=20 {
                let x = k as f64 * 0.4;
                let a = joint.cdf(&[x, f64::INFINITY]).unwrap();
                let b = joint.cdf(&[f64::INFINITY, x]).unwrap();
                assert!((a - m1.cdf(&[x]).unwrap()).abs() < 1e-9, "{joint:?} at {x}");
                assert!((b - m2.cdf(&[x]).unwrap()).abs() < 1e-9, "{joint:?} at {x}");
            }
            assert_eq!(joint.cdf(&[f64::NEG_INFINITY, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn bivariate_sampling_matches_cdf() {
        let pts = [[-1.0, -1.0], [0.0, 0.5], [1.0, 0.0], [2.0, 2.0], [0.3, -0.5]];
        for (k, (joint, _, _)) in bivariate_catalogue().into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
            let s = joint.sample(&mut rng, 20_000);
            for p in &pts {
                let freq = s.points().filter(|x| x[0] <= p[0] && x[1] <= p[1]).count() as f64 / 20_000.0;
                let exact = joint.cdf(p).unwrap();
                // 5 binomial standard errors at worst-case variance.
                assert!((freq - exact).abs() < 5.0 * 0.5 / 20_000f64.sqrt(), "{joint:?} at {p:?}");
            }
        }
    }

    #[test]
    fn bivariate_densities_match_mixed_partials() {
        let h = 1e-4;
        for (joint, _, _) in bivariate_catalogue() {
            for p in [[0.1, 0.2], [-0.8, 1.1], [1.5, -0.3]] {
                let f = |a: f64, b: f64| joint.cdf(&[a, b]).unwrap();
                let fd = (f(p[0] + h, p[1] + h) - f(p[0] + h, p[1] - h) - f(p[0] - h, p[1] + h)
                    + f(p[0] - h, p[1] - h))
                    / (4.0 * h * h);
                let d = joint.log_density(&p).unwrap().exp();
                assert!((fd - d).abs() < 1e-5 * d.max(1.0), "{joint:?} at {p:?}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn product_and_point_mass() {
        let prod = DistributionSpec::product(vec![
            DistributionSpec::normal(0.0, 1.0).unwrap(),
            DistributionSpec::logistic(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(prod.dim(), 2);
        assert_relative_eq!(prod.cdf(&[0.0, 0.0]).unwrap(), 0.25, epsilon = 1e-15);
        let p = DistributionSpec::point_mass(vec![1.0, 2.0]).unwrap();
        assert_eq!(p.cdf(&[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(p.cdf(&[1.0, 1.9]).unwrap(), 0.0);
        assert!(p.log_density(&[1.0, 2.0]).is_err());
        let mixed = MixtureSpec::new(
            vec![DistributionSpec::point_mass(vec![0.0]).unwrap(), DistributionSpec::normal(0.0, 1.0).unwrap()],
            WeightScheme::uniform(2).unwrap(),
        );
        assert!(mixed.is_err());
    }

    #[test]
    fn mixture_is_weighted_sum() {
        let comps = univariate_catalogue();
        let n = comps.len();
        let w = WeightScheme::linear(n).unwrap();
        let m = MixtureSpec::new(comps.clone(), w.clone()).unwrap();
        for k in -30..=30 {
            let x = k as f64 * 0.3;
            let direct: f64 = comps.iter().zip(w.as_slice()).map(|(c, a)| a * c.cdf(&[x]).unwrap()).sum();
            assert!((m.cdf(&[x]).unwrap() - direct).abs() < 1e-12);
        }
    }
}
