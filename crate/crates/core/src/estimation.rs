//! Weighted maximum-likelihood estimation: `θ̂ = argmax Σ_i α_i log h_n(x_i, θ)`
//! where `h_n(·, θ)` is the density of the mixture `G_n(·, θ)`.

use crate::distributions::{DistributionSpec, MixtureSpec};
use crate::expr::Expr;
use crate::numeric::neumaier_sum;
use crate::weights::WeightScheme;
use crate::{Error, Result, Sample};

/// `|Δθ|` tolerance relative to `1 + |θ|`.
pub const THETA_TOLERANCE: f64 = 1e-8;

/// A family `θ ↦ G_n(·, θ)` of mixtures indexed by a parameter in a box.
pub trait ParametricFamily: Send + Sync {
    fn name(&self) -> String;

    /// Dimension `m` of the observations.
    fn dim(&self) -> usize;

    /// Open box bounds `(lower, upper)` per parameter coordinate, for `n`
    /// observations.
    fn bounds(&self, n: usize) -> Vec<(f64, f64)>;

    /// `G_n(·, θ)` with mixture weights `weights`.
    fn mixture(&self, theta: &[f64], weights: &WeightScheme) -> Result<MixtureSpec>;

    /// Starting point for the optimizer; must lie inside the bounds.
    fn initial_guess(&self, data: &Sample, weights: &WeightScheme) -> Vec<f64>;

    /// The weighted log-likelihood of `data`, with whatever precomputation
    /// the family can do once per data set. The default evaluates the
    /// mixture log-density for every `θ`.
    fn log_likelihood<'a>(&'a self, data: &'a Sample, weights: &'a WeightScheme) -> Box<dyn LogLikelihood + 'a> {
        Box::new(MixtureLogLikelihood {
            family: self,
            data,
            weights,
        })
    }
}

pub trait LogLikelihood {
    fn value(&self, theta: &[f64]) -> f64;

    /// Analytic gradient, when available.
    fn gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

struct MixtureLogLikelihood<'a, F: ?Sized> {
    family: &'a F,
    data: &'a Sample,
    weights: &'a WeightScheme,
}

impl<F: ParametricFamily + ?Sized> LogLikelihood for MixtureLogLikelihood<'_, F> {
    fn value(&self, theta: &[f64]) -> f64 {
        let Ok(g) = self.family.mixture(theta, self.weights) else {
            return f64::NEG_INFINITY;
        };
        let mut terms = Vec::with_capacity(self.data.len());
        for (x, a) in self.data.points().zip(self.weights.as_slice()) {
            if *a > 0.0 {
                match g.log_density(x) {
                    Ok(v) => terms.push(a * v),
                    Err(_) => return f64::NEG_INFINITY,
                }
            }
        }
        neumaier_sum(terms)
    }
}

/// Gradient of `ll` at `theta`: analytic when available, else central
/// differences with step `1e-6 (1 + |θ_k|)`.
pub fn score(ll: &dyn LogLikelihood, theta: &[f64]) -> Result<Vec<f64>> {
    if !ll.value(theta).is_finite() {
        return Err(Error::Estimation(format!("log-likelihood is not finite at θ = {theta:?}")));
    }
    if let Some(g) = ll.gradient(theta) {
        return Ok(g);
    }
    Ok(finite_difference(ll, theta))
}

fn finite_difference(ll: &dyn LogLikelihood, theta: &[f64]) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            let h = 1e-6 * (1.0 + theta[k].abs());
            t[k] = theta[k] + h;
            let up = ll.value(&t);
            t[k] = theta[k] - h;
            let down = ll.value(&t);
            t[k] = theta[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    /// Euclidean norm of the score at `theta`.
    pub score_norm: f64,
    /// True when the maximizer sits on a finite bound of the box.
    pub at_boundary: bool,
    pub iterations: usize,
}

/// Maximizes the weighted log-likelihood of `data` over the family's box.
pub fn weighted_mle(family: &dyn ParametricFamily, data: &Sample, weights: &WeightScheme) -> Result<MleFit> {
    if data.len() != weights.len() {
        return Err(Error::Weights(format!(
            "{} weights for {} observations",
            weights.len(),
            data.len()
        )));
    }
    if data.dim() != family.dim() {
        return Err(Error::Dimension {
            expected: family.dim(),
            got: data.dim(),
        });
    }
    let bounds = family.bounds(data.len());
    let ll = family.log_likelihood(data, weights);
    let mut theta = family.initial_guess(data, weights);
    if !ll.value(&theta).is_finite() {
        return Err(Error::Estimation(format!(
            "log-likelihood of family `{}` is not finite at the starting point {theta:?}; \
             data may lie outside the support",
            family.name()
        )));
    }
    let d = theta.len();
    let mut at_boundary = vec![false; d];
    let mut iterations = 0;
    for sweep in 0..200 {
        iterations = sweep + 1;
        let mut converged = true;
        for k in 0..d {
            let map = Transform::new(bounds[k]);
            let mut probe = theta.clone();
            let f = |t: f64| {
                probe[k] = map.forward(t);
                let v = ll.value(&probe);
                if v.is_nan() { f64::NEG_INFINITY } else { v }
            };
            let (t_best, edge) = maximize_unbounded(f, map.inverse(theta[k]));
            let mut snapped = false;
            let new = match edge {
                Edge::None => {
                    let x = map.forward(t_best);
                    match snap_to_bound(ll.as_ref(), &theta, k, x, bounds[k]) {
                        Some(b) => {
                            snapped = true;
                            b
                        }
                        None => x,
                    }
                }
                Edge::Lower if bounds[k].0.is_finite() => {
                    snapped = true;
                    bounds[k].0
                }
                Edge::Upper if bounds[k].1.is_finite() => {
                    snapped = true;
                    bounds[k].1
                }
                _ => {
                    return Err(Error::Estimation(format!(
                        "log-likelihood of family `{}` increases without bound in parameter {}",
                        family.name(),
                        k + 1
                    )))
                }
            };
            at_boundary[k] = snapped;
            if (new - theta[k]).abs() > THETA_TOLERANCE * (1.0 + theta[k].abs()) {
                converged = false;
            }
            theta[k] = new;
        }
        if converged || d == 1 {
            break;
        }
    }
    if d == 1 && !at_boundary[0] {
        polish_1d(ll.as_ref(), &mut theta, bounds[0]);
    }
    let log_likelihood = ll.value(&theta);
    let boundary = at_boundary.iter().any(|b| *b);
    let score_norm = if boundary {
        f64::NAN
    } else {
        score(ll.as_ref(), &theta)?.iter().map(|g| g * g).sum::<f64>().sqrt()
    };
    if !log_likelihood.is_finite() {
        return Err(Error::Estimation(format!(
            "optimizer for family `{}` ended at a non-finite log-likelihood",
            family.name()
        )));
    }
    Ok(MleFit {
        theta,
        log_likelihood,
        score_norm,
        at_boundary: boundary,
        iterations,
    })
}

/// A finite bound within `1e-6` (relative) of `x` at which the likelihood is
/// not smaller than at `x`, up to rounding.
fn snap_to_bound(ll: &dyn LogLikelihood, theta: &[f64], k: usize, x: f64, (lo, hi): (f64, f64)) -> Option<f64> {
    let mut probe = theta.to_vec();
    probe[k] = x;
    let at_x = ll.value(&probe);
    [lo, hi].into_iter().filter(|b| b.is_finite()).find(|&b| {
        probe[k] = b;
        (x - b).abs() <= 1e-6 * (1.0 + b.abs()) && ll.value(&probe) >= at_x - 1e-12 * (1.0 + at_x.abs())
    })
}

/// Refines a one-dimensional maximizer by root-finding on the analytic score.
fn polish_1d(ll: &dyn LogLikelihood, theta: &mut [f64], (lo_bound, hi_bound): (f64, f64)) {
    let g = |t: f64| ll.gradient(&[t]).map(|v| v[0]);
    let Some(g0) = g(theta[0]) else { return };
    if g0 == 0.0 || !g0.is_finite() {
        return;
    }
    let t0 = theta[0];
    let mut step = 1e-6 * (1.0 + t0.abs());
    let (mut a, mut b) = (t0, t0);
    for _ in 0..60 {
        if g0 > 0.0 {
            b = (t0 + step).min(next_inside(hi_bound, t0, false));
        } else {
            a = (t0 - step).max(next_inside(lo_bound, t0, true));
        }
        let (ga, gb) = (g(a).unwrap_or(f64::NAN), g(b).unwrap_or(f64::NAN));
        if ga >= 0.0 && gb <= 0.0 && a < b {
            if let Some(root) = brent_root(|t| g(t).unwrap_or(f64::NAN), a, b) {
                if ll.value(&[root]) >= ll.value(theta) - 1e-12 * ll.value(theta).abs() {
                    theta[0] = root;
                }
            }
            return;
        }
        step *= 4.0;
    }
}

/// A point strictly inside `(bound, from)` (or `(from, bound)`), close to the bound.
fn next_inside(bound: f64, from: f64, lower: bool) -> f64 {
    if !bound.is_finite() {
        return if lower { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let gap = (from - bound).abs();
    if lower {
        bound + gap * 1e-12
    } else {
        bound - gap * 1e-12
    }
}

/// Bijection between `ℝ` and an open interval.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Identity,
    Lower(f64),
    Upper(f64),
    Both(f64, f64),
}

impl Transform {
    fn new((lo, hi): (f64, f64)) -> Self {
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => Transform::Identity,
            (true, false) => Transform::Lower(lo),
            (false, true) => Transform::Upper(hi),
            (true, true) => Transform::Both(lo, hi),
        }
    }

    fn forward(self, t: f64) -> f64 {
        match self {
            Transform::Identity => t,
            Transform::Lower(l) => l + t.exp(),
            Transform::Upper(u) => u - (-t).exp(),
            Transform::Both(l, u) => l + (u - l) / (1.0 + (-t).exp()),
        }
    }

    fn inverse(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Lower(l) => (x - l).ln(),
            Transform::Upper(u) => -(u - x).ln(),
            Transform::Both(l, u) => {
                let p = (x - l) / (u - l);
                (p / (1.0 - p)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    None,
    Lower,
    Upper,
}

/// Maximizes `f` over `ℝ` starting from `t0`: bracket by expansion, then
/// Brent's parabolic/golden-section search.
fn maximize_unbounded(f: impl FnMut(f64) -> f64, t0: f64) -> (f64, Edge) {
    const LIMIT: f64 = 60.0;
    let mut f = f;
    let mut a = t0;
    let mut fa = f(a);
    let mut b = t0 + 0.5;
    let mut fb = f(b);
    if fb < fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    loop {
        let c = b + 2.0 * (b - a);
        let fc = f(c);
        if fc < fb {
            let (lo, hi) = if a < c { (a, c) } else { (c, a) };
            return (brent_max(&mut f, lo, b, hi, fb), Edge::None);
        }
        if (c - t0).abs() > LIMIT {
            return (c, if c > t0 { Edge::Upper } else { Edge::Lower });
        }
        a = b;
        b = c;
        fb = fc;
    }
}

/// Brent's method for a maximum of `f` in `[lo, hi]` with interior `b`.
fn brent_max(f: &mut impl FnMut(f64) -> f64, mut lo: f64, b: f64, mut hi: f64, fb: f64) -> f64 {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (-fb, -fb, -fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let xm = 0.5 * (lo + hi);
        let tol1 = 1e-11 * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = -f(u);
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            (v, w, x) = (w, x, u);
            (fv, fw, fx) = (fw, fx, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, w) = (w, u);
                (fv, fw) = (fw, fu);
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    x
}

/// Brent's root finder on a sign-changing bracket.
fn brent_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            (a, b, c) = (b, c, b);
            (fa, fb, fc) = (fb, fc, fb);
        }
        let tol = 2.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return None;
        }
    }
    Some(b)
}

/// `G_n(·, θ) = Σ α_i Exp(θ + μ_i)` with a known shift sequence `μ_i`.
#[derive(Debug, Clone)]
pub struct ExpShifted {
    shift: Expr,
}

impl ExpShifted {
    /// `shift` is an expression in `i`, e.g. `"1/sqrt(i)"` or `"0"`.
    pub fn new(shift: &str) -> Result<Self> {
        Ok(Self {
            shift: Expr::parse(shift)?,
        })
    }

    pub fn shifts(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.shift.eval(i)).collect()
    }

    fn lower_bound(shifts: &[f64]) -> f64 {
        let min = shifts.iter().copied().fold(f64::INFINITY, f64::min);
        (-min).max(0.0)
    }
}

impl ParametricFamily for ExpShifted {
    fn name(&self) -> String {
        format!("exp-shifted({})", self.shift)
    }

    fn dim(&self) -> usize {
        1
    }

    fn bounds(&self, n: usize) -> Vec<(f64, f64)> {
        vec![(Self::lower_bound(&self.shifts(n)), f64::INFINITY)]
    }

    fn mixture(&self, theta: &[f64], weights: &WeightScheme) -> Result<MixtureSpec> {
        let comps = self
            .shifts(weights.len())
            .into_iter()
            .map(|mu| DistributionSpec::exponential(theta[0] + mu))
            .collect::<Result<Vec<_>>>()?;
        MixtureSpec::new(comps, weights.clone())
    }

    fn initial_guess(&self, data: &Sample, weights: &WeightScheme) -> Vec<f64> {
        let shifts = self.shifts(weights.len());
        let xbar = neumaier_sum(data.values().iter().zip(weights.as_slice()).map(|(x, a)| a * x));
        let mubar = neumaier_sum(shifts.iter().zip(weights.as_slice()).map(|(m, a)| a * m));
        let lower = Self::lower_bound(&shifts);
        let guess = (1.0 / xbar - mubar).max(0.01);
        vec![if guess.is_finite() && guess > lower { guess } else { lower + 0.01 + lower.abs() * 0.01 }]
    }

    fn log_likelihood<'a>(&'a self, data: &'a Sample, weights: &'a WeightScheme) -> Box<dyn LogLikelihood + 'a> {
        Box::new(ExpShiftedLogLikelihood::new(&self.shifts(weights.len()), data.values(), weights))
    }
}

/// With `A_j = Σ_i α_i e^{−μ_i x_j}` and `B_j = Σ_i α_i μ_i e^{−μ_i x_j}`,
/// `h(x_j) = e^{−θ x_j} (θ A_j + B_j)`, so each evaluation is `O(n)`.
struct ExpShiftedLogLikelihood {
    x: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    alpha: Vec<f64>,
    outside: bool,
}

impl ExpShiftedLogLikelihood {
    fn new(shifts: &[f64], x: &[f64], weights: &WeightScheme) -> Self {
        let alpha = weights.as_slice();
        let mut a = Vec::with_capacity(x.len());
        let mut b = Vec::with_capacity(x.len());
        for xj in x {
            a.push(neumaier_sum(shifts.iter().zip(alpha).map(|(m, w)| w * (-m * xj).exp())));
            b.push(neumaier_sum(shifts.iter().zip(alpha).map(|(m, w)| w * m * (-m * xj).exp())));
        }
        let outside = x.iter().zip(alpha).any(|(xj, w)| *w > 0.0 && *xj < 0.0);
        Self {
            x: x.to_vec(),
            a,
            b,
            alpha: alpha.to_vec(),
            outside,
        }
    }
}

impl LogLikelihood for ExpShiftedLogLikelihood {
    fn value(&self, theta: &[f64]) -> f64 {
        if self.outside {
            return f64::NEG_INFINITY;
        }
        let t = theta[0];
        let mut terms = Vec::with_capacity(self.x.len());
        for j in 0..self.x.len() {
            if self.alpha[j] > 0.0 {
                let inner = t * self.a[j] + self.b[j];
                if inner <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                terms.push(self.alpha[j] * (inner.ln() - t * self.x[j]));
            }
        }
        neumaier_sum(terms)
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let t = theta[0];
        let g = neumaier_sum(
            (0..self.x.len())
                .filter(|j| self.alpha[*j] > 0.0)
                .map(|j| self.alpha[j] * (self.a[j] / (t * self.a[j] + self.b[j]) - self.x[j])),
        );
        Some(vec![g])
    }
}

/// `G_n(·, θ) = N(μ, v)` for every index, `θ = (μ, v)` with `v` the variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalFamily;

impl ParametricFamily for NormalFamily {
    fn name(&self) -> String {
        "normal".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn bounds(&self, _n: usize) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)]
    }

    fn mixture(&self, theta: &[f64], weights: &WeightScheme) -> Result<MixtureSpec> {
        let d = DistributionSpec::normal(theta[0], theta[1])?;
        MixtureSpec::new(vec![d; weights.len()], weights.clone())
    }

    fn initial_guess(&self, data: &Sample, _weights: &WeightScheme) -> Vec<f64> {
        let xs = data.values();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        vec![mean, if var > 0.0 { var } else { 1.0 }]
    }

    fn log_likelihood<'a>(&'a self, data: &'a Sample, weights: &'a WeightScheme) -> Box<dyn LogLikelihood + 'a> {
        Box::new(NormalLogLikelihood {
            x: data.values(),
            alpha: weights.as_slice(),
        })
    }
}

struct NormalLogLikelihood<'a> {
    x: &'a [f64],
    alpha: &'a [f64],
}

impl LogLikelihood for NormalLogLikelihood<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        let (m, v) = (theta[0], theta[1]);
        if v.is_nan() || v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let ss = neumaier_sum(self.x.iter().zip(self.alpha).map(|(x, a)| a * (x - m).powi(2)));
        -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * ss / v
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let (m, v) = (theta[0], theta[1]);
        let s1 = neumaier_sum(self.x.iter().zip(self.alpha).map(|(x, a)| a * (x - m)));
        let s2 = neumaier_sum(self.x.iter().zip(self.alpha).map(|(x, a)| a * (x - m).powi(2)));
        Some(vec![s1 / v, -0.5 / v + 0.5 * s2 / (v * v)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit(shift: &str, xs: &[f64], w: &WeightScheme) -> MleFit {
        let fam = ExpShifted::new(shift).unwrap();
        weighted_mle(&fam, &Sample::from_1d(xs.to_vec()).unwrap(), w).unwrap()
    }

    #[test]
    fn exponential_closed_form() {
        let f = fit("0", &[1.0, 3.0], &WeightScheme::uniform(2).unwrap());
        assert_relative_eq!(f.theta[0], 0.5, epsilon = 1e-12);
        assert!(f.score_norm <= 1e-10);
        assert!(!f.at_boundary);
    }

    #[test]
    fn degenerate_weights() {
        let f = fit("0", &[2.5, 0.1], &WeightScheme::new(vec![1.0, 0.0]).unwrap());
        assert_relative_eq!(f.theta[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn score_examples() {
        let fam = ExpShifted::new("0").unwrap();
        let s = Sample::from_1d(vec![1.0, 3.0]).unwrap();
        let w = WeightScheme::uniform(2).unwrap();
        let ll = fam.log_likelihood(&s, &w);
        assert_relative_eq!(score(ll.as_ref(), &[1.0]).unwrap()[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(finite_difference(ll.as_ref(), &[1.0])[0], -1.0, epsilon = 1e-8);
    }

    #[test]
    fn shifted_grid_oracle() {
        // μ = (0, 1), data {1, 1}: grid search over (0, 20] with step 1e-5.
        let f = fit("i - 1", &[1.0, 1.0], &WeightScheme::uniform(2).unwrap());
        let ll = |t: f64| (0.5 * (t * (-t).exp() + (t + 1.0) * (-(t + 1.0)).exp())).ln();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 1..=2_000_000 {
            let t = k as f64 * 1e-5;
            let v = ll(t);
            if v > best.0 {
                best = (v, t);
            }
        }
        assert!((f.theta[0] - best.1).abs() < 1e-4, "{} vs {}", f.theta[0], best.1);
        assert!(f.score_norm <= 1e-6);
    }

    #[test]
    fn normal_family_matches_closed_form() {
        let xs = [0.3, -1.2, 2.2, 0.7, 0.0, 1.1];
        let w = WeightScheme::new(vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2]).unwrap();
        let f = weighted_mle(&NormalFamily, &Sample::from_1d(xs.to_vec()).unwrap(), &w).unwrap();
        let mean: f64 = xs.iter().zip(w.as_slice()).map(|(x, a)| a * x).sum();
        let var: f64 = xs.iter().zip(w.as_slice()).map(|(x, a)| a * (x - mean).powi(2)).sum();
        assert_relative_eq!(f.theta[0], mean, epsilon = 1e-7);
        assert_relative_eq!(f.theta[1], var, epsilon = 1e-7);
        assert!(f.score_norm < 1e-6, "{}", f.score_norm);
    }

    #[test]
    fn failures_are_reported() {
        let fam = ExpShifted::new("0").unwrap();
        let w = WeightScheme::uniform(2).unwrap();
        let neg = Sample::from_1d(vec![-1.0, 2.0]).unwrap();
        assert!(matches!(weighted_mle(&fam, &neg, &w), Err(Error::Estimation(_))));
        let zeros = Sample::from_1d(vec![0.0, 0.0]).unwrap();
        assert!(matches!(weighted_mle(&fam, &zeros, &w), Err(Error::Estimation(_))));
    }

    #[test]
    fn boundary_maximizer_is_flagged() {
        // Rate θ + 1 with mean 5 data: the unconstrained maximizer is θ = −0.8.
        let f = fit("1", &[5.0, 5.0], &WeightScheme::uniform(2).unwrap());
        assert!(f.at_boundary);
        assert_eq!(f.theta[0], 0.0);
    }

    #[test]
    fn large_sample_recovery() {
        let fam = ExpShifted::new("1/sqrt(i)").unwrap();
        let w = WeightScheme::uniform(2000).unwrap();
        let g = fam.mixture(&[2.0], &w).unwrap();
        let data = g.sample(&mut ChaCha8Rng::seed_from_u64(8), 2000);
        let f = weighted_mle(&fam, &data, &w).unwrap();
        assert!((f.theta[0] - 2.0).abs() < 0.1, "{}", f.theta[0]);
    }

    proptest! {
        #[test]
        fn analytic_score_matches_differences(xs in proptest::collection::vec(0.01f64..5.0, 1..20), t in 0.05f64..5.0) {
            let fam = ExpShifted::new("1/log(i+1)").unwrap();
            let s = Sample::from_1d(xs.clone()).unwrap();
            let w = WeightScheme::uniform(xs.len()).unwrap();
            let ll = fam.log_likelihood(&s, &w);
            let a = ll.gradient(&[t]).unwrap()[0];
            let fd = finite_difference(ll.as_ref(), &[t])[0];
            prop_assert!((a - fd).abs() <= 1e-5 * a.abs().max(1.0));
            // The generic mixture density agrees with the precomputed form.
            let generic = MixtureLogLikelihood { family: &fam, data: &s, weights: &w };
            prop_assert!((generic.value(&[t]) - ll.value(&[t])).abs() < 1e-10);
        }

        #[test]
        fn score_brackets_the_estimate(xs in proptest::collection::vec(0.01f64..5.0, 2..20)) {
            let w = WeightScheme::uniform(xs.len()).unwrap();
            let f = fit("1/i", &xs, &w);
            prop_assume!(!f.at_boundary);
            let fam = ExpShifted::new("1/i").unwrap();
            let s = Sample::from_1d(xs.clone()).unwrap();
            let ll = fam.log_likelihood(&s, &w);
            let t = f.theta[0];
            prop_assert!(ll.gradient(&[t * 0.9]).unwrap()[0] > 0.0);
            prop_assert!(ll.gradient(&[t * 1.1]).unwrap()[0] < 0.0);
            prop_assert!(f.score_norm <= 1e-6);
        }

        #[test]
        fn estimate_is_permutation_invariant(xs in proptest::collection::vec(0.01f64..5.0, 2..20)) {
            let w = WeightScheme::uniform(xs.len()).unwrap();
            let a = fit("0", &xs, &w).theta[0];
            let mut ys = xs.clone();
            ys.reverse();
            let b = fit("0", &ys, &w).theta[0];
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }
    }
}
