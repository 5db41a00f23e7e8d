//! Weighted empirical distribution functions `F̂(x) = Σ α_i I(X_i ≤ x)`,
//! sup-distances and Cramér–von-Mises integrals.
//!
//! Inequalities between points are componentwise. With uniform weights the
//! function is evaluated by counting, so its values do not depend on the
//! order of the observations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{Cdf, MixtureSpec};
use crate::numeric::{canonical_sum, neumaier_sum};
use crate::weights::WeightScheme;
use crate::{Error, Result, Sample};

/// Largest evaluation grid accepted by [`ks_sup`] in dimension `m ≥ 2`.
pub const MAX_GRID_POINTS: usize = 50_000_000;

/// Distinct sorted atoms of a one-dimensional sample with cumulative weights.
#[derive(Debug, Clone, PartialEq)]
struct Sorted1d {
    atoms: Vec<f64>,
    /// `W_k`: total weight of observations `≤ atoms[k]`.
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEcdf {
    sample: Sample,
    weights: WeightScheme,
    sorted: Option<Sorted1d>,
}

impl WeightedEcdf {
    pub fn new(sample: Sample, weights: WeightScheme) -> Result<Self> {
        if sample.len() != weights.len() {
            return Err(Error::Weights(format!(
                "{} weights for {} observations",
                weights.len(),
                sample.len()
            )));
        }
        let sorted = (sample.dim() == 1).then(|| sort_1d(sample.values(), &weights));
        Ok(Self {
            sample,
            weights,
            sorted,
        })
    }

    pub fn uniform(sample: Sample) -> Result<Self> {
        let w = WeightScheme::uniform(sample.len())?;
        Self::new(sample, w)
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn weights(&self) -> &WeightScheme {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sample.dim()
    }

    /// `(X_i, α_i)` pairs, i.e. the atoms of the measure `dF̂`.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.sample.points().zip(self.weights.as_slice().iter().copied())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("NaN evaluation point".into()));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        if let Some(s) = &self.sorted {
            let k = s.atoms.partition_point(|a| *a <= x[0]);
            return if k == 0 { 0.0 } else { s.cumulative[k - 1] };
        }
        let below = |p: &[f64]| p.iter().zip(x).all(|(a, b)| a <= b);
        if self.weights.is_uniform() {
            let count = self.sample.points().filter(|p| below(p)).count();
            count as f64 / self.len() as f64
        } else {
            neumaier_sum(self.atoms().filter(|(p, _)| below(p)).map(|(_, w)| w))
        }
    }

    /// Cumulative weight `W_k` through each distinct sorted atom, for `m = 1`.
    pub fn steps_1d(&self) -> Option<(&[f64], &[f64])> {
        self.sorted.as_ref().map(|s| (s.atoms.as_slice(), s.cumulative.as_slice()))
    }
}

fn sort_1d(values: &[f64], weights: &WeightScheme) -> Sorted1d {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut atoms: Vec<f64> = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let v = values[i];
        let w = if weights.is_uniform() {
            (rank + 1) as f64 / n as f64
        } else {
            acc += weights.get(i);
            acc
        };
        if atoms.last() == Some(&v) {
            *cumulative.last_mut().unwrap() = w;
        } else {
            atoms.push(v);
            cumulative.push(w);
        }
    }
    if let Some(last) = cumulative.last_mut() {
        *last = last.min(1.0);
        if weights.is_uniform() {
            *last = 1.0;
        }
    }
    Sorted1d { atoms, cumulative }
}

impl Cdf for WeightedEcdf {
    fn dim(&self) -> usize {
        self.sample.dim()
    }

    fn cdf_at(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x)
    }

    fn jump_coordinates(&self) -> Option<Vec<Vec<f64>>> {
        Some((0..self.dim()).map(|j| self.sample.column(j)).collect())
    }
}

fn check_same_dim(e: &WeightedEcdf, g: &dyn Cdf) -> Result<()> {
    if e.dim() != g.dim() {
        return Err(Error::Dimension {
            expected: e.dim(),
            got: g.dim(),
        });
    }
    Ok(())
}

/// `sup_x |F̂(x) − G(x)|`.
///
/// Exact when `G` is a step function (any dimension) or when `m = 1` and `G`
/// is continuous. For `m ≥ 2` and continuous `G` the supremum is taken over
/// the grid of observed coordinates and is a lower bound.
pub fn ks_sup(e: &WeightedEcdf, g: &dyn Cdf) -> Result<f64> {
    check_same_dim(e, g)?;
    match g.jump_coordinates() {
        None if e.dim() == 1 => Ok(jump_points_1d(e, g).0),
        jumps => grid_sup(e, g, jumps),
    }
}

/// KS sup and exact CvM integral for `m = 1` and continuous `G`, sharing the
/// evaluations `u_k = G(x_(k))`.
pub fn ks_cvm_exact_1d(e: &WeightedEcdf, g: &dyn Cdf) -> Result<(f64, f64)> {
    check_same_dim(e, g)?;
    if e.dim() != 1 {
        return Err(Error::Input("exact one-dimensional integration needs m = 1".into()));
    }
    if g.jump_coordinates().is_some() {
        return Err(Error::Input(
            "exact one-dimensional integration needs a continuous distribution".into(),
        ));
    }
    Ok(jump_points_1d(e, g))
}

fn jump_points_1d(e: &WeightedEcdf, g: &dyn Cdf) -> (f64, f64) {
    let s = e.sorted.as_ref().expect("one-dimensional ecdf");
    let u: Vec<f64> = s.atoms.iter().map(|x| g.cdf_at(&[*x])).collect();
    let mut sup = 0.0f64;
    let mut prev_w = 0.0;
    let mut prev_u = 0.0;
    let mut terms = Vec::with_capacity(u.len() + 1);
    for (w, uk) in s.cumulative.iter().zip(&u) {
        sup = sup.max((w - uk).abs()).max((prev_w - uk).abs());
        terms.push(cube_difference(prev_w, prev_u, *uk));
        prev_w = *w;
        prev_u = *uk;
    }
    terms.push(cube_difference(prev_w, prev_u, 1.0));
    (sup, canonical_sum(&mut terms))
}

/// `∫_{u_lo}^{u_hi} (w − u)² du = [(w−u_lo)³ − (w−u_hi)³]/3`, written as a
/// product with a nonnegative factor to avoid cancellation.
fn cube_difference(w: f64, u_lo: f64, u_hi: f64) -> f64 {
    let a = w - u_lo;
    let b = w - u_hi;
    (u_hi - u_lo).max(0.0) * (a * a + a * b + b * b) / 3.0
}

fn grid_sup(e: &WeightedEcdf, g: &dyn Cdf, g_jumps: Option<Vec<Vec<f64>>>) -> Result<f64> {
    let m = e.dim();
    let mut axes: Vec<Vec<f64>> = (0..m).map(|j| e.sample.column(j)).collect();
    if let Some(extra) = g_jumps {
        for (axis, more) in axes.iter_mut().zip(extra) {
            axis.extend(more);
        }
    }
    for axis in &mut axes {
        axis.push(f64::NEG_INFINITY);
        axis.push(f64::INFINITY);
        axis.sort_by(f64::total_cmp);
        axis.dedup();
    }
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|t| *t <= MAX_GRID_POINTS)
        .ok_or_else(|| Error::Input("evaluation grid too large for the sup-distance".into()))?;
    let mut idx = vec![0usize; m];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut sup = 0.0f64;
    for _ in 0..total {
        sup = sup.max((e.eval_unchecked(&x) - g.cdf_at(&x)).abs());
        for j in 0..m {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                x[j] = axes[j][idx[j]];
                break;
            }
            idx[j] = 0;
            x[j] = axes[j][0];
        }
    }
    Ok(sup)
}

/// `Σ_j ω_j (F̂(y_j) − G(y_j))²` over the atoms `(y_j, ω_j)` of a discrete
/// integrating measure.
pub fn cvm_on_atoms<'a>(
    e: &WeightedEcdf,
    g: &dyn Cdf,
    atoms: impl IntoIterator<Item = (&'a [f64], f64)>,
) -> Result<f64> {
    check_same_dim(e, g)?;
    let mut terms: Vec<f64> = atoms
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(y, w)| {
            let d = e.eval_unchecked(y) - g.cdf_at(y);
            w * d * d
        })
        .collect();
    Ok(canonical_sum(&mut terms))
}

/// Average of `(F̂(Z) − G(Z))²` over `draws` independent `Z ~ G`.
pub fn cvm_monte_carlo(e: &WeightedEcdf, g: &MixtureSpec, draws: usize, seed: u64) -> Result<f64> {
    check_same_dim(e, g)?;
    if draws == 0 {
        return Err(Error::Input("Monte-Carlo integration needs at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Vec::with_capacity(g.dim());
    let mut terms = Vec::with_capacity(draws);
    for _ in 0..draws {
        z.clear();
        g.draw_into(&mut rng, &mut z);
        let d = e.eval_unchecked(&z) - g.cdf_at(&z);
        terms.push(d * d);
    }
    Ok(canonical_sum(&mut terms) / draws as f64)
}

/// How `∫ (F̂ − G)² dG` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMode {
    /// Closed form for `m = 1` and continuous `G`.
    Exact1d,
    /// Finite sum over the atoms of a discrete `G`.
    EmpiricalMeasure,
    /// Average over `draws` samples from `G`, seeded by `seed`.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Draw count of the default Monte-Carlo integration for `m ≥ 2`.
pub const DEFAULT_MC_DRAWS: usize = 10_000;

impl IntegrationMode {
    /// Exact for discrete nulls and for `m = 1`, Monte Carlo with
    /// [`DEFAULT_MC_DRAWS`] otherwise.
    pub fn default_for(g: &MixtureSpec, seed: u64) -> Self {
        if g.is_discrete() {
            IntegrationMode::EmpiricalMeasure
        } else if g.dim() == 1 {
            IntegrationMode::Exact1d
        } else {
            IntegrationMode::MonteCarlo {
                draws: DEFAULT_MC_DRAWS,
                seed,
            }
        }
    }
}

/// `∫ (F̂(x) − G(x))² dG(x)`.
pub fn cvm_integral(e: &WeightedEcdf, g: &MixtureSpec, mode: IntegrationMode) -> Result<f64> {
    match mode {
        IntegrationMode::Exact1d => ks_cvm_exact_1d(e, g).map(|(_, c)| c),
        IntegrationMode::EmpiricalMeasure => {
            let atoms = g
                .atoms()
                .ok_or_else(|| Error::Input("empirical-measure integration needs a discrete distribution".into()))?;
            cvm_on_atoms(e, g, atoms)
        }
        IntegrationMode::MonteCarlo { draws, seed } => cvm_monte_carlo(e, g, draws, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    struct Uniform01;

    impl Cdf for Uniform01 {
        fn dim(&self) -> usize {
            1
        }

        fn cdf_at(&self, x: &[f64]) -> f64 {
            x[0].clamp(0.0, 1.0)
        }
    }

    fn ecdf(xs: &[f64]) -> WeightedEcdf {
        WeightedEcdf::uniform(Sample::from_1d(xs.to_vec()).unwrap()).unwrap()
    }

    /// Adaptive Simpson on `[a, b]`.
    fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    /// Quadrature of `(F̂(x) − x)²` on `[0, 1]`, split at the data points so
    /// the integrand is smooth on every piece.
    fn quadrature_cvm_uniform(xs: &[f64], e: &WeightedEcdf) -> f64 {
        let mut cuts: Vec<f64> = xs.iter().copied().filter(|x| *x > 0.0 && *x < 1.0).collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let level = e.eval(&[mid]).unwrap();
                adaptive(&|x: f64| (level - x).powi(2), w[0], w[1], 1e-14)
            })
            .sum()
    }

    #[test]
    fn eval_examples() {
        let e = WeightedEcdf::new(Sample::from_1d(vec![0.0, 1.0]).unwrap(), WeightScheme::uniform(2).unwrap()).unwrap();
        assert_eq!(e.eval(&[0.5]).unwrap(), 0.5);
        assert_eq!(e.eval(&[f64::NEG_INFINITY]).unwrap(), 0.0);
        assert_eq!(e.eval(&[f64::INFINITY]).unwrap(), 1.0);
        let e2 = WeightedEcdf::uniform(Sample::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(e2.eval(&[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(e2.eval(&[f64::INFINITY, f64::INFINITY]).unwrap(), 1.0);
        assert!(e2.eval(&[0.0]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_sup(&ecdf(&[0.5]), &Uniform01).unwrap(), 0.5);
        assert_relative_eq!(ks_sup(&ecdf(&[0.25, 0.75]), &Uniform01).unwrap(), 0.25, epsilon = 1e-15);
        let e = ecdf(&[0.3, -1.0, 2.0, 2.0]);
        assert_eq!(ks_sup(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn cvm_examples() {
        let (_, c) = ks_cvm_exact_1d(&ecdf(&[0.5]), &Uniform01).unwrap();
        assert_relative_eq!(c, 1.0 / 12.0, epsilon = 1e-15);
        let quad = adaptive(&|u: f64| u * u, 0.0, 0.5, 1e-15) + adaptive(&|u: f64| (1.0 - u).powi(2), 0.5, 1.0, 1e-15);
        assert_relative_eq!(c, quad, epsilon = 1e-14);
        let xs = [0.25, 0.75];
        let e = ecdf(&xs);
        let (_, c2) = ks_cvm_exact_1d(&e, &Uniform01).unwrap();
        assert!((c2 - quadrature_cvm_uniform(&xs, &e)).abs() < 1e-10);
        // Identical step functions under their own measure.
        assert_eq!(cvm_on_atoms(&e, &e, e.atoms()).unwrap(), 0.0);
    }

    #[test]
    fn ties_are_merged() {
        let e = ecdf(&[0.5, 0.5, 0.5, 0.9]);
        assert_eq!(e.steps_1d().unwrap().0, &[0.5, 0.9]);
        assert_eq!(e.eval(&[0.5]).unwrap(), 0.75);
        // Left limit at 0.5: |0 − 0.5|.
        assert_relative_eq!(ks_sup(&e, &Uniform01).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn step_vs_step_grid_is_exact_in_1d() {
        let a = ecdf(&[0.0, 2.0]);
        let b = ecdf(&[1.0, 3.0]);
        assert_eq!(ks_sup(&a, &b).unwrap(), 0.5);
        assert_eq!(ks_sup(&b, &a).unwrap(), 0.5);
    }

    #[test]
    fn mixture_modes_agree() {
        let g = MixtureSpec::new(
            vec![DistributionSpec::exponential(1.0).unwrap(), DistributionSpec::exponential(2.0).unwrap()],
            WeightScheme::uniform(2).unwrap(),
        )
        .unwrap();
        let e = WeightedEcdf::new(
            Sample::from_1d(vec![0.2, 1.4, 0.7]).unwrap(),
            WeightScheme::new(vec![0.2, 0.5, 0.3]).unwrap(),
        )
        .unwrap();
        let exact = cvm_integral(&e, &g, IntegrationMode::Exact1d).unwrap();
        let mc = cvm_integral(&e, &g, IntegrationMode::MonteCarlo { draws: 200_000, seed: 5 }).unwrap();
        assert!((exact - mc).abs() < 2e-3, "{exact} vs {mc}");
        assert!(cvm_integral(&e, &g, IntegrationMode::EmpiricalMeasure).is_err());
    }

    #[test]
    fn point_mass_null_matching_data() {
        let xs = [0.3, 1.7, -0.4];
        let comps = xs.iter().map(|x| DistributionSpec::point_mass(vec![*x]).unwrap()).collect();
        let g = MixtureSpec::new(comps, WeightScheme::uniform(3).unwrap()).unwrap();
        let e = ecdf(&xs);
        assert_eq!(IntegrationMode::default_for(&g, 0), IntegrationMode::EmpiricalMeasure);
        assert_eq!(cvm_integral(&e, &g, IntegrationMode::EmpiricalMeasure).unwrap(), 0.0);
        assert_eq!(ks_sup(&e, &g).unwrap(), 0.0);
    }

    #[test]
    fn bivariate_grid_lower_bound() {
        let g = DistributionSpec::product(vec![
            DistributionSpec::normal(0.0, 1.0).unwrap(),
            DistributionSpec::normal(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let e = WeightedEcdf::uniform(Sample::from_rows(&[[0.0, 0.0]]).unwrap()).unwrap();
        // Grid {-∞, 0, ∞}²: the largest gap is at (0, 0), 1 − 1/4, or on the edges.
        let sup = ks_sup(&e, &g).unwrap();
        assert_relative_eq!(sup, 0.75, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn exact_cvm_matches_quadrature(xs in proptest::collection::vec(0.0f64..1.0, 1..12)) {
            let e = ecdf(&xs);
            let (_, c) = ks_cvm_exact_1d(&e, &Uniform01).unwrap();
            prop_assert!((c - quadrature_cvm_uniform(&xs, &e)).abs() < 1e-10);
        }

        #[test]
        fn ks_not_exceeded_on_subgrids(xs in proptest::collection::vec(-3.0f64..3.0, 1..20), probe in proptest::collection::vec(-4.0f64..4.0, 1..50)) {
            let e = ecdf(&xs);
            let g = DistributionSpec::logistic(0.0, 1.0).unwrap();
            let sup = ks_sup(&e, &g).unwrap();
            for p in probe {
                prop_assert!((e.eval(&[p]).unwrap() - g.cdf(&[p]).unwrap()).abs() <= sup + 1e-15);
            }
        }

        #[test]
        fn uniform_ecdf_is_permutation_invariant(xs in proptest::collection::vec(-3.0f64..3.0, 2..30), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..xs.len()).collect();
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let s = Sample::from_1d(xs.clone()).unwrap();
            let a = WeightedEcdf::uniform(s.clone()).unwrap();
            let b = WeightedEcdf::uniform(s.permuted(&perm)).unwrap();
            let g = DistributionSpec::normal(0.0, 1.0).unwrap();
            prop_assert_eq!(ks_cvm_exact_1d(&a, &g).unwrap(), ks_cvm_exact_1d(&b, &g).unwrap());
            for x in &xs {
                prop_assert_eq!(a.eval(&[*x]).unwrap(), b.eval(&[*x]).unwrap());
            }
        }

        #[test]
        fn ks_symmetric_between_ecdfs(xs in proptest::collection::vec(-3.0f64..3.0, 1..15), ys in proptest::collection::vec(-3.0f64..3.0, 1..15)) {
            let a = ecdf(&xs);
            let b = ecdf(&ys);
            prop_assert_eq!(ks_sup(&a, &b).unwrap(), ks_sup(&b, &a).unwrap());
        }
    }

    #[test]
    fn exact_cvm_agrees_with_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..5 {
            let n = 5 + trial * 3;
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let e = ecdf(&xs);
            let g = MixtureSpec::single(DistributionSpec::logistic(0.0, 1.0).unwrap());
            let exact = cvm_integral(&e, &g, IntegrationMode::Exact1d).unwrap();
            let draws = 1_000_000;
            let mut terms = Vec::with_capacity(draws);
            let mut r2 = ChaCha8Rng::seed_from_u64(1000 + trial as u64);
            for _ in 0..draws {
                let z = g.sample(&mut r2, 1).values()[0];
                let d = e.eval(&[z]).unwrap() - g.cdf(&[z]).unwrap();
                terms.push(d * d);
            }
            let mean = terms.iter().sum::<f64>() / draws as f64;
            let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!((exact - mean).abs() <= 3.0 * se + 1e-12, "{exact} vs {mean} ± {se}");
        }
    }
}
