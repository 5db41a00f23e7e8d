//! Tests of functional hypotheses `T(F) = Q(F)`: homogeneity of two samples,
//! central symmetry and independence of two blocks of coordinates.
//!
//! Every statistic compares two step functions, so the sup-distances are
//! taken over grids of observed coordinates and the Cramér–von-Mises
//! integrals are finite sums; both are exact. Null replicates are drawn from
//! the projected empirical distribution `Ĵ` and the statistics recomputed
//! from scratch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::Cdf;
use crate::empirical::{ks_sup, WeightedEcdf};
use crate::montecarlo::{run_replicates, McConfig, McOutcome, TestResult};
use crate::numeric::canonical_sum;
use crate::weights::WeightScheme;
use crate::{Error, Result, Sample};

/// Largest `n` accepted by the general (block dimension > 1) independence
/// statistic, which costs `O(n³)`.
pub const MAX_NAIVE_INDEPENDENCE_N: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalProblem {
    /// `F_n = G_r` for samples `X` (weights `α`) and `V` (weights `β`).
    Homogeneity {
        x: Sample,
        alpha: WeightScheme,
        v: Sample,
        beta: WeightScheme,
    },
    /// Symmetry of the distribution of `U` about the origin.
    CentralSymmetry { u: Sample, alpha: WeightScheme },
    /// Independence of the first `split` coordinates from the rest.
    Independence {
        data: Sample,
        split: usize,
        alpha: WeightScheme,
    },
}

fn check_len(s: &Sample, w: &WeightScheme) -> Result<()> {
    if s.len() != w.len() {
        return Err(Error::Weights(format!("{} weights for {} observations", w.len(), s.len())));
    }
    Ok(())
}

impl FunctionalProblem {
    pub fn homogeneity(x: Sample, alpha: WeightScheme, v: Sample, beta: WeightScheme) -> Result<Self> {
        check_len(&x, &alpha)?;
        check_len(&v, &beta)?;
        if x.dim() != v.dim() {
            return Err(Error::Dimension {
                expected: x.dim(),
                got: v.dim(),
            });
        }
        Ok(Self::Homogeneity { x, alpha, v, beta })
    }

    pub fn symmetry(u: Sample, alpha: WeightScheme) -> Result<Self> {
        check_len(&u, &alpha)?;
        Ok(Self::CentralSymmetry { u, alpha })
    }

    /// `data` holds `(A_i, B_i)` with `A_i` the first `split` coordinates.
    pub fn independence(data: Sample, split: usize, alpha: WeightScheme) -> Result<Self> {
        check_len(&data, &alpha)?;
        if split == 0 || split >= data.dim() {
            return Err(Error::Input(format!(
                "split {split} must leave both blocks non-empty for dimension {}",
                data.dim()
            )));
        }
        if (split > 1 || data.dim() - split > 1) && data.len() > MAX_NAIVE_INDEPENDENCE_N {
            return Err(Error::Input(format!(
                "independence with block dimensions > 1 is limited to n <= {MAX_NAIVE_INDEPENDENCE_N}"
            )));
        }
        Ok(Self::Independence { data, split, alpha })
    }

    /// `n / r` for homogeneity problems.
    pub fn eta_hat(&self) -> Option<f64> {
        match self {
            Self::Homogeneity { x, v, .. } => Some(x.len() as f64 / v.len() as f64),
            _ => None,
        }
    }

    /// `(KS, CvM)`.
    pub fn statistics(&self) -> Result<(f64, f64)> {
        match self {
            Self::Homogeneity { x, alpha, v, beta } => homogeneity_statistics(x, alpha, v, beta),
            Self::CentralSymmetry { u, alpha } => symmetry_statistics(u, alpha),
            Self::Independence { data, split, alpha } => independence_statistics(data, *split, alpha),
        }
    }

    /// A data set of the same shape drawn i.i.d. from `Ĵ`.
    pub fn null_resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        match self {
            Self::Homogeneity { x, alpha, v, beta } => {
                let (ia, ib) = (IndexSampler::new(alpha), IndexSampler::new(beta));
                let mut draw = |k: usize| {
                    let mut out = Vec::with_capacity(k * x.dim());
                    for _ in 0..k {
                        if rng.random::<bool>() {
                            out.extend_from_slice(x.point(ia.draw(rng)));
                        } else {
                            out.extend_from_slice(v.point(ib.draw(rng)));
                        }
                    }
                    Sample::from_raw(x.dim(), out)
                };
                let xs = draw(x.len());
                let vs = draw(v.len());
                Self::Homogeneity {
                    x: xs,
                    alpha: alpha.clone(),
                    v: vs,
                    beta: beta.clone(),
                }
            }
            Self::CentralSymmetry { u, alpha } => {
                let ia = IndexSampler::new(alpha);
                let mut out = Vec::with_capacity(u.values().len());
                for _ in 0..u.len() {
                    let p = u.point(ia.draw(rng));
                    if rng.random::<bool>() {
                        out.extend_from_slice(p);
                    } else {
                        out.extend(p.iter().map(|c| -c));
                    }
                }
                Self::CentralSymmetry {
                    u: Sample::from_raw(u.dim(), out),
                    alpha: alpha.clone(),
                }
            }
            Self::Independence { data, split, alpha } => {
                let ia = IndexSampler::new(alpha);
                let mut out = Vec::with_capacity(data.values().len());
                for _ in 0..data.len() {
                    let i = ia.draw(rng);
                    let j = ia.draw(rng);
                    out.extend_from_slice(&data.point(i)[..*split]);
                    out.extend_from_slice(&data.point(j)[*split..]);
                }
                Self::Independence {
                    data: Sample::from_raw(data.dim(), out),
                    split: *split,
                    alpha: alpha.clone(),
                }
            }
        }
    }
}

/// Draws indices with probabilities given by a weight scheme.
struct IndexSampler {
    cumulative: Vec<f64>,
}

impl IndexSampler {
    fn new(w: &WeightScheme) -> Self {
        Self {
            cumulative: w.cumulative(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// `KS = ⁴√(nr) sup |F̂_n − Ĝ_r|`, `CvM = √(nr) ∫ (F̂_n − Ĝ_r)² d(F̂_n + Ĝ_r)/2`.
pub fn homogeneity_statistics(x: &Sample, alpha: &WeightScheme, v: &Sample, beta: &WeightScheme) -> Result<(f64, f64)> {
    if x.dim() != v.dim() {
        return Err(Error::Dimension {
            expected: x.dim(),
            got: v.dim(),
        });
    }
    let f = WeightedEcdf::new(x.clone(), alpha.clone())?;
    let g = WeightedEcdf::new(v.clone(), beta.clone())?;
    let nr = (x.len() * v.len()) as f64;
    let sup = ks_sup(&f, &g)?;
    let mut terms: Vec<f64> = f
        .atoms()
        .chain(g.atoms())
        .filter(|(_, w)| *w > 0.0)
        .map(|(y, w)| {
            let d = f.cdf_at(y) - g.cdf_at(y);
            0.5 * w * (d * d)
        })
        .collect();
    Ok((nr.sqrt().sqrt() * sup, nr.sqrt() * canonical_sum(&mut terms)))
}

/// `KS = √n sup |Ĉ⁺ − Ĉ⁻|`, `CvM = n ∫ (Ĉ⁺ − Ĉ⁻)² d(Ĉ⁺ + Ĉ⁻)/2`, with `Ĉ⁺`
/// the weighted ECDF of `U` and `Ĉ⁻` that of `−U`.
pub fn symmetry_statistics(u: &Sample, alpha: &WeightScheme) -> Result<(f64, f64)> {
    let plus = WeightedEcdf::new(u.clone(), alpha.clone())?;
    let minus = WeightedEcdf::new(u.negated(), alpha.clone())?;
    let n = u.len() as f64;
    let sup = ks_sup(&plus, &minus)?;
    let mut terms: Vec<f64> = plus
        .atoms()
        .chain(minus.atoms())
        .filter(|(_, w)| *w > 0.0)
        .map(|(y, w)| {
            let d = plus.cdf_at(y) - minus.cdf_at(y);
            0.5 * w * (d * d)
        })
        .collect();
    Ok((n.sqrt() * sup, n * canonical_sum(&mut terms)))
}

/// `KS = √n max_{i,j} |F̂(A_i, B_j) − F̂^A(A_i) F̂^B(B_j)|` and
/// `CvM = n Σ_i Σ_j α_i α_j (F̂(A_i, B_j) − F̂^A(A_i) F̂^B(B_j))²`.
pub fn independence_statistics(data: &Sample, split: usize, alpha: &WeightScheme) -> Result<(f64, f64)> {
    check_len(data, alpha)?;
    if split == 0 || split >= data.dim() {
        return Err(Error::Input(format!("invalid split {split} for dimension {}", data.dim())));
    }
    let n = data.len() as f64;
    let (sup, integral) = if data.dim() == 2 {
        independence_bivariate(data, alpha)
    } else {
        independence_naive(data, split, alpha)?
    };
    Ok((n.sqrt() * sup, n * integral))
}

/// Sorted distinct values and the rank of every observation among them.
fn ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let r = values
        .iter()
        .map(|v| distinct.partition_point(|d| d < v))
        .collect();
    (distinct, r)
}

/// `k = ℓ = 1`: joint masses on the rank grid and two-dimensional prefix sums.
fn independence_bivariate(data: &Sample, alpha: &WeightScheme) -> (f64, f64) {
    let a = data.column(0);
    let b = data.column(1);
    let (da, ra) = ranks(&a);
    let (db, rb) = ranks(&b);
    let (p, q) = (da.len(), db.len());
    let n = data.len();
    let uniform = alpha.is_uniform();
    // Joint, row and column masses; integer counts for uniform weights.
    let mut joint = vec![0.0f64; p * q];
    let mut mass_a = vec![0.0f64; p];
    let mut mass_b = vec![0.0f64; q];
    for k in 0..n {
        let w = if uniform { 1.0 } else { alpha.get(k) };
        joint[ra[k] * q + rb[k]] += w;
        mass_a[ra[k]] += w;
        mass_b[rb[k]] += w;
    }
    let scale = if uniform { n as f64 } else { 1.0 };
    for s in 0..p {
        for t in 0..q {
            let up = if s > 0 { joint[(s - 1) * q + t] } else { 0.0 };
            let left = if t > 0 { joint[s * q + t - 1] } else { 0.0 };
            let diag = if s > 0 && t > 0 { joint[(s - 1) * q + t - 1] } else { 0.0 };
            // Symmetric in the two axes, bit for bit.
            joint[s * q + t] = (joint[s * q + t] + (up + left)) - diag;
        }
    }
    let cum = |m: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        m.iter()
            .map(|x| {
                acc += x;
                acc / scale
            })
            .collect()
    };
    let fa = cum(&mass_a);
    let fb = cum(&mass_b);
    let mut sup = 0.0f64;
    let mut terms = Vec::with_capacity(p * q);
    for s in 0..p {
        let ma = mass_a[s] / scale;
        for t in 0..q {
            let d = joint[s * q + t] / scale - fa[s] * fb[t];
            sup = sup.max(d.abs());
            let mb = mass_b[t] / scale;
            terms.push(ma * mb * (d * d));
        }
    }
    (sup, canonical_sum(&mut terms))
}

/// General block dimensions by direct evaluation over all pairs.
fn independence_naive(data: &Sample, split: usize, alpha: &WeightScheme) -> Result<(f64, f64)> {
    let n = data.len();
    if n > MAX_NAIVE_INDEPENDENCE_N {
        return Err(Error::Input(format!(
            "independence with block dimensions > 1 is limited to n <= {MAX_NAIVE_INDEPENDENCE_N}"
        )));
    }
    let a = data.columns(0..split)?;
    let b = data.columns(split..data.dim())?;
    let fa = WeightedEcdf::new(a.clone(), alpha.clone())?;
    let fb = WeightedEcdf::new(b.clone(), alpha.clone())?;
    let fab = WeightedEcdf::new(data.clone(), alpha.clone())?;
    let fa_at: Vec<f64> = a.points().map(|p| fa.cdf_at(p)).collect();
    let fb_at: Vec<f64> = b.points().map(|p| fb.cdf_at(p)).collect();
    let mut sup = 0.0f64;
    let mut terms = Vec::with_capacity(n * n);
    let mut point = vec![0.0; data.dim()];
    for (i, (pa, fa_i)) in a.points().zip(&fa_at).enumerate() {
        point[..split].copy_from_slice(pa);
        for (j, (pb, fb_j)) in b.points().zip(&fb_at).enumerate() {
            point[split..].copy_from_slice(pb);
            let d = fab.cdf_at(&point) - fa_i * fb_j;
            sup = sup.max(d.abs());
            terms.push(alpha.get(i) * alpha.get(j) * (d * d));
        }
    }
    Ok((sup, canonical_sum(&mut terms)))
}

/// Observed statistics and `B` replicates drawn from `Ĵ`.
pub fn functional_outcome(problem: &FunctionalProblem, cfg: &McConfig) -> Result<McOutcome> {
    let observed = problem.statistics()?;
    let reps = run_replicates(cfg, |_, s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        problem.null_resample(&mut rng).statistics()
    })?;
    Ok(McOutcome::from_pairs(observed, reps, cfg.master_seed))
}

pub fn functional_test(problem: &FunctionalProblem, alpha: f64, cfg: &McConfig) -> Result<TestResult> {
    functional_outcome(problem, cfg)?.decide(alpha)
}
