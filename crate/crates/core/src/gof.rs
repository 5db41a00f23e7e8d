//! Goodness-of-fit tests against a known mixture `G_n = Σ α_i H_i` or a
//! parametric family `G_n(·, θ)` with a weighted-MLE plug-in.
//!
//! Statistics: `KS = √n sup |F̂_n − G_n|` and `CvM = n ∫ (F̂_n − G_n)² dG_n`.
//! Critical values are simulated by drawing `n` i.i.d. points from `G_n`
//! (resp. `G_n(·, θ̂)`, re-estimating `θ` on every replicate).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::MixtureSpec;
use crate::empirical::{cvm_integral, ks_cvm_exact_1d, ks_sup, IntegrationMode, WeightedEcdf};
use crate::estimation::{weighted_mle, MleFit, ParametricFamily};
use crate::montecarlo::{derive_seed, run_replicates, McConfig, McOutcome, Replicates};
use crate::weights::WeightScheme;
use crate::{Error, Result, Sample};

pub use crate::montecarlo::TestResult;

/// Substream index, under the master seed, of the Monte-Carlo integration
/// used for the observed statistic.
const OBSERVED_STREAM: u64 = u64::MAX;

/// Data and weights of a goodness-of-fit problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GofProblem {
    pub data: Sample,
    pub weights: WeightScheme,
}

impl GofProblem {
    pub fn new(data: Sample, weights: WeightScheme) -> Result<Self> {
        if data.len() != weights.len() {
            return Err(Error::Weights(format!(
                "{} weights for {} observations",
                weights.len(),
                data.len()
            )));
        }
        Ok(Self { data, weights })
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }
}

fn check_null(p: &GofProblem, null: &MixtureSpec) -> Result<()> {
    if null.dim() != p.data.dim() {
        return Err(Error::Dimension {
            expected: p.data.dim(),
            got: null.dim(),
        });
    }
    Ok(())
}

/// `(KS, CvM)` of `data` against `null`, with the CvM integral evaluated in
/// `mode`.
pub fn statistics_with(data: &Sample, weights: &WeightScheme, null: &MixtureSpec, mode: IntegrationMode) -> Result<(f64, f64)> {
    let n = data.len() as f64;
    let e = WeightedEcdf::new(data.clone(), weights.clone())?;
    let (sup, integral) = match mode {
        IntegrationMode::Exact1d => ks_cvm_exact_1d(&e, null)?,
        _ => (ks_sup(&e, null)?, cvm_integral(&e, null, mode)?),
    };
    Ok((n.sqrt() * sup, n * integral))
}

/// `(KS, CvM)` with the default integration mode (exact for `m = 1` and for
/// discrete nulls, Monte Carlo with `10⁴` draws otherwise).
pub fn gof_statistics(p: &GofProblem, null: &MixtureSpec) -> Result<(f64, f64)> {
    check_null(p, null)?;
    statistics_with(&p.data, &p.weights, null, IntegrationMode::default_for(null, 0))
}

/// Observed statistics and `B` simulated null replicates.
pub fn gof_outcome(p: &GofProblem, null: &MixtureSpec, cfg: &McConfig) -> Result<McOutcome> {
    check_null(p, null)?;
    let seed = cfg.master_seed;
    let observed = statistics_with(
        &p.data,
        &p.weights,
        null,
        IntegrationMode::default_for(null, derive_seed(seed, OBSERVED_STREAM)),
    )?;
    let n = p.n();
    let reps = run_replicates(cfg, |_, s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let sim = null.sample(&mut rng, n);
        statistics_with(&sim, &p.weights, null, IntegrationMode::default_for(null, derive_seed(s, 1)))
    })?;
    Ok(McOutcome::from_pairs(observed, reps, seed))
}

/// Test of `F_n = G_n` at level `alpha`.
pub fn gof_test(p: &GofProblem, null: &MixtureSpec, alpha: f64, cfg: &McConfig) -> Result<TestResult> {
    gof_outcome(p, null, cfg)?.decide(alpha)
}

/// Statistics against the fitted `G_n(·, θ̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyStatistics {
    pub ks: f64,
    pub cvm: f64,
    pub fit: MleFit,
    pub fitted: MixtureSpec,
}

fn family_statistics_seeded(
    data: &Sample,
    weights: &WeightScheme,
    family: &dyn ParametricFamily,
    mc_seed: u64,
) -> Result<FamilyStatistics> {
    let fit = weighted_mle(family, data, weights)?;
    let fitted = family.mixture(&fit.theta, weights).map_err(|e| {
        Error::Estimation(format!("estimate {:?} does not define a valid mixture: {e}", fit.theta))
    })?;
    let (ks, cvm) = statistics_with(data, weights, &fitted, IntegrationMode::default_for(&fitted, mc_seed))?;
    Ok(FamilyStatistics { ks, cvm, fit, fitted })
}

/// `θ̂` and `(KS, CvM)` against `G_n(·, θ̂)`.
pub fn gof_family_statistics(p: &GofProblem, family: &dyn ParametricFamily) -> Result<FamilyStatistics> {
    family_statistics_seeded(&p.data, &p.weights, family, 0)
}

/// Parametric bootstrap with re-estimation on every replicate. Replicates
/// whose estimation fails are redrawn (see [`crate::montecarlo::MAX_RETRIES`]).
pub fn gof_family_outcome(p: &GofProblem, family: &dyn ParametricFamily, cfg: &McConfig) -> Result<McOutcome> {
    let seed = cfg.master_seed;
    let obs = family_statistics_seeded(&p.data, &p.weights, family, derive_seed(seed, OBSERVED_STREAM))?;
    let n = p.n();
    let reps: Replicates<(f64, f64)> = run_replicates(cfg, |_, s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let sim = obs.fitted.sample(&mut rng, n);
        let st = family_statistics_seeded(&sim, &p.weights, family, derive_seed(s, 1))?;
        Ok((st.ks, st.cvm))
    })?;
    let mut out = McOutcome::from_pairs((obs.ks, obs.cvm), reps, seed);
    out.theta_hat = Some(obs.fit.theta);
    Ok(out)
}

pub fn gof_family_test(p: &GofProblem, family: &dyn ParametricFamily, alpha: f64, cfg: &McConfig) -> Result<TestResult> {
    gof_family_outcome(p, family, cfg)?.decide(alpha)
}
