//! Seeded Monte-Carlo replicate engine, critical values and p-values.
//!
//! Replicate `r` of a run with master seed `s` draws from its own stream,
//! seeded with [`derive_seed`]`(s, r)`. Results are stored by index, so the
//! output does not depend on how replicates are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Re-attempts of a failing replicate before the run is aborted.
pub const MAX_RETRIES: usize = 5;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` of the stream seeded by `parent`:
/// `mix64(mix64(parent) ^ (index · φ + c))` with `φ = 0x9E3779B97F4A7C15`,
/// `c = 0x632BE59BD9B4E019`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub replications: usize,
    pub master_seed: u64,
    /// `None`: the ambient rayon pool; `Some(1)`: sequential; `Some(k)`: a
    /// dedicated pool of `k` workers.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(replications: usize, master_seed: u64) -> Self {
        Self {
            replications,
            master_seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

/// Runs `f` on `threads` workers (see [`McConfig::threads`]).
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(0) => Err(Error::Config("thread count must be >= 1".into())),
        Some(k) if k > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Values of all replicates, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicates<T> {
    pub values: Vec<T>,
    /// Total number of failed attempts that were retried.
    pub retries: usize,
}

/// Evaluates `f(index, seed)` for `index = 0..B`. A failing replicate is
/// retried with seeds `derive_seed(derive_seed(master, index), attempt)`;
/// after [`MAX_RETRIES`] failures the whole run fails.
pub fn run_replicates<T, F>(cfg: &McConfig, f: F) -> Result<Replicates<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    if cfg.replications == 0 {
        return Err(Error::Config("the number of replications must be >= 1".into()));
    }
    let one = |index: usize| -> (std::result::Result<T, Error>, usize) {
        let base = derive_seed(cfg.master_seed, index as u64);
        let mut last = None;
        for attempt in 0..=MAX_RETRIES {
            let seed = if attempt == 0 {
                base
            } else {
                derive_seed(base, attempt as u64)
            };
            match f(index, seed) {
                Ok(v) => return (Ok(v), attempt),
                Err(e) => last = Some(e),
            }
        }
        (Err(last.expect("at least one attempt")), MAX_RETRIES)
    };
    let outcomes: Vec<(Result<T>, usize)> = match cfg.threads {
        Some(1) => (0..cfg.replications).map(one).collect(),
        threads => with_pool(threads, || (0..cfg.replications).into_par_iter().map(one).collect())?,
    };
    let mut values = Vec::with_capacity(cfg.replications);
    let mut retries = 0;
    let mut failed = 0;
    let mut first = None;
    for (res, r) in outcomes {
        retries += r;
        match res {
            Ok(v) => values.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first {
        return Err(Error::Replicates {
            failed,
            total: cfg.replications,
            first: e.to_string(),
        });
    }
    Ok(Replicates { values, retries })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `k = ⌈B(1−α)⌉`, computed so that products like `200 · 0.95` that are
/// integers up to rounding are not pushed to the next integer.
pub fn critical_rank(b: usize, alpha: f64) -> usize {
    let x = b as f64 * (1.0 - alpha);
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, b)
}

/// The `⌈B(1−α)⌉`-th order statistic of `stats`.
pub fn critical_value(stats: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if stats.is_empty() {
        return Err(Error::Input("no replicate statistics".into()));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[critical_rank(stats.len(), alpha) - 1])
}

/// `(1 + #{s ≥ observed}) / (B + 1)`.
pub fn p_value(observed: f64, stats: &[f64]) -> f64 {
    let exceed = stats.iter().filter(|s| **s >= observed).count();
    (1 + exceed) as f64 / (stats.len() + 1) as f64
}

/// Observed statistics and their simulated null counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub observed_ks: f64,
    pub observed_cvm: f64,
    pub replicate_ks: Vec<f64>,
    pub replicate_cvm: Vec<f64>,
    pub retries: usize,
    pub seed: u64,
    pub theta_hat: Option<Vec<f64>>,
}

impl McOutcome {
    pub fn from_pairs(observed: (f64, f64), pairs: Replicates<(f64, f64)>, seed: u64) -> Self {
        let (replicate_ks, replicate_cvm) = pairs.values.into_iter().unzip();
        Self {
            observed_ks: observed.0,
            observed_cvm: observed.1,
            replicate_ks,
            replicate_cvm,
            retries: pairs.retries,
            seed,
            theta_hat: None,
        }
    }

    /// The test decision at level `alpha`.
    pub fn decide(&self, alpha: f64) -> Result<TestResult> {
        let critical_ks = critical_value(&self.replicate_ks, alpha)?;
        let critical_cvm = critical_value(&self.replicate_cvm, alpha)?;
        Ok(TestResult {
            statistic_ks: self.observed_ks,
            statistic_cvm: self.observed_cvm,
            critical_ks,
            critical_cvm,
            p_ks: p_value(self.observed_ks, &self.replicate_ks),
            p_cvm: p_value(self.observed_cvm, &self.replicate_cvm),
            alpha,
            replications: self.replicate_ks.len(),
            seed: self.seed,
            reject_ks: self.observed_ks >= critical_ks,
            reject_cvm: self.observed_cvm >= critical_cvm,
            theta_hat: self.theta_hat.clone(),
            retries: self.retries,
        })
    }
}

/// Outcome of a Monte-Carlo test. `reject_* ⇔ statistic_* ≥ critical_*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic_ks: f64,
    pub statistic_cvm: f64,
    pub critical_ks: f64,
    pub critical_cvm: f64,
    pub p_ks: f64,
    pub p_cvm: f64,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub replications: usize,
    pub seed: u64,
    pub reject_ks: bool,
    pub reject_cvm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat: Option<Vec<f64>>,
    /// Replicates that had to be redrawn after a failed estimation.
    #[serde(default)]
    pub retries: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn critical_value_examples() {
        assert_eq!(critical_value(&[0.1, 0.2, 0.3, 0.4], 0.25).unwrap(), 0.3);
        assert_eq!(critical_value(&[0.4, 0.1, 0.3, 0.2], 0.25).unwrap(), 0.3);
        for a in [0.01, 0.5, 0.99] {
            assert_eq!(critical_value(&[7.0], a).unwrap(), 7.0);
        }
        assert_eq!(critical_value(&[2.0; 9], 0.1).unwrap(), 2.0);
        assert!(critical_value(&[], 0.1).is_err());
        assert!(critical_value(&[1.0], 0.0).is_err());
        assert!(critical_value(&[1.0], 1.0).is_err());
    }

    #[test]
    fn critical_rank_rounding() {
        assert_eq!(critical_rank(200, 0.05), 190);
        assert_eq!(critical_rank(500, 0.05), 475);
        assert_eq!(critical_rank(1000, 0.1), 900);
        assert_eq!(critical_rank(10, 0.025), 10);
        assert_eq!(critical_rank(1, 0.5), 1);
        assert_eq!(critical_rank(3, 0.5), 2);
    }

    #[test]
    fn p_value_examples() {
        let s = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(p_value(0.25, &s), 0.6);
        assert_eq!(p_value(1.0, &s), 0.2);
        assert_eq!(p_value(0.0, &s), 1.0);
    }

    /// `observed ≥ c` holds exactly when at most `B − k` replicate values
    /// lie strictly above `observed`; for an observed value that ties no
    /// replicate this is `p ≤ (B − k + 1)/(B + 1)`, and for one that ties the
    /// critical value itself `p ≤ (1 + B − k + 1)/(B + 1)` may be needed.
    #[test]
    fn decision_equivalence_table() {
        for b in 1..=10usize {
            for alpha in [0.1, 0.05, 0.025] {
                let k = critical_rank(b, alpha);
                let stats: Vec<f64> = (1..=b).map(|v| v as f64).collect();
                let c = critical_value(&stats, alpha).unwrap();
                assert_eq!(c, k as f64);
                for twice in 0..=(2 * b + 2) {
                    let obs = twice as f64 / 2.0;
                    let reject = obs >= c;
                    let above = stats.iter().filter(|s| **s > obs).count();
                    assert_eq!(reject, above <= b - k, "B={b} α={alpha} obs={obs}");
                    let p = p_value(obs, &stats);
                    let tied = stats.contains(&obs);
                    let bound = if tied { (b - k + 2) as f64 } else { (b - k + 1) as f64 } / (b + 1) as f64;
                    assert_eq!(reject, p <= bound + 1e-15, "B={b} α={alpha} obs={obs}");
                }
            }
        }
    }

    #[test]
    fn replicate_index_order() {
        for threads in [Some(1), Some(2), Some(8), None] {
            let cfg = McConfig::new(3, 0).with_threads(threads);
            let r = run_replicates(&cfg, |i, _| Ok(i)).unwrap();
            assert_eq!(r.values, vec![0, 1, 2]);
        }
    }

    fn draw_vec(seed: u64, threads: Option<usize>) -> Vec<f64> {
        let cfg = McConfig::new(64, seed).with_threads(threads);
        run_replicates(&cfg, |_, s| Ok(ChaCha8Rng::seed_from_u64(s).random::<f64>()))
            .unwrap()
            .values
    }

    #[test]
    fn deterministic_across_threads() {
        let a = draw_vec(11, Some(1));
        assert_eq!(a, draw_vec(11, Some(2)));
        assert_eq!(a, draw_vec(11, Some(8)));
        assert_eq!(a, draw_vec(11, None));
    }

    #[test]
    fn seeds_give_distinct_runs() {
        let runs: Vec<Vec<f64>> = (0..100).map(|s| draw_vec(s, Some(1))).collect();
        for i in 0..runs.len() {
            for j in 0..i {
                assert_ne!(runs[i], runs[j]);
            }
        }
    }

    #[test]
    fn retries_and_failures() {
        let cfg = McConfig::new(4, 1).with_threads(Some(1));
        // Fails on the first attempt of replicate 2 only.
        let base2 = derive_seed(1, 2);
        let r = run_replicates(&cfg, |i, s| if i == 2 && s == base2 { Err(Error::Estimation("x".into())) } else { Ok(i) })
            .unwrap();
        assert_eq!(r.retries, 1);
        let err = run_replicates(&cfg, |i, _| if i == 3 { Err(Error::Estimation("boom".into())) } else { Ok(i) })
            .unwrap_err();
        assert!(matches!(err, Error::Replicates { failed: 1, total: 4, .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn boundary_b_one() {
        let out = McOutcome::from_pairs(
            (0.3, 0.1),
            Replicates {
                values: vec![(0.3, 0.2)],
                retries: 0,
            },
            5,
        );
        let r = out.decide(0.5).unwrap();
        assert_eq!(r.critical_ks, 0.3);
        assert!(r.reject_ks);
        assert!(!r.reject_cvm);
        assert_eq!(r.p_ks, 1.0);
        assert_eq!(r.p_cvm, 1.0);
    }

    #[test]
    fn result_json_field_names() {
        let out = McOutcome::from_pairs((1.0, 1.0), Replicates { values: vec![(0.5, 0.5)], retries: 0 }, 3);
        let v = serde_json::to_value(out.decide(0.1).unwrap()).unwrap();
        assert_eq!(v["B"], 1);
        assert!(v.get("theta_hat").is_none());
    }
}
