//! Size and power simulations: nested Monte Carlo over data sets, each
//! running a complete test, reported as rejection frequencies.
//!
//! Meta-replication `j` of an experiment with seed `s` uses the stream
//! `m = derive_seed(s, j)`: data are drawn from `derive_seed(m, 0)` and the
//! test runs with master seed `derive_seed(m, 1)`. Row `k` of a table run
//! with seed `s` gets the experiment seed `derive_seed(s, k)`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::estimation::{ExpShifted, NormalFamily, ParametricFamily};
use crate::functional::{functional_outcome, FunctionalProblem};
use crate::gof::{gof_family_outcome, gof_outcome, GofProblem};
use crate::montecarlo::{derive_seed, with_pool, McConfig, McOutcome};
use crate::template::{Conventions, DistTemplate};
use crate::weights::WeightSpec;
use crate::{Error, Result, Sample};

/// Meta-replications and Monte-Carlo replications of a full-scale table run.
pub const FULL_META: usize = 1000;
pub const FULL_B: usize = 500;
/// Reduced profile for automated runs.
pub const CI_META: usize = 200;
pub const CI_B: usize = 200;

pub const DEFAULT_NS: [usize; 2] = [25, 50];
pub const DEFAULT_ALPHAS: [f64; 3] = [0.025, 0.05, 0.1];

/// Table identifiers accepted by [`scenarios`].
pub const TABLES: [&str; 6] = ["1", "3", "5", "7", "9", "demo"];

/// A parametric null family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `Exp(θ + μ_i)` with `μ_i` given as an expression in `i`.
    ExpShifted { shift: String },
    /// `N(mean, variance)`, the same for every `i`.
    Normal,
}

impl FamilyConfig {
    pub fn build(&self) -> Result<Box<dyn ParametricFamily>> {
        Ok(match self {
            FamilyConfig::ExpShifted { shift } => Box::new(ExpShifted::new(shift)?),
            FamilyConfig::Normal => Box::new(NormalFamily),
        })
    }
}

/// What is simulated and which test is run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    /// Data `X_i ~ data(i)`, tested against the mixture of `null(i)`.
    Gof { data: DistTemplate, null: DistTemplate },
    /// Data `X_i ~ data(i)`, tested against a parametric family.
    GofFamily { data: DistTemplate, family: FamilyConfig },
    /// `X_i ~ x(i)`, `i ≤ n`, and `V_j ~ v(j)`, `j ≤ r`.
    Homogeneity { x: DistTemplate, v: DistTemplate },
    Symmetry { data: DistTemplate },
    /// Independence of the first `split` coordinates from the rest.
    Independence { data: DistTemplate, split: usize },
}

/// One cell block of a table: a scenario at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub table: String,
    pub scenario_id: String,
    pub label: String,
    pub scenario: Scenario,
    pub n: usize,
    /// Size of the second sample (homogeneity only); defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub alphas: Vec<f64>,
    pub meta: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub conventions: Conventions,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r == Some(0) || self.meta == 0 || self.b == 0 {
            return Err(Error::Config("n, r, meta and B must all be >= 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("at least one alpha is required".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {a}")));
        }
        Ok(())
    }
}

/// Rejection frequencies of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub table: String,
    pub scenario: String,
    pub label: String,
    pub n: usize,
    pub alphas: Vec<f64>,
    pub ks_rate: Vec<f64>,
    pub cvm_rate: Vec<f64>,
    pub meta: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    /// Meta-replications whose test failed; rates are over the others.
    pub failures: usize,
    pub wall_time: f64,
}

/// Instantiated distributions and nulls, shared by all meta-replications.
enum Prepared {
    Gof {
        data: Vec<DistributionSpec>,
        null: crate::distributions::MixtureSpec,
    },
    Family {
        data: Vec<DistributionSpec>,
        family: Box<dyn ParametricFamily>,
    },
    Homogeneity {
        x: Vec<DistributionSpec>,
        v: Vec<DistributionSpec>,
    },
    Symmetry {
        data: Vec<DistributionSpec>,
    },
    Independence {
        data: Vec<DistributionSpec>,
        split: usize,
    },
}

fn draw(seq: &[DistributionSpec], rng: &mut ChaCha8Rng) -> Result<Sample> {
    let dim = seq.first().map_or(1, DistributionSpec::dim);
    let mut values = Vec::with_capacity(seq.len() * dim);
    for d in seq {
        if d.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: d.dim(),
            });
        }
        d.draw_into(rng, &mut values);
    }
    Sample::new(dim, values)
}

impl Prepared {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let conv = &spec.conventions;
        let n = spec.n;
        Ok(match &spec.scenario {
            Scenario::Gof { data, null } => Prepared::Gof {
                data: data.sequence(n, conv)?,
                null: null.mixture(&spec.weights.build(n)?, conv)?,
            },
            Scenario::GofFamily { data, family } => Prepared::Family {
                data: data.sequence(n, conv)?,
                family: family.build()?,
            },
            Scenario::Homogeneity { x, v } => Prepared::Homogeneity {
                x: x.sequence(n, conv)?,
                v: v.sequence(spec.r.unwrap_or(n), conv)?,
            },
            Scenario::Symmetry { data } => Prepared::Symmetry {
                data: data.sequence(n, conv)?,
            },
            Scenario::Independence { data, split } => Prepared::Independence {
                data: data.sequence(n, conv)?,
                split: *split,
            },
        })
    }

    fn replicate(&self, spec: &ExperimentSpec, meta_seed: u64) -> Result<McOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(meta_seed, 0));
        let cfg = McConfig::new(spec.b, derive_seed(meta_seed, 1)).with_threads(Some(1));
        let w = |k: usize| spec.weights.build(k);
        match self {
            Prepared::Gof { data, null } => {
                let p = GofProblem::new(draw(data, &mut rng)?, w(data.len())?)?;
                gof_outcome(&p, null, &cfg)
            }
            Prepared::Family { data, family } => {
                let p = GofProblem::new(draw(data, &mut rng)?, w(data.len())?)?;
                gof_family_outcome(&p, family.as_ref(), &cfg)
            }
            Prepared::Homogeneity { x, v } => {
                let xs = draw(x, &mut rng)?;
                let vs = draw(v, &mut rng)?;
                let p = FunctionalProblem::homogeneity(xs, w(x.len())?, vs, w(v.len())?)?;
                functional_outcome(&p, &cfg)
            }
            Prepared::Symmetry { data } => {
                let p = FunctionalProblem::symmetry(draw(data, &mut rng)?, w(data.len())?)?;
                functional_outcome(&p, &cfg)
            }
            Prepared::Independence { data, split } => {
                let p = FunctionalProblem::independence(draw(data, &mut rng)?, *split, w(data.len())?)?;
                functional_outcome(&p, &cfg)
            }
        }
    }
}

/// Runs all meta-replications of `spec`. `threads` follows
/// [`McConfig::threads`]; the output does not depend on it.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<TableRow> {
    spec.validate()?;
    let start = Instant::now();
    let prepared = Prepared::new(spec)?;
    let one = |j: usize| -> Result<Vec<(bool, bool)>> {
        let outcome = prepared.replicate(spec, derive_seed(spec.seed, j as u64))?;
        spec.alphas
            .iter()
            .map(|&a| outcome.decide(a).map(|t| (t.reject_ks, t.reject_cvm)))
            .collect()
    };
    let decisions: Vec<Result<Vec<(bool, bool)>>> = match threads {
        Some(1) => (0..spec.meta).map(one).collect(),
        t => with_pool(t, || (0..spec.meta).into_par_iter().map(one).collect())?,
    };

    let mut ks = vec![0usize; spec.alphas.len()];
    let mut cvm = vec![0usize; spec.alphas.len()];
    let mut failures = 0;
    let mut first_error = None;
    for d in decisions {
        match d {
            Ok(per_alpha) => {
                for (a, (rk, rc)) in per_alpha.into_iter().enumerate() {
                    ks[a] += rk as usize;
                    cvm[a] += rc as usize;
                }
            }
            Err(e) => {
                failures += 1;
                if first_error.is_none() {
                    log::warn!("{} {} n={}: meta-replication failed: {e}", spec.table, spec.scenario_id, spec.n);
                    first_error = Some(e);
                }
            }
        }
    }
    let completed = spec.meta - failures;
    if completed == 0 {
        return Err(Error::Replicates {
            failed: failures,
            total: spec.meta,
            first: first_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let rate = |c: &[usize]| c.iter().map(|&k| k as f64 / completed as f64).collect();
    Ok(TableRow {
        table: spec.table.clone(),
        scenario: spec.scenario_id.clone(),
        label: spec.label.clone(),
        n: spec.n,
        alphas: spec.alphas.clone(),
        ks_rate: rate(&ks),
        cvm_rate: rate(&cvm),
        meta: spec.meta,
        b: spec.b,
        seed: spec.seed,
        failures,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// A catalogue entry: identifier, display label and scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogueEntry {
    pub id: String,
    pub label: String,
    pub scenario: Scenario,
}

fn t(family: &str, params: &[&str]) -> DistTemplate {
    DistTemplate::new(family, params.iter().map(|p| match p.parse::<f64>() {
        Ok(v) => v.into(),
        Err(_) => (*p).into(),
    }).collect())
}

fn entry(id: &str, label: &str, scenario: Scenario) -> CatalogueEntry {
    CatalogueEntry {
        id: id.to_string(),
        label: label.to_string(),
        scenario,
    }
}

const LOG: &str = "1/log(i+1)";
const SQRT: &str = "1/sqrt(i)";
const INV: &str = "1/i";

/// Scenario rows of a table, in table order.
pub fn scenarios(table: &str) -> Result<Vec<CatalogueEntry>> {
    let gof = |data: DistTemplate, null: DistTemplate| Scenario::Gof { data, null };
    let fam = |data: DistTemplate, shift: &str| Scenario::GofFamily {
        data,
        family: FamilyConfig::ExpShifted { shift: shift.to_string() },
    };
    let hom = |x: DistTemplate, v: DistTemplate| Scenario::Homogeneity { x, v };
    let sym = |data: DistTemplate| Scenario::Symmetry { data };
    let ind = |data: DistTemplate| Scenario::Independence { data, split: 1 };
    let prod = |a: DistTemplate, b: DistTemplate| DistTemplate::product(vec![a, b]);
    Ok(match table {
        "1" => vec![
            entry("1.1", "logistic(1/log(i+1),1)", gof(t("logistic", &[LOG, "1"]), t("logistic", &[LOG, "1"]))),
            entry("1.2", "logistic(1/sqrt(i),1)", gof(t("logistic", &[SQRT, "1"]), t("logistic", &[SQRT, "1"]))),
            entry("1.3", "logistic(1/i,1)", gof(t("logistic", &[INV, "1"]), t("logistic", &[INV, "1"]))),
            entry(
                "1.4",
                "laplace(-1/i,1/2) vs logistic(1/log(i+1),1)",
                gof(t("laplace", &["-1/i", "0.5"]), t("logistic", &[LOG, "1"])),
            ),
            entry(
                "1.5",
                "cauchy(-1/log(i+1),1/2) vs logistic(1/sqrt(i),1)",
                gof(t("cauchy", &["-1/log(i+1)", "0.5"]), t("logistic", &[SQRT, "1"])),
            ),
            entry(
                "1.6",
                "normal(-1/log(i+1),1/2) vs logistic(1/i,1)",
                gof(t("normal", &["-1/log(i+1)", "0.5"]), t("logistic", &[INV, "1"])),
            ),
        ],
        "3" => vec![
            entry("3.1", "exponential(1+1/log(i+1))", fam(t("exponential", &["1+1/log(i+1)"]), LOG)),
            entry("3.2", "exponential(2+1/sqrt(i))", fam(t("exponential", &["2+1/sqrt(i)"]), SQRT)),
            entry("3.3", "exponential(3+1/i)", fam(t("exponential", &["3+1/i"]), INV)),
            entry("3.4", "weibull(1+1/log(i+1),1)", fam(t("weibull", &["1+1/log(i+1)", "1"]), LOG)),
            entry(
                "3.5",
                "inverse-gaussian(2/3,1+1/sqrt(i))",
                fam(t("inverse-gaussian", &["2/3", "1+1/sqrt(i)"]), SQRT),
            ),
            entry("3.6", "gamma(1/2,1/(1+1/i))", fam(t("gamma", &["0.5", "1/(1+1/i)"]), INV)),
        ],
        "5" => vec![
            entry("5.1", "normal(0,1+1/log(i+1))", sym(t("normal", &["0", "1+1/log(i+1)"]))),
            entry("5.2", "logistic(0,1/2+1/sqrt(i))", sym(t("logistic", &["0", "0.5+1/sqrt(i)"]))),
            entry("5.3", "cauchy(0,2+1/i)", sym(t("cauchy", &["0", "2+1/i"]))),
            entry("5.4", "normal(1/2,1+1/log(i+1))", sym(t("normal", &["0.5", "1+1/log(i+1)"]))),
            entry("5.5", "logistic(1/3,1/2+1/sqrt(i))", sym(t("logistic", &["1/3", "0.5+1/sqrt(i)"]))),
            entry("5.6", "cauchy(3/2,2+1/i)", sym(t("cauchy", &["1.5", "2+1/i"]))),
        ],
        "7" => {
            let w_log = t("weibull", &["1+1/log(i+1)", "1"]);
            let ig = t("inverse-gaussian", &["2/3", "1+1/sqrt(i)"]);
            let exp = t("exponential", &["1+1/i"]);
            vec![
                entry("7.1", "weibull(1+1/log(i+1),1)", hom(w_log.clone(), w_log)),
                entry("7.2", "inverse-gaussian(2/3,1+1/sqrt(i))", hom(ig.clone(), ig)),
                entry("7.3", "exponential(1+1/i)", hom(exp.clone(), exp.clone())),
                entry("7.4", "exponential(1+1/i) vs weibull(1+1/i,1/3)", hom(exp, t("weibull", &["1+1/i", "1/3"]))),
                entry(
                    "7.5",
                    "inverse-gaussian(2,1+1/sqrt(i)) vs gamma(1/2,1/(1+1/sqrt(i)))",
                    hom(
                        t("inverse-gaussian", &["2", "1+1/sqrt(i)"]),
                        t("gamma", &["0.5", "1/(1+1/sqrt(i))"]),
                    ),
                ),
                entry(
                    "7.6",
                    "inverse-gaussian(1/2,1+1/log(i+1)) vs weibull(1+1/log(i+1),1/2)",
                    hom(
                        t("inverse-gaussian", &["0.5", "1+1/log(i+1)"]),
                        t("weibull", &["1+1/log(i+1)", "0.5"]),
                    ),
                ),
            ]
        }
        "9" => vec![
            entry(
                "9.1",
                "normal(1/i,1) x normal(0,1)",
                ind(prod(t("normal", &[INV, "1"]), t("normal", &["0", "1"]))),
            ),
            entry(
                "9.2",
                "logistic(1/sqrt(i),1) x logistic(0,1)",
                ind(prod(t("logistic", &[SQRT, "1"]), t("logistic", &["0", "1"]))),
            ),
            entry(
                "9.3",
                "cauchy(1/log(i+1),1) x cauchy(0,1)",
                ind(prod(t("cauchy", &[LOG, "1"]), t("cauchy", &["0", "1"]))),
            ),
            entry(
                "9.4",
                "bivariate-normal((1/i)(1,1),[[2,1],[1,2]])",
                ind(t("bivariate-normal", &[INV, INV, "2", "1", "2"])),
            ),
            entry(
                "9.5",
                "bivariate-t(1,(1/sqrt(i))(1,1),[[2,1],[1,2]])",
                ind(t("bivariate-t", &["1", SQRT, SQRT, "2", "1", "2"])),
            ),
            entry(
                "9.6",
                "bivariate-logistic(1/log(i+1),1,1/log(i+1),1)",
                ind(t("bivariate-logistic", &[LOG, "1", LOG, "1"])),
            ),
        ],
        "demo" => {
            let noisy = t("noisy-logistic", &["0", "1", INV]);
            vec![entry("demo.1", "logistic(0,1) + normal(0,1/i)", gof(noisy.clone(), noisy))]
        }
        other => {
            return Err(Error::Config(format!(
                "unknown table `{other}` (expected one of: {})",
                TABLES.join(", ")
            )))
        }
    })
}

/// Settings of a table run; [`TableOptions::full`] and [`TableOptions::ci`]
/// are the two standard profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct TableOptions {
    pub meta: usize,
    pub b: usize,
    pub seed: u64,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub weights: WeightSpec,
    pub conventions: Conventions,
}

impl TableOptions {
    pub fn full(seed: u64) -> Self {
        Self {
            meta: FULL_META,
            b: FULL_B,
            seed,
            ns: DEFAULT_NS.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            weights: WeightSpec::Uniform,
            conventions: Conventions::default(),
        }
    }

    pub fn ci(seed: u64) -> Self {
        Self {
            meta: CI_META,
            b: CI_B,
            ..Self::full(seed)
        }
    }
}

/// The experiments of a table, one per (scenario, n), in output order.
pub fn table_experiments(table: &str, opts: &TableOptions) -> Result<Vec<ExperimentSpec>> {
    let mut out = Vec::new();
    for e in scenarios(table)? {
        for &n in &opts.ns {
            let seed = derive_seed(opts.seed, out.len() as u64);
            out.push(ExperimentSpec {
                table: table.to_string(),
                scenario_id: e.id.clone(),
                label: e.label.clone(),
                scenario: e.scenario.clone(),
                n,
                r: None,
                alphas: opts.alphas.clone(),
                meta: opts.meta,
                b: opts.b,
                seed,
                weights: opts.weights.clone(),
                conventions: opts.conventions,
            });
        }
    }
    Ok(out)
}

/// The single experiment of `table` for scenario `id` at size `n`, with the
/// seed it gets in a full table run.
pub fn find_experiment(table: &str, id: &str, n: usize, opts: &TableOptions) -> Result<ExperimentSpec> {
    table_experiments(table, opts)?
        .into_iter()
        .find(|s| s.scenario_id == id && s.n == n)
        .ok_or_else(|| Error::Config(format!("table {table} has no scenario {id} at n = {n}")))
}

pub fn run_table(table: &str, opts: &TableOptions, threads: Option<usize>) -> Result<Vec<TableRow>> {
    table_experiments(table, opts)?
        .iter()
        .map(|spec| {
            let row = run_experiment(spec, threads)?;
            log::info!(
                "table {} {} n={}: {:.1}s",
                row.table,
                row.scenario,
                row.n,
                row.wall_time
            );
            Ok(row)
        })
        .collect()
}

pub const CSV_HEADER: [&str; 9] = ["table", "scenario", "n", "alpha", "ks_rate", "cvm_rate", "meta", "B", "seed"];

/// Writes one CSV record per (row, alpha). Wall times are not written, so
/// the output is reproducible byte for byte.
pub fn write_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        for (a, alpha) in row.alphas.iter().enumerate() {
            w.write_record([
                row.table.clone(),
                row.scenario.clone(),
                row.n.to_string(),
                alpha.to_string(),
                format!("{:.3}", row.ks_rate[a]),
                format!("{:.3}", row.cvm_rate[a]),
                row.meta.to_string(),
                row.b.to_string(),
                row.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes each experiment as `table<T>_<id>_n<N>.json` into `dir`, in the
/// format read by [`ExperimentSpec::from_json`]. Returns the paths written.
pub fn export_configs(specs: &[ExperimentSpec], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    specs
        .iter()
        .map(|s| {
            let path = dir.join(format!("table{}_{}_n{}.json", s.table, s.scenario_id, s.n));
            std::fs::write(&path, serde_json::to_string_pretty(s)? + "\n")?;
            Ok(path)
        })
        .collect()
}
