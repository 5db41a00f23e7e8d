use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mixgof::estimation::ParametricFamily;
use mixgof::functional::{functional_test, FunctionalProblem};
use mixgof::gof::{gof_family_test, gof_test, GofProblem, TestResult};
use mixgof::harness::{self, ExperimentSpec, FamilyConfig, TableOptions};
use mixgof::io::read_sample_file;
use mixgof::montecarlo::McConfig;
use mixgof::template::{
    Conventions, GammaParam, InverseGaussianParam, NormalParam, NullFile, WeibullParam,
};
use mixgof::weights::WeightSpec;
use mixgof::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Kolmogorov-Smirnov and Cramer-von-Mises type tests for independent,
/// non-identically distributed observations.
#[derive(Parser)]
#[command(name = "mixgof", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Goodness-of-fit against a fully specified null mixture.
    Gof {
        /// CSV file, one observation per row.
        #[arg(long, value_parser = existing_file)]
        data: PathBuf,
        /// JSON null mixture: {"generator": {...}} or {"components": [...]}.
        #[arg(long, value_parser = existing_file)]
        null: PathBuf,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Goodness-of-fit against a parametric family, with the parameter
    /// estimated by weighted maximum likelihood and a parametric bootstrap.
    GofFamily {
        /// CSV file, one observation per row.
        #[arg(long, value_parser = existing_file)]
        data: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyName,
        /// Shift mu_i of the rate, an expression in i (exp-shifted only).
        #[arg(long, default_value = "0")]
        shift: String,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Equality of the mixtures of two independent samples.
    Homogeneity {
        /// CSV file with the first sample.
        #[arg(long, value_parser = existing_file)]
        x: PathBuf,
        /// CSV file with the second sample.
        #[arg(long, value_parser = existing_file)]
        v: PathBuf,
        /// Weights of the second sample.
        #[arg(long, default_value = "uniform")]
        weights_v: WeightSpec,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Central symmetry of the mixture about the origin.
    Symmetry {
        /// CSV file, one observation per row.
        #[arg(long, value_parser = existing_file)]
        data: PathBuf,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Independence of the first k columns from the remaining ones.
    Independence {
        /// CSV file, one pair per row.
        #[arg(long, value_parser = existing_file)]
        data: PathBuf,
        /// Number of leading columns in the first block.
        #[arg(long, default_value_t = 1)]
        split: usize,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Size/power simulations: a whole table or a single exported experiment.
    Simulate {
        /// Table to run: 1, 3, 5, 7, 9 or demo.
        #[arg(
            long,
            required_unless_present = "config",
            conflicts_with = "config",
            value_parser = clap::builder::PossibleValuesParser::new(harness::TABLES)
        )]
        table: Option<String>,
        /// Experiment config (as written by --export-configs) to run alone.
        #[arg(long, value_parser = existing_file)]
        config: Option<PathBuf>,
        /// Meta-replications (simulated data sets) per table cell.
        #[arg(long, default_value_t = harness::FULL_META)]
        meta: usize,
        /// Monte-Carlo replications per test.
        #[arg(long = "B", default_value_t = harness::FULL_B)]
        b: usize,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample sizes.
        #[arg(long = "n", value_delimiter = ',', default_values_t = harness::DEFAULT_NS)]
        ns: Vec<usize>,
        /// Significance levels.
        #[arg(long = "alpha", value_delimiter = ',', default_values_t = harness::DEFAULT_ALPHAS)]
        alphas: Vec<f64>,
        /// Weight scheme of every sample.
        #[arg(long, default_value = "uniform")]
        weights: WeightSpec,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one JSON config per table cell into this directory and exit.
        #[arg(long)]
        export_configs: Option<PathBuf>,
        #[command(flatten)]
        conventions: ConventionArgs,
    },
    /// Check weights, a null file or an experiment config and print diagnostics.
    Validate {
        #[arg(long)]
        weights: Option<WeightSpec>,
        /// Number of observations for --weights and --null.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = existing_file)]
        null: Option<PathBuf>,
        #[arg(long, value_parser = existing_file)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        #[command(flatten)]
        conventions: ConventionArgs,
    },
}

#[derive(Args)]
struct TestArgs {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte-Carlo replications.
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Weights: uniform, linear or a comma-separated list.
    #[arg(long, default_value = "uniform")]
    weights: WeightSpec,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    conventions: ConventionArgs,
}

#[derive(Args)]
struct ConventionArgs {
    /// Second parameter of normal distributions.
    #[arg(long, default_value_t = NormalParam::Variance)]
    normal_second_param: NormalParam,
    /// Second parameter of gamma distributions.
    #[arg(long, default_value_t = GammaParam::Rate)]
    gamma_second_param: GammaParam,
    /// Parameter order of Weibull distributions.
    #[arg(long, default_value_t = WeibullParam::ShapeScale)]
    weibull_order: WeibullParam,
    /// Parameter order of inverse Gaussian distributions.
    #[arg(long, default_value_t = InverseGaussianParam::MeanShape)]
    inverse_gaussian_order: InverseGaussianParam,
}

impl ConventionArgs {
    fn get(&self) -> Conventions {
        Conventions {
            normal_second_param: self.normal_second_param,
            gamma_second_param: self.gamma_second_param,
            weibull_order: self.weibull_order,
            inverse_gaussian_order: self.inverse_gaussian_order,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    /// Exp(theta + mu_i) mixtures; see --shift.
    ExpShifted,
    /// N(mean, variance) for every observation.
    Normal,
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report("usage", &e.render().to_string());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = if e.is_numerical() {
                ("numerical", EXIT_NUMERICAL)
            } else {
                ("data", EXIT_DATA)
            };
            report(kind, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn report(kind: &str, message: &str) {
    let line = json!({ "error": kind, "message": message.trim_end() });
    eprintln!("{line}");
}

fn run(cli: Cli) -> mixgof::Result<()> {
    match cli.command {
        Command::Gof { data, null, test } => {
            let conv = test.conventions.get();
            let sample = read_sample_file(&data)?;
            let weights = test.weights.build(sample.len())?;
            let null_file = NullFile::from_json(&read_text(&null)?)?;
            let g = null_file.build(&weights, &conv)?;
            if g.dim() >= 2 && !g.is_discrete() {
                log::warn!(
                    "KS against a continuous null in dimension {} is evaluated on the grid of observed \
                     coordinates and is a lower bound of the supremum",
                    g.dim()
                );
            }
            let p = GofProblem::new(sample, weights)?;
            emit(&gof_test(&p, &g, test.alpha, &mc(&test))?, &test)
        }
        Command::GofFamily { data, family, shift, test } => {
            let config = match family {
                FamilyName::ExpShifted => FamilyConfig::ExpShifted { shift },
                FamilyName::Normal => FamilyConfig::Normal,
            };
            let fam: Box<dyn ParametricFamily> = config.build()?;
            let sample = read_sample_file(&data)?;
            let weights = test.weights.build(sample.len())?;
            let p = GofProblem::new(sample, weights)?;
            emit(&gof_family_test(&p, fam.as_ref(), test.alpha, &mc(&test))?, &test)
        }
        Command::Homogeneity { x, v, weights_v, test } => {
            let xs = read_sample_file(&x)?;
            let vs = read_sample_file(&v)?;
            let (a, b) = (test.weights.build(xs.len())?, weights_v.build(vs.len())?);
            let p = FunctionalProblem::homogeneity(xs, a, vs, b)?;
            emit(&functional_test(&p, test.alpha, &mc(&test))?, &test)
        }
        Command::Symmetry { data, test } => {
            let u = read_sample_file(&data)?;
            let w = test.weights.build(u.len())?;
            let p = FunctionalProblem::symmetry(u, w)?;
            emit(&functional_test(&p, test.alpha, &mc(&test))?, &test)
        }
        Command::Independence { data, split, test } => {
            let d = read_sample_file(&data)?;
            let w = test.weights.build(d.len())?;
            let p = FunctionalProblem::independence(d, split, w)?;
            emit(&functional_test(&p, test.alpha, &mc(&test))?, &test)
        }
        Command::Simulate {
            table,
            config,
            meta,
            b,
            seed,
            ns,
            alphas,
            weights,
            threads,
            out,
            export_configs,
            conventions,
        } => {
            let rows = if let Some(path) = config {
                let spec = ExperimentSpec::from_json(&read_text(&path)?)?;
                vec![harness::run_experiment(&spec, threads)?]
            } else {
                let table = table.expect("clap requires --table without --config");
                let opts = TableOptions {
                    meta,
                    b,
                    seed,
                    ns,
                    alphas,
                    weights,
                    conventions: conventions.get(),
                };
                if let Some(dir) = export_configs {
                    let specs = harness::table_experiments(&table, &opts)?;
                    for p in harness::export_configs(&specs, &dir)? {
                        println!("{}", p.display());
                    }
                    return Ok(());
                }
                harness::run_table(&table, &opts, threads)?
            };
            let mut buf = Vec::new();
            harness::write_csv(&rows, &mut buf)?;
            write_output(&buf, out.as_deref())
        }
        Command::Validate {
            weights,
            n,
            null,
            config,
            format,
            conventions,
        } => validate(weights, n, null, config, format, conventions.get()),
    }
}

fn validate(
    weights: Option<WeightSpec>,
    n: Option<usize>,
    null: Option<PathBuf>,
    config: Option<PathBuf>,
    format: ReportFormat,
    conv: Conventions,
) -> mixgof::Result<()> {
    if weights.is_none() && null.is_none() && config.is_none() {
        return Err(Error::Config("nothing to validate: pass --weights, --null or --config".into()));
    }
    let mut report = serde_json::Map::new();
    if weights.is_some() || null.is_some() {
        let n = n.ok_or_else(|| Error::Config("--weights and --null need --n".into()))?;
        let w = weights.unwrap_or_default().build(n)?;
        let d = w.diagnostics();
        report.insert("n".into(), json!(n));
        report.insert("root_n_max".into(), json!(d.root_n_max));
        report.insert("kappa_hat".into(), json!(d.kappa_hat));
        if let Some(msg) = d.warning {
            report.insert("warning".into(), json!(msg));
        }
        if let Some(path) = null {
            let g = NullFile::from_json(&read_text(&path)?)?.build(&w, &conv)?;
            report.insert("null_dim".into(), json!(g.dim()));
            report.insert("null_components".into(), json!(g.len()));
            report.insert("null_discrete".into(), json!(g.is_discrete()));
        }
    }
    if let Some(path) = config {
        let spec = ExperimentSpec::from_json(&read_text(&path)?)?;
        report.insert("experiment".into(), json!(format!("table {} {} n={}", spec.table, spec.scenario_id, spec.n)));
        report.insert("meta".into(), json!(spec.meta));
        report.insert("B".into(), json!(spec.b));
    }
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
        ReportFormat::Text => report
            .iter()
            .map(|(k, v)| match v {
                serde_json::Value::Number(x) if x.is_f64() => format!("{k} = {:.4}\n", x.as_f64().unwrap_or(f64::NAN)),
                serde_json::Value::String(s) => format!("{k} = {s}\n"),
                other => format!("{k} = {other}\n"),
            })
            .collect(),
    };
    write_output(text.as_bytes(), None)
}

fn mc(test: &TestArgs) -> McConfig {
    McConfig::new(test.b, test.seed).with_threads(test.threads)
}

fn read_text(path: &Path) -> mixgof::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn emit(result: &TestResult, args: &TestArgs) -> mixgof::Result<()> {
    let bytes = match args.format {
        Format::Json => (serde_json::to_string_pretty(result)? + "\n").into_bytes(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "statistic_ks",
                "statistic_cvm",
                "critical_ks",
                "critical_cvm",
                "p_ks",
                "p_cvm",
                "alpha",
                "B",
                "seed",
                "reject_ks",
                "reject_cvm",
                "theta_hat",
                "retries",
            ])?;
            let theta = result
                .theta_hat
                .as_ref()
                .map(|t| t.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            w.write_record([
                result.statistic_ks.to_string(),
                result.statistic_cvm.to_string(),
                result.critical_ks.to_string(),
                result.critical_cvm.to_string(),
                result.p_ks.to_string(),
                result.p_cvm.to_string(),
                result.alpha.to_string(),
                result.replications.to_string(),
                result.seed.to_string(),
                result.reject_ks.to_string(),
                result.reject_cvm.to_string(),
                theta,
                result.retries.to_string(),
            ])?;
            w.into_inner().map_err(|e| Error::Io(e.into_error()))?
        }
    };
    write_output(&bytes, args.out.as_deref())
}

fn write_output(bytes: &[u8], out: Option<&Path>) -> mixgof::Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}
