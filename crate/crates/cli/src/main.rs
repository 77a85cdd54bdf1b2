use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskbudget::bench::{
    cmd_accuracy_study, cmd_measure_comparison, cmd_reference, cmd_sgd_trace, comparison_table,
    load_model, study_table, write_bench_csv, write_comparison_csv, write_runs_csv,
    write_trace_csv, ExperimentSpec,
};
use riskbudget::models::{
    em_fit_gmix, em_fit_tmix, sample_model, EmConfig, ReturnModel, ReturnSample, RowSource,
};
use riskbudget::risk::RiskMeasureSpec;
use riskbudget::solver::{solve, Method, ProblemData, SolveReport, SolverConfig};
use riskbudget::{Budgets, RbError, Result};

#[derive(Parser)]
#[command(
    name = "riskbudget",
    version,
    about = "Risk budgeting portfolios via stochastic optimization"
)]
struct Cli {
    /// JSON configuration: solver settings, or the experiment for `study`, or EM settings for `fit`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Leave wall-clock times out of all written files.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArg {
    /// Model JSON file, or `bundled:<name>`.
    #[arg(long)]
    model: String,
}

#[derive(Args)]
struct DataArgs {
    /// Model JSON file, or `bundled:<name>`.
    #[arg(long, conflicts_with = "sample", required_unless_present = "sample")]
    model: Option<String>,
    /// Return sample CSV, one asset per column.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// The sample CSV has a header row.
    #[arg(long, requires = "sample")]
    header: bool,
    /// Rows drawn from the model for sample-based methods.
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sgd,
    Osbgd,
    Msbgd,
    Reference,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sgd => Method::Sgd,
            MethodArg::Osbgd => Method::Osbgd,
            MethodArg::Msbgd => Method::Msbgd,
            MethodArg::Reference => Method::Reference,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Tmix,
    Gmix,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ES risk budgeting portfolio of a model.
    Reference {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        /// Comma-separated budgets (default: equal).
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
    },
    /// Solve one risk budgeting problem.
    Solve {
        #[command(flatten)]
        data: DataArgs,
        /// Shorthand (`es:0.95`, `mad`, `spectral:0.05`, ...) or JSON object.
        #[arg(long, default_value = "es:0.95")]
        measure: String,
        /// Overrides the configured method.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
    },
    /// SGD for ES with every iterate written to CSV.
    Trace {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
    },
    /// Accuracy and time study on synthetic models.
    Study {
        /// Comma-separated dimensions, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Risk budgeting weights under several risk measures on one sample.
    Compare {
        #[command(flatten)]
        model: ModelArg,
        /// Measures to compare (repeatable); defaults to a standard list.
        #[arg(long = "measure")]
        measures: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
    },
    /// Fit a Student-t or Gaussian mixture to a return sample by EM.
    Fit {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        header: bool,
        #[arg(long, value_enum, default_value = "tmix")]
        family: FamilyArg,
        #[arg(long, default_value_t = 2)]
        components: usize,
        /// Degrees of freedom per component for `tmix`.
        #[arg(long, value_delimiter = ',', default_value = "4,2.5")]
        nu: Vec<f64>,
    },
    /// Draw a return sample from a model.
    Sample {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RbError::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        RbError::Parse(format!(
            "{}: line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn budgets(given: Option<Vec<f64>>, d: usize) -> Result<Budgets> {
    match given {
        Some(b) if b.len() != d => Err(RbError::DimensionMismatch {
            expected: d,
            found: b.len(),
        }),
        Some(b) => Budgets::new(b),
        None => Ok(Budgets::equal(d)),
    }
}

struct Output {
    dir: PathBuf,
    timing: bool,
}

impl Output {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        eprintln!("writing {}", path.display());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn report(&self, name: &str, report: &SolveReport) -> Result<()> {
        let report = if self.timing {
            report.clone()
        } else {
            report.clone().without_timing()
        };
        let mut f = self.create(name)?;
        writeln!(f, "{}", report.to_json()?)?;
        f.flush()?;
        Ok(())
    }
}

fn solver_config(cli: &Cli) -> Result<SolverConfig> {
    let mut cfg: SolverConfig = match &cli.config {
        Some(p) => read_json(p)?,
        None => SolverConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

enum Data {
    Sample(ReturnSample),
    Model(ReturnModel, usize),
}

impl Data {
    fn load(args: &DataArgs) -> Result<Self> {
        match (&args.model, &args.sample) {
            (Some(m), _) => Ok(Data::Model(load_model(m)?, args.n)),
            (None, Some(p)) => {
                let f = File::open(p)
                    .map_err(|e| RbError::Parse(format!("cannot read {}: {e}", p.display())))?;
                Ok(Data::Sample(ReturnSample::read_csv(f, args.header)?))
            }
            (None, None) => Err(RbError::Precondition("give --model or --sample".into())),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Data::Sample(s) => s.dim(),
            Data::Model(m, _) => m.dim(),
        }
    }

    fn sample(&self, seed: u64) -> Result<ReturnSample> {
        match self {
            Data::Sample(s) => Ok(s.clone()),
            Data::Model(m, n) => sample_model(m, *n, seed),
        }
    }
}

fn default_measures() -> Vec<RiskMeasureSpec> {
    vec![
        RiskMeasureSpec::Volatility,
        RiskMeasureSpec::mad(),
        RiskMeasureSpec::es(0.95),
        RiskMeasureSpec::es_minus_mean(0.95),
        RiskMeasureSpec::spectral(0.05, false),
        RiskMeasureSpec::spectral(0.05, true),
        RiskMeasureSpec::mad_plus_mean(),
        RiskMeasureSpec::variantile(0.99),
    ]
}

fn run(cli: Cli) -> Result<()> {
    let out = Output {
        dir: cli.out.clone(),
        timing: !cli.no_timing,
    };
    match &cli.command {
        Command::Reference {
            model,
            alpha,
            budgets: b,
        } => {
            let model = load_model(&model.model)?;
            let b = budgets(b.clone(), model.dim())?;
            let report = cmd_reference(&model, &b, *alpha, &solver_config(&cli)?)?;
            print!("{}", report.table());
            out.report("reference.json", &report)?;
        }
        Command::Solve {
            data,
            measure,
            method,
            budgets: b,
        } => {
            let spec: RiskMeasureSpec = measure.parse()?;
            let mut cfg = solver_config(&cli)?;
            if let Some(m) = method {
                cfg.method = (*m).into();
            }
            let data = Data::load(data)?;
            let b = budgets(b.clone(), data.dim())?;
            let sample;
            let problem = match (&data, cfg.method) {
                (Data::Model(m, _), Method::Msbgd | Method::Reference) => ProblemData::Model(m),
                _ => {
                    sample = data.sample(cfg.seed)?;
                    ProblemData::Sample(&sample)
                }
            };
            let report = solve(&spec, &b, problem, &cfg)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            println!(
                "{} {} ({} iterations)",
                report.method, report.measure, report.iterations
            );
            print!("{}", report.table());
            out.report("solve.json", &report)?;
            let report = if out.timing {
                report
            } else {
                report.without_timing()
            };
            report.write_csv(out.create("solve.csv")?)?;
        }
        Command::Trace {
            data,
            alpha,
            budgets: b,
        } => {
            let cfg = solver_config(&cli)?;
            let data = Data::load(data)?;
            let b = budgets(b.clone(), data.dim())?;
            let sample = data.sample(cfg.seed)?;
            let (report, rows) = cmd_sgd_trace(&sample, &b, *alpha, &cfg)?;
            print!("{}", report.table());
            write_trace_csv(out.create("trace.csv")?, &rows)?;
            out.report("trace_report.json", &report)?;
        }
        Command::Study { dims, repetitions } => {
            let mut spec: ExperimentSpec = match &cli.config {
                Some(p) => read_json(p)?,
                None => ExperimentSpec::default(),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if let Some(d) = dims {
                spec.dims = d.clone();
            }
            if let Some(m) = repetitions {
                spec.repetitions = *m;
            }
            let dir = spec.output_dir.clone().unwrap_or_else(|| out.dir.clone());
            let out = Output { dir, ..out };
            let result = cmd_accuracy_study(&spec, out.timing)?;
            print!("{}", study_table(&result.rows));
            write_bench_csv(out.create("study.csv")?, &result.rows)?;
            write_runs_csv(out.create("study_runs.csv")?, &result.runs)?;
        }
        Command::Compare {
            model,
            measures,
            n,
            budgets: b,
        } => {
            let model = load_model(&model.model)?;
            let b = budgets(b.clone(), model.dim())?;
            let specs = if measures.is_empty() {
                default_measures()
            } else {
                measures.iter().map(|m| m.parse()).collect::<Result<_>>()?
            };
            let rows = cmd_measure_comparison(&model, &specs, &b, *n, &solver_config(&cli)?)?;
            print!("{}", comparison_table(&rows));
            for r in &rows {
                for w in &r.warnings {
                    println!("warning [{}]: {w}", r.measure);
                }
            }
            write_comparison_csv(out.create("compare.csv")?, &rows)?;
        }
        Command::Fit {
            sample,
            header,
            family,
            components,
            nu,
        } => {
            let mut em: EmConfig = match &cli.config {
                Some(p) => read_json(p)?,
                None => EmConfig::default(),
            };
            if let Some(s) = cli.seed {
                em.seed = s;
            }
            let f = File::open(sample)
                .map_err(|e| RbError::Parse(format!("cannot read {}: {e}", sample.display())))?;
            let sample = ReturnSample::read_csv(f, *header)?;
            let (model, trace, converged): (ReturnModel, _, _) = match family {
                FamilyArg::Tmix => {
                    let fit = em_fit_tmix(&sample, *components, nu, &em)?;
                    (fit.model.into(), fit.loglik_trace, fit.converged)
                }
                FamilyArg::Gmix => {
                    let fit = em_fit_gmix(&sample, *components, &em)?;
                    (fit.model.into(), fit.loglik_trace, fit.converged)
                }
            };
            println!(
                "{} iterations, log-likelihood {:.6}, converged: {converged}",
                trace.len(),
                trace.last().copied().unwrap_or(f64::NAN)
            );
            let mut w = out.create("fit.json")?;
            writeln!(w, "{}", model.to_json()?)?;
            w.flush()?;
        }
        Command::Sample { model, n } => {
            let model = load_model(&model.model)?;
            let seed = cli.seed.unwrap_or(0);
            let sample = sample_model(&model, *n, seed)?;
            sample.write_csv(out.create("sample.csv")?, true)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
