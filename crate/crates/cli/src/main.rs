//! `ifb`: generate instances, run solvers, benchmark schedules, fit rates and
//! run the property diagnostics.
//!
//! Exit status: 0 success, 1 a diagnostic check failed, 2 usage, 3 parse,
//! 4 numeric failure, 5 I/O.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ifb_core::analysis::{estimate_fstar, fit_rate_series, reference_options, FitOptions, RateModel};
use ifb_core::bench::{run_bench, BenchSpec, Method, FIVE_METHODS};
use ifb_core::diagnostics::{run_checks, CheckOptions};
use ifb_core::io::{
    read_trace, save_instance, write_trace, ProblemSpec, RunConfig, TraceFormat, DATA_DIR_ENV,
};
use ifb_core::problems::{LogisticGenParams, LogisticLipschitz};
use ifb_core::schedules::ScheduleKind;
use ifb_core::solver::{run, Algorithm, Modification, Restart, SolverOptions, Status, Termination};
use ifb_core::Error;

const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "ifb", version, about = "Inertial forward-backward solvers with general momentum schedules")]
struct Cli {
    /// Directory searched for relative dataset and instance paths.
    #[arg(long, global = true, env = DATA_DIR_ENV, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic instance to a JSON file.
    Gen(GenArgs),
    /// Run one (problem, schedule, algorithm) and persist the trace.
    Solve(SolveArgs),
    /// Run methods × seeds on one problem family and print summary tables.
    Bench(BenchArgs),
    /// Fit convergence rates to stored traces.
    Rates(RatesArgs),
    /// Run the property-diagnostic suite.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Lasso,
    Logistic,
    Qp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LipschitzArg {
    Conservative,
    Standard,
}

impl From<LipschitzArg> for LogisticLipschitz {
    fn from(l: LipschitzArg) -> Self {
        match l {
            LipschitzArg::Conservative => LogisticLipschitz::Conservative,
            LipschitzArg::Standard => LogisticLipschitz::Standard,
        }
    }
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// Synthetic problem family.
    #[arg(long, value_enum, conflicts_with_all = ["instance", "libsvm"])]
    problem: Option<Kind>,
    /// Instance file written by `gen`.
    #[arg(long, value_name = "PATH", conflicts_with = "libsvm")]
    instance: Option<PathBuf>,
    /// LIBSVM dataset for ℓ₁-regularized logistic regression.
    #[arg(long, value_name = "PATH")]
    libsvm: Option<PathBuf>,
    /// Rows (lasso) or dimension (qp).
    #[arg(long)]
    m: Option<usize>,
    /// Columns (lasso).
    #[arg(long)]
    n: Option<usize>,
    /// Planted sparsity (lasso).
    #[arg(long)]
    s: Option<usize>,
    /// Regularization weight (lasso, logistic, libsvm).
    #[arg(long)]
    delta: Option<f64>,
    /// Samples (logistic).
    #[arg(long)]
    samples: Option<usize>,
    /// Features (logistic).
    #[arg(long)]
    features: Option<usize>,
    /// Planted support size (logistic).
    #[arg(long)]
    support: Option<usize>,
    /// Label flip probability (logistic).
    #[arg(long)]
    flip: Option<f64>,
    /// Lipschitz constant convention for the logistic loss.
    #[arg(long, value_enum)]
    lipschitz: Option<LipschitzArg>,
}

impl ProblemArgs {
    fn given(&self) -> bool {
        self.problem.is_some() || self.instance.is_some() || self.libsvm.is_some()
    }

    fn spec(&self) -> Option<ProblemSpec> {
        if let Some(path) = &self.instance {
            return Some(ProblemSpec::File { path: path.clone() });
        }
        if let Some(path) = &self.libsvm {
            return Some(ProblemSpec::Libsvm {
                path: path.clone(),
                delta: self.delta.unwrap_or(1e-2),
                lipschitz: self.lipschitz.map(Into::into).unwrap_or_default(),
            });
        }
        Some(match self.problem? {
            Kind::Lasso => ProblemSpec::Lasso {
                m: self.m.unwrap_or(100),
                n: self.n.unwrap_or(256),
                s: self.s.unwrap_or(10),
                delta: self.delta.unwrap_or(1.0),
            },
            Kind::Qp => ProblemSpec::Qp { m: self.m.unwrap_or(200) },
            Kind::Logistic => {
                let d = LogisticGenParams::default();
                ProblemSpec::Logistic(LogisticGenParams {
                    samples: self.samples.unwrap_or(d.samples),
                    features: self.features.unwrap_or(d.features),
                    support: self.support.unwrap_or(d.support),
                    flip: self.flip.unwrap_or(d.flip),
                    delta: self.delta.unwrap_or(d.delta),
                    lipschitz: self.lipschitz.map(Into::into).unwrap_or(d.lipschitz),
                })
            }
        })
    }
}

#[derive(Args, Debug, Default)]
struct SolverArgs {
    /// Step fraction; λ = μ/L.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<u64>,
    /// Initial point: `zero`, `ones`, `const:V` or a comma-separated vector.
    #[arg(long, value_name = "X0")]
    x0: Option<String>,
    /// Momentum-zeroing test: none, gradient, function, both.
    #[arg(long, value_parser = parse_modification)]
    modification: Option<Modification>,
    /// Restart rule: none, fixed:K, adaptive, fixed_adaptive:K.
    #[arg(long)]
    restart: Option<Restart>,
    /// Termination measure: subgradient or residual.
    #[arg(long, value_parser = parse_termination)]
    termination: Option<Termination>,
    /// Check the per-step descent inequality.
    #[arg(long)]
    monitor: bool,
}

fn parse_modification(s: &str) -> Result<Modification, String> {
    match s {
        "none" => Ok(Modification::None),
        "gradient" => Ok(Modification::Gradient),
        "function" => Ok(Modification::Function),
        "both" => Ok(Modification::Both),
        _ => Err(format!("unknown modification `{s}` (none, gradient, function, both)")),
    }
}

fn parse_termination(s: &str) -> Result<Termination, String> {
    match s {
        "subgradient" => Ok(Termination::Subgradient),
        "residual" => Ok(Termination::Residual),
        _ => Err(format!("unknown termination `{s}` (subgradient, residual)")),
    }
}

impl SolverArgs {
    /// Applies the given flags on top of `opts`. `x0` needs the dimension.
    fn apply(&self, opts: &mut SolverOptions) {
        if let Some(v) = self.mu {
            opts.mu = v;
        }
        if let Some(v) = self.tol {
            opts.tol = v;
        }
        if let Some(v) = self.max_iter {
            opts.max_iter = v;
        }
        if let Some(v) = self.modification {
            opts.modification = v;
        }
        if let Some(v) = self.restart {
            opts.restart = v;
        }
        if let Some(v) = self.termination {
            opts.termination = Some(v);
        }
        if self.monitor {
            opts.monitors.descent = true;
        }
    }
}

fn parse_x0(text: &str, dim: usize) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidArgument(format!("bad --x0 `{text}` (zero, ones, const:V or v1,v2,…)"));
    let v = match text {
        "zero" => vec![0.0; dim],
        "ones" => vec![1.0; dim],
        _ => match text.strip_prefix("const:") {
            Some(c) => vec![c.parse::<f64>().map_err(|_| bad())?; dim],
            None => text
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?,
        },
    };
    if v.len() != dim {
        return Err(Error::InvalidArgument(format!("--x0 has {} entries, problem has {dim}", v.len())));
    }
    Ok(v)
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output instance file (JSON).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Momentum schedule, e.g. fista, fista_cd:4, pow:8:4, exp:0.5, logpoly:1, const:0.9, const:*, none.
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    /// Engine: ifb, adapm, restart or fb.
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Estimate f* with a tighter reference run and fill the gap column.
    #[arg(long)]
    reference: bool,
    /// Trace output path.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Trace format: csv or json-lines.
    #[arg(long)]
    format: Option<TraceFormat>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// TOML run configuration supplying the problem and solver options.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated methods: schedules (IFB), ALGO/SCHEDULE, fb, restart.
    #[arg(long, value_delimiter = ',', default_values_t = FIVE_METHODS.map(String::from))]
    methods: Vec<String>,
    /// Seeds as `A..B` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "1..10")]
    seeds: String,
    /// Worker threads (0 = all cores).
    #[arg(long, short, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Estimate f* per seed and fit this rate model to each run.
    #[arg(long, value_parser = parse_model)]
    fit: Option<RateModel>,
    /// Write the per-run summary as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write the aligned-text summary.
    #[arg(long, value_name = "PATH")]
    text: Option<PathBuf>,
    /// Write every trace (CSV) into this directory.
    #[arg(long, value_name = "DIR")]
    trace_dir: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<RateModel, String> {
    match s {
        "power" => Ok(RateModel::Power),
        "linear" => Ok(RateModel::Linear),
        _ => Err(format!("unknown rate model `{s}` (power, linear)")),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::InvalidArgument(format!("bad seed list `{s}` (A..B or a,b,c)"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// Trace files (.csv, .jsonl or .json).
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long, value_parser = parse_model, default_value = "power")]
    model: RateModel,
    /// Reference optimum; otherwise the stored gap column is used.
    #[arg(long)]
    fstar: Option<f64>,
    /// Error band of f*; gaps below ten times it are dropped.
    #[arg(long)]
    band: Option<f64>,
    /// Share of usable records, from the end, entering the fit.
    #[arg(long, default_value_t = 0.4)]
    tail: f64,
    /// Write the table as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, default_value_t = 1_000_000)]
    k_probe: u64,
    #[arg(long, default_value_t = 100_000)]
    k_scan: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Unsupported(_) => 2,
        Error::Parse { .. } => 3,
        Error::NumericFailure { .. } | Error::Range(_) | Error::InsufficientData { .. } => 4,
        Error::Io { .. } => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(dir) = &cli.data_dir {
        // Single-threaded at this point; the core reads the variable when resolving paths.
        std::env::set_var(DATA_DIR_ENV, dir);
    }
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Rates(a) => rates(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn gen(a: GenArgs) -> Result<u8, Error> {
    let spec = a
        .problem
        .spec()
        .ok_or_else(|| Error::InvalidArgument("gen needs --problem, --instance or --libsvm".into()))?;
    let data = spec.instance_data(a.seed)?;
    save_instance(&data, &a.out)?;
    println!("wrote {} instance to {}", data.kind_name(), a.out.display());
    Ok(0)
}

fn solve(a: SolveArgs) -> Result<u8, Error> {
    let mut cfg = match (&a.config, a.problem.spec()) {
        (Some(path), spec) => {
            let mut cfg = RunConfig::load(path)?;
            if let Some(spec) = spec {
                cfg.problem = spec;
            }
            cfg
        }
        (None, Some(spec)) => RunConfig::new(spec),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "solve needs --config, --problem, --instance or --libsvm".into(),
            ))
        }
    };
    if let Some(s) = a.schedule {
        cfg.schedule = s;
    }
    if let Some(al) = a.algo {
        cfg.algorithm = al;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    a.solver.apply(&mut cfg.solver);
    if let Some(out) = a.out {
        cfg.output.trace = Some(out);
    }
    if let Some(f) = a.format {
        cfg.output.format = f;
    }
    cfg.validate()?;

    let problem = cfg.problem.instance_data(cfg.seed)?.build()?;
    if let Some(x0) = &a.solver.x0 {
        cfg.solver.x0 = Some(parse_x0(x0, problem.dimension())?);
    }
    let mut trace = run(&problem, cfg.schedule, cfg.algorithm, &cfg.solver)?;
    if a.reference {
        let fs = estimate_fstar(&problem, &reference_options(&cfg.solver, 100.0))?;
        println!("f* = {:.16e} ± {:.3e}{}", fs.value, fs.error, if fs.converged { "" } else { " (reference not converged)" });
        trace.f_star = Some(fs.value);
    }
    let last = trace.final_record();
    let schedule = if cfg.algorithm == Algorithm::Fb { "none".to_string() } else { cfg.schedule.to_string() };
    println!(
        "{} {} status {} iterations {} objective {:.16e} residual {:.3e} modified {}",
        cfg.algorithm,
        schedule,
        trace.status,
        trace.iterations(),
        last.objective,
        last.residual,
        trace.modified_count()
    );
    if let Some(v) = trace.max_descent_violation {
        println!("descent monitor: max violation {v:.3e}, {} above slack", trace.descent_violations);
    }
    if let Some(path) = &cfg.output.trace {
        write_trace(&trace, path, cfg.output.format)?;
    }
    match trace.status {
        Status::NumericFailure => Err(Error::NumericFailure {
            message: "solver produced non-finite values".into(),
            best_estimate: Some(last.objective),
        }),
        Status::MaxIter => {
            log::warn!("stopped at the iteration cap before reaching tol");
            Ok(0)
        }
        Status::Converged => Ok(0),
    }
}

fn bench(a: BenchArgs) -> Result<u8, Error> {
    let (problem, mut solver) = match (&a.config, a.problem.spec()) {
        (Some(path), spec) => {
            let cfg = RunConfig::load(path)?;
            (spec.unwrap_or(cfg.problem), cfg.solver)
        }
        (None, Some(spec)) => (spec, SolverOptions::default()),
        (None, None) if !a.problem.given() => (
            ProblemSpec::Lasso {
                m: 100,
                n: 256,
                s: 10,
                delta: 1.0,
            },
            SolverOptions::default(),
        ),
        (None, None) => unreachable!("given implies a spec"),
    };
    a.solver.apply(&mut solver);
    if a.solver.x0.is_some() {
        return Err(Error::InvalidArgument("bench always starts from zero; drop --x0".into()));
    }
    let methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let mut spec = BenchSpec::new(problem, methods, parse_seeds(&a.seeds)?);
    spec.solver = solver;
    spec.jobs = a.jobs;
    spec.fit = a.fit;
    spec.keep_traces = a.trace_dir.is_some();
    let report = run_bench(&spec)?;

    let text = report.to_text();
    print!("{text}");
    if let Some(path) = &a.text {
        write_file(path, &text)?;
    }
    if let Some(path) = &a.csv {
        write_file(path, &report.to_csv_string())?;
    }
    if let Some(dir) = &a.trace_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        for c in &report.cells {
            let name: String = c
                .method
                .chars()
                .map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' { ch } else { '_' })
                .collect();
            let trace = c.trace.as_ref().expect("traces kept");
            write_trace(trace, dir.join(format!("{name}_seed{}.csv", c.seed)), TraceFormat::Csv)?;
        }
    }
    Ok(0)
}

fn trace_format_for(path: &Path) -> TraceFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => TraceFormat::JsonLines,
        _ => TraceFormat::Csv,
    }
}

fn rates(a: RatesArgs) -> Result<u8, Error> {
    let opts = FitOptions {
        tail_fraction: a.tail,
        ..FitOptions::default()
    };
    let model = match a.model {
        RateModel::Power => "power",
        RateModel::Linear => "linear",
    };
    let mut rows = vec![["trace", "model", "value", "r2", "window", "points"].map(String::from).to_vec()];
    let mut csv = String::from("trace,model,value,r_squared,k_start,k_end,points\n");
    for path in &a.traces {
        let records = read_trace(path, trace_format_for(path))?;
        let series: Vec<(u64, f64)> = match a.fstar {
            Some(f) => records.iter().map(|r| (r.k, r.objective - f)).collect(),
            None => records
                .iter()
                .map(|r| r.gap.map(|g| (r.k, g)))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::InvalidArgument(format!(
                    "{} has no gap column; pass --fstar or solve with --reference",
                    path.display()
                )))?,
        };
        let f_star = match (a.fstar, records.last()) {
            (Some(f), _) => f,
            (None, Some(r)) => r.objective - r.gap.unwrap_or(0.0),
            (None, None) => 0.0,
        };
        let band = a.band.unwrap_or(64.0 * f64::EPSILON * (1.0 + f_star.abs()));
        let fit = fit_rate_series(&series, band, a.model, &opts)?;
        rows.push(vec![
            path.display().to_string(),
            model.into(),
            format!("{:.6}", fit.value),
            format!("{:.4}", fit.r_squared),
            format!("{}..{}", fit.window.0, fit.window.1),
            fit.points.to_string(),
        ]);
        csv.push_str(&format!(
            "{},{model},{:.16e},{:.16e},{},{},{}\n",
            path.display(),
            fit.value,
            fit.r_squared,
            fit.window.0,
            fit.window.1,
            fit.points
        ));
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        println!("{}", line.join("  ").trim_end());
    }
    if let Some(path) = &a.csv {
        write_file(path, &csv)?;
    }
    Ok(0)
}

fn check(a: CheckArgs) -> Result<u8, Error> {
    let report = run_checks(&CheckOptions {
        k_probe: a.k_probe,
        k_scan: a.k_scan,
        samples: a.samples,
        seed: a.seed,
    })?;
    println!("{report}");
    Ok(if report.all_passed() { 0 } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_grammar() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn x0_grammar() {
        assert_eq!(parse_x0("ones", 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(parse_x0("const:-2", 3).unwrap(), vec![-2.0; 3]);
        assert_eq!(parse_x0("1, 2.5", 2).unwrap(), vec![1.0, 2.5]);
        assert!(parse_x0("1,2", 3).is_err());
    }

    #[test]
    fn exit_codes_distinct() {
        let codes = [
            exit_code(&Error::InvalidArgument(String::new())),
            exit_code(&Error::Parse { line: 1, message: String::new() }),
            exit_code(&Error::NumericFailure { message: String::new(), best_estimate: None }),
            exit_code(&Error::Io { path: PathBuf::new(), source: std::io::Error::other("x") }),
        ];
        assert_eq!(codes, [2, 3, 4, 5]);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
