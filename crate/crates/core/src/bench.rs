//! Cross-product benchmarks of methods × seeds on one problem family.
//!
//! Every cell is an independent deterministic run. Cells execute on a rayon
//! pool of `jobs` threads and are collected in input order, so reports do not
//! depend on scheduling. Wall time is never part of a report.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{estimate_fstar, fit_rate, reference_options, FStar, FitOptions, RateFit, RateModel};
use crate::error::{Error, Result};
use crate::io::ProblemSpec;
use crate::problems::ProblemInstance;
use crate::schedules::ScheduleKind;
use crate::solver::{run, Algorithm, SolverOptions, Status, Trace};

/// The five-method comparison: FISTA, FISTA_CD(4), Power(8,4), Power(0.5,0.5), Exp(0.5).
pub const FIVE_METHODS: [&str; 5] = ["fista", "fista_cd:4", "pow:8:4", "pow:0.5:0.5", "exp:0.5"];

/// An (algorithm, schedule) pair. String forms: a bare schedule (`pow:8:4`)
/// runs IFB; `ALGO/SCHEDULE` selects the engine; `fb` and `restart` stand
/// alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method {
    pub algorithm: Algorithm,
    pub schedule: ScheduleKind,
}

impl Method {
    pub fn ifb(schedule: ScheduleKind) -> Self {
        Method {
            algorithm: Algorithm::Ifb,
            schedule,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.algorithm, self.schedule) {
            (Algorithm::Ifb, s) => write!(f, "{s}"),
            (Algorithm::Fb, _) => f.write_str("fb"),
            (Algorithm::Restart, ScheduleKind::FistaClassic) => f.write_str("restart"),
            (a, s) => write!(f, "{a}/{s}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fb" => Ok(Method {
                algorithm: Algorithm::Fb,
                schedule: ScheduleKind::NoInertia,
            }),
            "restart" => Ok(Method {
                algorithm: Algorithm::Restart,
                schedule: ScheduleKind::FistaClassic,
            }),
            _ => match s.split_once('/') {
                Some((a, sch)) => Ok(Method {
                    algorithm: a.parse()?,
                    schedule: sch.parse()?,
                }),
                None => Ok(Method::ifb(s.parse()?)),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub solver: SolverOptions,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Estimate f* per seed and fit this rate model to every cell.
    pub fit: Option<RateModel>,
    /// Keep the full traces in the report.
    pub keep_traces: bool,
}

impl BenchSpec {
    pub fn new(problem: ProblemSpec, methods: Vec<Method>, seeds: Vec<u64>) -> Self {
        BenchSpec {
            problem,
            methods,
            seeds,
            solver: SolverOptions::default(),
            jobs: 0,
            fit: None,
            keep_traces: false,
        }
    }
}

/// Outcome of one (method, seed) cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub method: String,
    pub seed: u64,
    pub iterations: u64,
    pub status: Status,
    pub final_objective: f64,
    pub final_residual: f64,
    pub modified: usize,
    pub descent_violations: usize,
    /// Fitted rate, when requested and the trace had enough resolvable points.
    pub rate: Option<RateFit>,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    /// Seed-major: `cells[i·methods + j]` is seed `i`, method `j`.
    pub cells: Vec<BenchCell>,
    /// Reference optima per seed, when fitting.
    pub f_star: Vec<Option<FStar>>,
}

impl BenchReport {
    pub fn cell(&self, seed_idx: usize, method_idx: usize) -> &BenchCell {
        &self.cells[seed_idx * self.methods.len() + method_idx]
    }

    /// Iteration counts of one method across seeds.
    pub fn iterations_of(&self, method_idx: usize) -> Vec<u64> {
        (0..self.seeds.len()).map(|i| self.cell(i, method_idx).iterations).collect()
    }

    /// Iteration table (seeds × methods) followed by a per-method summary.
    pub fn to_text(&self) -> String {
        let mut header = vec!["seed".to_string()];
        header.extend(self.methods.iter().cloned());
        let mut rows = vec![header];
        for (i, seed) in self.seeds.iter().enumerate() {
            let mut row = vec![seed.to_string()];
            for j in 0..self.methods.len() {
                let c = self.cell(i, j);
                let flag = match c.status {
                    Status::Converged => "",
                    Status::MaxIter => "*",
                    Status::NumericFailure => "!",
                };
                row.push(format!("{}{flag}", c.iterations));
            }
            rows.push(row);
        }
        let mut median = vec!["median".to_string()];
        for j in 0..self.methods.len() {
            median.push(format!("{}", median_u64(&self.iterations_of(j))));
        }
        rows.push(median);
        let mut out = String::from("iterations (* = iteration cap, ! = numeric failure)\n");
        out.push_str(&align(&rows));

        let mut detail = vec![vec![
            "method".to_string(),
            "converged".into(),
            "max_residual".into(),
            "modified".into(),
            "descent_viol".into(),
            "rate".into(),
        ]];
        for (j, m) in self.methods.iter().enumerate() {
            let cells: Vec<&BenchCell> = (0..self.seeds.len()).map(|i| self.cell(i, j)).collect();
            let conv = cells.iter().filter(|c| c.status == Status::Converged).count();
            let max_res = cells.iter().map(|c| c.final_residual).fold(0.0f64, f64::max);
            let modified: usize = cells.iter().map(|c| c.modified).sum();
            let viol: usize = cells.iter().map(|c| c.descent_violations).sum();
            let rates: Vec<f64> = cells.iter().filter_map(|c| c.rate.map(|r| r.value)).collect();
            let rate = if rates.is_empty() {
                "-".to_string()
            } else {
                format!("{:.4}", median_f64(&rates))
            };
            detail.push(vec![
                m.clone(),
                format!("{conv}/{}", cells.len()),
                format!("{max_res:.3e}"),
                modified.to_string(),
                viol.to_string(),
                rate,
            ]);
        }
        out.push('\n');
        out.push_str(&align(&detail));
        out
    }

    /// One row per cell.
    pub fn write_csv(&self, w: impl Write) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "method",
            "seed",
            "iterations",
            "status",
            "final_objective",
            "final_residual",
            "modified",
            "descent_violations",
            "rate_model",
            "rate",
            "rate_r2",
        ])?;
        for c in &self.cells {
            let (model, value, r2) = match c.rate {
                Some(r) => (
                    format!("{:?}", r.model).to_lowercase(),
                    format!("{:.16e}", r.value),
                    format!("{:.16e}", r.r_squared),
                ),
                None => Default::default(),
            };
            out.write_record([
                c.method.clone(),
                c.seed.to_string(),
                c.iterations.to_string(),
                c.status.to_string(),
                format!("{:.16e}", c.final_objective),
                format!("{:.16e}", c.final_residual),
                c.modified.to_string(),
                c.descent_violations.to_string(),
                model,
                value,
                r2,
            ])?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, s)| format!("{s:<w$}", w = widths[j]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn median_u64(v: &[u64]) -> f64 {
    median_f64(&v.iter().map(|&x| x as f64).collect::<Vec<_>>())
}

fn median_f64(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Runs every (seed, method) cell.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.methods.is_empty() || spec.seeds.is_empty() {
        return Err(Error::invalid("bench needs at least one method and one seed"));
    }
    spec.solver.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| run_cells(spec))
}

fn run_cells(spec: &BenchSpec) -> Result<BenchReport> {
    let instances: Vec<(ProblemInstance, Option<FStar>)> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let problem = spec.problem.instance_data(seed)?.build()?;
            let f_star = match spec.fit {
                Some(_) => Some(estimate_fstar(&problem, &reference_options(&spec.solver, 100.0))?),
                None => None,
            };
            Ok((problem, f_star))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..spec.seeds.len())
        .flat_map(|i| (0..spec.methods.len()).map(move |j| (i, j)))
        .collect();
    let cells: Vec<BenchCell> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (problem, f_star) = &instances[i];
            let method = spec.methods[j];
            let mut trace = run(problem, method.schedule, method.algorithm, &spec.solver)?;
            trace.f_star = f_star.map(|f| f.value);
            let rate = match (spec.fit, f_star) {
                (Some(model), Some(fs)) => fit_rate(&trace, fs, model, &FitOptions::default()).ok(),
                _ => None,
            };
            let last = *trace.final_record();
            Ok(BenchCell {
                method: method.to_string(),
                seed: spec.seeds[i],
                iterations: trace.iterations(),
                status: trace.status,
                final_objective: last.objective,
                final_residual: last.residual,
                modified: trace.modified_count(),
                descent_violations: trace.descent_violations,
                rate,
                trace: spec.keep_traces.then_some(trace),
            })
        })
        .collect::<Result<_>>()?;

    Ok(BenchReport {
        methods: spec.methods.iter().map(Method::to_string).collect(),
        seeds: spec.seeds.clone(),
        cells,
        f_star: instances.into_iter().map(|(_, f)| f).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings_round_trip() {
        for s in ["fista", "pow:8:4", "fb", "restart", "adapm/exp:0.5", "restart/fista_cd:4"] {
            let m: Method = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("warp/fista".parse::<Method>().is_err());
        assert!("adapm/".parse::<Method>().is_err());
    }

    fn small() -> BenchSpec {
        let methods = ["fista", "exp:0.5", "adapm/exp:0.5", "fb"].map(|s| s.parse().unwrap()).to_vec();
        let mut spec = BenchSpec::new(ProblemSpec::Qp { m: 12 }, methods, vec![1, 2, 3]);
        spec.solver.tol = 1e-8;
        spec
    }

    #[test]
    fn tables_independent_of_job_count() {
        let mut a = small();
        a.jobs = 1;
        let mut b = small();
        b.jobs = 4;
        let (ra, rb) = (run_bench(&a).unwrap(), run_bench(&b).unwrap());
        assert_eq!(ra.to_text(), rb.to_text());
        assert_eq!(ra.to_csv_string(), rb.to_csv_string());
        assert_eq!(ra.cells.len(), 12);
        assert_eq!(ra.cell(1, 2).seed, 2);
        assert_eq!(ra.cell(1, 2).method, "adapm/exp:0.5");
    }

    #[test]
    fn text_table_shape() {
        let text = run_bench(&small()).unwrap().to_text();
        let first = text.lines().nth(1).unwrap();
        assert!(first.starts_with("seed"));
        assert!(first.contains("adapm/exp:0.5"));
        assert!(text.lines().any(|l| l.starts_with("median")));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median_u64(&[3, 1, 2]), 2.0);
        assert_eq!(median_u64(&[4, 1, 2, 3]), 2.5);
    }
}
