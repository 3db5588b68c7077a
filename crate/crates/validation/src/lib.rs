//! Acceptance criteria for `ifb-core`, each evaluated to one PASS/FAIL line.
//!
//! Every solver run is passed to `tally`, which accumulates descent-inequality
//! violations for criterion 2; that criterion is therefore evaluated last.

use std::cell::Cell;
use std::fmt;
use std::time::{Duration, Instant};

use ifb_core::analysis::{estimate_fstar, fit_rate_series, reference_options, FitOptions, RateModel};
use ifb_core::bench::{run_bench, BenchReport, BenchSpec, Method, FIVE_METHODS};
use ifb_core::diagnostics::{a2_exponents, prox_property_suite, DEFAULT_CASES, DEFAULT_P};
use ifb_core::io::{
    parse_libsvm_reader, read_rows_from, trace_rows, write_libsvm_to, write_rows_to, LibsvmData, ProblemSpec,
    TraceFormat, DATA_DIR_ENV,
};
use ifb_core::problems::{CsrMatrix, LogisticGenParams};
use ifb_core::schedules::{check_assumption_a2, ComparisonCase, ComparisonSeq, Schedule, ScheduleKind};
use ifb_core::solver::{lyapunov_series, Algorithm, SolverOptions, Status, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

thread_local! {
    static RUNS: Cell<(usize, usize)> = const { Cell::new((0, 0)) };
}

fn tally(report: &BenchReport) {
    for c in &report.cells {
        RUNS.with(|r| {
            let (n, v) = r.get();
            r.set((n + 1, v + c.descent_violations));
        });
    }
}

fn tally_trace(t: &Trace) {
    RUNS.with(|r| {
        let (n, v) = r.get();
        r.set((n + 1, v + t.descent_violations));
    });
}

fn monitored(tol: f64) -> SolverOptions {
    SolverOptions {
        tol,
        ..SolverOptions::default()
    }
    .with_monitors()
}

fn desk() -> ProblemSpec {
    ProblemSpec::Lasso {
        m: 100,
        n: 256,
        s: 10,
        delta: 1.0,
    }
}

fn methods(list: &[&str]) -> Vec<Method> {
    list.iter().map(|s| s.parse().expect("method string")).collect()
}

fn bench(problem: ProblemSpec, list: &[&str], seeds: std::ops::RangeInclusive<u64>, solver: SolverOptions) -> BenchReport {
    let mut spec = BenchSpec::new(problem, methods(list), seeds.collect());
    spec.solver = solver;
    let report = run_bench(&spec).expect("bench run");
    tally(&report);
    report
}

/// Seeds (by index) whose per-method iteration counts satisfy `pred`.
fn seeds_where(report: &BenchReport, pred: impl Fn(&[u64]) -> bool) -> usize {
    (0..report.seeds.len())
        .filter(|&i| {
            let its: Vec<u64> = (0..report.methods.len()).map(|j| report.cell(i, j).iterations).collect();
            pred(&its)
        })
        .count()
}

fn all_converged(report: &BenchReport) -> bool {
    report.cells.iter().all(|c| c.status == Status::Converged)
}

fn nonincreasing(v: &[u64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn c1_prox_suite() -> Outcome {
    let start = Instant::now();
    let o = prox_property_suite(1000, 2024).expect("prox suite");
    let elapsed = start.elapsed();
    let slack = 1e-10;
    let passed = o.nonexpansive_excess <= slack
        && o.residual_growth_excess <= slack
        && o.scaled_residual_excess <= slack
        && elapsed < Duration::from_secs(5);
    Outcome {
        id: 1,
        name: "prox property suite",
        passed,
        detail: format!(
            "{} samples; worst excess non-expansive {:.2e}, residual growth {:.2e}, scaled residual {:.2e}; {:.2?}",
            o.samples, o.nonexpansive_excess, o.residual_growth_excess, o.scaled_residual_excess, elapsed
        ),
    }
}

fn c3_schedule_limits() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for s in DEFAULT_CASES {
        let sch = Schedule::new(s.parse().unwrap()).unwrap();
        let (sigma, c) = a2_exponents(sch.kind()).unwrap();
        let est = check_assumption_a2(&sch, sigma, 1_000_000).unwrap();
        let rel = (est.limit - c).abs() / c;
        worst = worst.max(rel);
        notes.push(format!("{s} {:.5}", est.limit));
    }
    let mut fista = Schedule::new(ScheduleKind::FistaClassic).unwrap();
    let mut recursion: f64 = 0.0;
    for k in 1..=10_000u64 {
        let (a, b) = (fista.t_value(k).unwrap(), fista.t_value(k + 1).unwrap());
        recursion = recursion.max((a * a - (b * b - b)).abs() / (b * b));
    }
    let half = fista.t_value(10_000).unwrap() / 10_000.0;
    let half_rel = (half - 0.5).abs() / 0.5;
    Outcome {
        id: 3,
        name: "schedule limits",
        passed: worst <= 0.01 && recursion <= 1e-12 && half_rel <= 0.01,
        detail: format!(
            "A2 worst rel err {worst:.2e} [{}]; FISTA recursion rel err {recursion:.1e}; t_k/k at 10⁴ = {half:.5}",
            notes.join(", ")
        ),
    }
}

fn c4_dominance() -> Outcome {
    let k_max = 100_000u64;
    let mut ok = true;
    let mut notes = Vec::new();
    for s in DEFAULT_CASES {
        let mut sch = Schedule::new(s.parse().unwrap()).unwrap();
        let seq = ComparisonSeq::for_schedule(sch.kind(), DEFAULT_P).unwrap();
        match seq.dominance_onset(&sch, k_max).unwrap() {
            Some(onset) => {
                // Re-check the whole range directly.
                let holds = (onset..=k_max).all(|k| seq.alpha(k).unwrap() >= sch.gamma(k));
                ok &= holds;
                notes.push(format!("{s} K={onset}"));
            }
            None => {
                ok = false;
                notes.push(format!("{s} none"));
            }
        }
    }
    let seq = ComparisonSeq::new(ComparisonCase::FistaCD { a: 1.0 }).unwrap();
    let mut sch = Schedule::new(ScheduleKind::FistaCD { a: 1.0 }).unwrap();
    let worst = (1..=k_max)
        .map(|k| (seq.alpha(k).unwrap() - sch.gamma(k)).abs())
        .fold(0.0f64, f64::max);
    Outcome {
        id: 4,
        name: "alpha-dominance scans",
        passed: ok && worst <= 1e-12,
        detail: format!("{}; FISTA_CD(1) max |α−γ| = {worst:.1e}", notes.join(", ")),
    }
}

fn c5_power_r() -> Outcome {
    let start = Instant::now();
    let r = bench(desk(), &["pow:2:4", "pow:4:4", "pow:6:4", "pow:8:4"], 1..=10, monitored(1e-6));
    let elapsed = start.elapsed();
    let good = seeds_where(&r, nonincreasing);
    Outcome {
        id: 5,
        name: "power schedules, iterations nonincreasing in r",
        passed: good >= 8 && all_converged(&r) && elapsed < Duration::from_secs(120),
        detail: format!("{good}/10 seeds; medians {:?}; {elapsed:.1?}", medians(&r)),
    }
}

fn c6_fista_cd_a() -> Outcome {
    let r = bench(desk(), &["fista_cd:4", "fista_cd:6", "fista_cd:8", "fista_cd:10"], 1..=10, monitored(1e-6));
    let good = seeds_where(&r, nonincreasing);
    Outcome {
        id: 6,
        name: "FISTA_CD, iterations nonincreasing in a",
        passed: good >= 8 && all_converged(&r),
        detail: format!("{good}/10 seeds; medians {:?}", medians(&r)),
    }
}

fn medians(r: &BenchReport) -> Vec<u64> {
    (0..r.methods.len())
        .map(|j| {
            let mut v = r.iterations_of(j);
            v.sort_unstable();
            v[v.len() / 2]
        })
        .collect()
}

/// Criteria 7 and 11 share the five-method desk runs.
fn c7_c11_five_methods() -> (Outcome, Outcome) {
    let mut spec = BenchSpec::new(desk(), methods(&FIVE_METHODS), (1..=10).collect());
    spec.solver = monitored(1e-6);
    spec.fit = Some(RateModel::Power);
    let r = run_bench(&spec).expect("bench run");
    tally(&r);
    let col = |name: &str| r.methods.iter().position(|m| m == name).unwrap();
    let (fista, cd4, p84, p55, exp) = (col("fista"), col("fista_cd:4"), col("pow:8:4"), col("pow:0.5:0.5"), col("exp:0.5"));

    let ordered = seeds_where(&r, |it| it[exp] < it[p84] && it[p55] < it[p84] && it[p84] < it[cd4] && it[cd4] < it[fista]);
    let close = seeds_where(&r, |it| {
        let (a, b) = (it[exp] as f64, it[p55] as f64);
        (a - b).abs() <= 0.15 * 0.5 * (a + b)
    });
    let c7 = Outcome {
        id: 7,
        name: "five-method ordering",
        passed: ordered >= 8 && close >= 8 && all_converged(&r),
        detail: format!(
            "ordering {ordered}/10, exp≈pow(0.5) within 15% {close}/10; medians {:?} for {:?}",
            medians(&r),
            r.methods
        ),
    };

    let series: Vec<(u64, f64)> = (1..=2000u64).map(|k| (k, 1.0 / (k * k) as f64)).collect();
    let o = FitOptions::default();
    let p = fit_rate_series(&series, 0.0, RateModel::Power, &o).unwrap().value;
    let lin: Vec<(u64, f64)> = (1..=300u64).map(|k| (k, 0.9f64.powi(k as i32))).collect();
    let rho = fit_rate_series(&lin, 0.0, RateModel::Linear, &o).unwrap().value;
    let synth_ok = (p - 2.0).abs() <= 0.025 * 2.0 && (rho - 0.9).abs() <= 0.005 * 0.9;
    let rate = |i: usize, j: usize| r.cell(i, j).rate.map(|f| f.value);
    let faster = (0..r.seeds.len())
        .filter(|&i| matches!((rate(i, p84), rate(i, fista)), (Some(a), Some(b)) if a > b))
        .count();
    let c11 = Outcome {
        id: 11,
        name: "rate fits",
        passed: synth_ok && faster >= 8,
        detail: format!("synthetic p̂ = {p:.4}, ρ̂ = {rho:.5}; p̂(pow:8:4) > p̂(fista) in {faster}/10 seeds"),
    };
    (c7, c11)
}

/// LIBSVM counts from the published table, where the files are available.
const TABLE: [(&str, [u64; 5]); 3] = [
    ("w4a", [1147, 760, 544, 510, 548]),
    ("a9a", [2049, 1289, 757, 623, 714]),
    ("sonar", [8405, 3406, 1586, 922, 980]),
];

fn c8_logistic() -> Outcome {
    let order = |it: &[u64]| {
        // columns follow FIVE_METHODS: fista, fista_cd:4, pow:8:4, pow:0.5:0.5, exp:0.5
        it[2].max(it[3]).max(it[4]) < it[1] && it[1] < it[0]
    };
    let mut notes = Vec::new();
    let mut passed = true;
    let mut datasets = 0;
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        for (name, counts) in TABLE {
            let path = std::path::Path::new(&dir).join(name);
            if !path.exists() {
                continue;
            }
            datasets += 1;
            let problem = ProblemSpec::Libsvm {
                path,
                delta: 1e-2,
                lipschitz: Default::default(),
            };
            let r = bench(problem, &FIVE_METHODS, 1..=1, monitored(1e-8));
            let it: Vec<u64> = (0..5).map(|j| r.cell(0, j).iterations).collect();
            passed &= order(&it);
            let within = it.iter().zip(counts).filter(|(a, b)| (**a as f64 - *b as f64).abs() <= 0.25 * *b as f64).count();
            notes.push(format!("{name} {it:?}, {within}/5 within 25% of the published counts"));
        }
    }
    if datasets == 0 {
        let r = bench(ProblemSpec::Logistic(LogisticGenParams::default()), &FIVE_METHODS, 1..=5, monitored(1e-8));
        let good = seeds_where(&r, order);
        passed = good == 5 && all_converged(&r);
        notes.push(format!("synthetic logistic, ordering on {good}/5 seeds; medians {:?}", medians(&r)));
    }
    Outcome {
        id: 8,
        name: "logistic ordering",
        passed,
        detail: notes.join("; "),
    }
}

fn c9_adapm_qp() -> Outcome {
    let r = bench(ProblemSpec::Qp { m: 200 }, &["exp:0.5", "adapm/exp:0.5"], 1..=10, monitored(1e-8));
    let good = seeds_where(&r, |it| it[1] <= it[0]);
    Outcome {
        id: 9,
        name: "gradient modification on QP",
        passed: good >= 7 && all_converged(&r),
        detail: format!("adapm ≤ ifb in {good}/10 seeds; medians {:?}", medians(&r)),
    }
}

fn c10_lyapunov() -> Outcome {
    let problem = ProblemSpec::Lasso {
        m: 100,
        n: 256,
        s: 10,
        delta: 1.0,
    }
    .instance_data(1)
    .unwrap()
    .build()
    .unwrap();
    let opts = monitored(1e-8);
    let trace = ifb_core::solver::run(&problem, ScheduleKind::FistaCD { a: 4.0 }, Algorithm::Ifb, &opts).unwrap();
    tally_trace(&trace);
    let fs = estimate_fstar(&problem, &reference_options(&opts, 100.0)).unwrap();
    let seq = ComparisonSeq::new(ComparisonCase::FistaCD { a: 4.0 }).unwrap();
    let report = lyapunov_series(&trace, &seq, fs.value, fs.error, trace.lambda).unwrap();
    let Some(onset) = report.onset else {
        return Outcome {
            id: 10,
            name: "Lyapunov energy",
            passed: false,
            detail: "no onset".into(),
        };
    };
    // Direct recomputation with s_k = (k + 3)⁵.
    let s = |k: u64| ((k + 3) as f64).powi(5);
    let energy: Vec<(u64, f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.k >= onset)
        .map(|r| {
            let e = s(r.k + 1).powi(2) * (r.objective - fs.value) + s(r.k).powi(2) * r.step_len.powi(2) / (2.0 * trace.lambda);
            (r.k, e, s(r.k + 1).powi(2) * fs.error)
        })
        .collect();
    let rises = energy.windows(2).filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-12) + w[1].2).count();
    Outcome {
        id: 10,
        name: "Lyapunov energy",
        passed: trace.status == Status::Converged && rises == 0 && energy.len() > 1,
        detail: format!(
            "onset k = {onset} of {}; {rises} rises beyond the f* band after it; f* error {:.1e}",
            trace.iterations(),
            fs.error
        ),
    }
}

fn c12_growth() -> Outcome {
    let mut failing = Vec::new();
    let mut notes = Vec::new();
    for s in DEFAULT_CASES {
        let seq = ComparisonSeq::for_schedule(s.parse().unwrap(), DEFAULT_P).unwrap();
        let (a, b, c) = (seq.ln_s(10).unwrap(), seq.ln_s(1_000).unwrap(), seq.ln_s(100_000).unwrap());
        let ratio = seq.growth_ratio(100_000).unwrap();
        if !(c > b && b > a && ratio < 1e-3) {
            failing.push(s);
        }
        notes.push(format!("{s} {ratio:.2e}"));
    }
    Outcome {
        id: 12,
        name: "comparison sequence growth",
        passed: failing.is_empty(),
        detail: format!("growth ratio at 10⁵: {}; failing {:?}", notes.join(", "), failing),
    }
}

fn c13_determinism_io() -> Outcome {
    let mut spec = BenchSpec::new(desk(), methods(&FIVE_METHODS), vec![3, 4]);
    spec.solver = monitored(1e-6);
    spec.keep_traces = true;
    let a = run_bench(&spec).unwrap();
    let b = run_bench(&spec).unwrap();
    tally(&a);
    tally(&b);
    let same_tables = a.to_text() == b.to_text() && a.to_csv_string() == b.to_csv_string();
    let same_traces = a
        .cells
        .iter()
        .zip(&b.cells)
        .all(|(x, y)| x.trace.as_ref().unwrap().same_iterates(y.trace.as_ref().unwrap()));

    let mut csv_exact = true;
    for cell in &a.cells {
        let rows = trace_rows(cell.trace.as_ref().unwrap());
        let mut buf = Vec::new();
        write_rows_to(&mut buf, &rows, TraceFormat::Csv).unwrap();
        let back = read_rows_from(buf.as_slice(), TraceFormat::Csv).unwrap();
        csv_exact &= back.len() == rows.len() && back.iter().zip(&rows).all(|(x, y)| x.bits_eq(y));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (rows, cols) = (200, 50);
    let sparse: Vec<Vec<(usize, f64)>> = (0..rows)
        .map(|_| {
            let mut row = Vec::new();
            for c in 0..cols {
                if rng.random::<f64>() < 0.2 {
                    row.push((c, rng.random::<f64>() * 10f64.powi(rng.random_range(-20..20))));
                }
            }
            row
        })
        .collect();
    let labels: Vec<f64> = (0..rows).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let data = LibsvmData {
        features: CsrMatrix::from_rows(cols, &sparse).unwrap(),
        labels,
    };
    let mut buf = Vec::new();
    write_libsvm_to(&mut buf, &data).unwrap();
    let back = parse_libsvm_reader(buf.as_slice(), Some(cols)).unwrap();
    let libsvm_exact = back.labels == data.labels
        && (0..rows).all(|i| {
            let (ci, vi) = data.features.row(i);
            let (cj, vj) = back.features.row(i);
            ci == cj && vi.iter().zip(vj).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    Outcome {
        id: 13,
        name: "determinism and round trips",
        passed: same_tables && same_traces && csv_exact && libsvm_exact,
        detail: format!(
            "tables identical {same_tables}, traces identical {same_traces}, trace CSV exact {csv_exact}, LIBSVM exact {libsvm_exact}"
        ),
    }
}

fn c2_descent() -> Outcome {
    let (runs, violations) = RUNS.with(|r| r.get());
    Outcome {
        id: 2,
        name: "descent-inequality monitor",
        passed: runs > 0 && violations == 0,
        detail: format!("{violations} violations beyond 1e-8 relative slack over {runs} monitored runs"),
    }
}

/// Evaluates criteria 1 to 13, sorted by number.
pub fn run_all() -> Vec<Outcome> {
    RUNS.with(|r| r.set((0, 0)));
    let mut out = vec![c1_prox_suite(), c3_schedule_limits(), c4_dominance(), c5_power_r(), c6_fista_cd_a()];
    let (c7, c11) = c7_c11_five_methods();
    out.extend([c7, c8_logistic(), c9_adapm_qp(), c10_lyapunov(), c11, c12_growth(), c13_determinism_io()]);
    out.push(c2_descent());
    out.sort_by_key(|o| o.id);
    out
}
