//! Property-diagnostic suite: schedule limits, the Nesterov rule, α-dominance
//! scans, growth of the comparison sequences and sampled prox properties.
//! Each check yields one pass/fail line.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::problems::{gen_lasso_instance, gen_logistic_data, gen_qp_instance, LogisticGenParams, ProblemInstance};
use crate::prox::{forward_backward_map, project_box, soft_threshold};
use crate::schedules::{check_assumption_a2, ComparisonCase, ComparisonSeq, Schedule, ScheduleKind};
use crate::vecops::dist;

/// The six default constructions, one per case: `exp:0.5`, `pow:8:4`,
/// `pow:0.5:0.5`, `logpoly:1`, `fista`, `fista_cd:4`.
pub const DEFAULT_CASES: [&str; 6] = ["exp:0.5", "pow:8:4", "pow:0.5:0.5", "logpoly:1", "fista", "fista_cd:4"];

/// Free exponent of the comparison constructions.
pub const DEFAULT_P: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| !r.passed).count()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        write!(f, "{} checks, {} failed", self.results.len(), self.failures())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Largest index of the limit ladders.
    pub k_probe: u64,
    /// Range of the Nesterov and dominance scans.
    pub k_scan: u64,
    /// Random samples per prox property.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            k_probe: 1_000_000,
            k_scan: 100_000,
            samples: 1000,
            seed: 0,
        }
    }
}

fn schedule(s: &str) -> Schedule {
    Schedule::new(s.parse().expect("built-in schedule string")).expect("built-in schedule")
}

/// Runs every check.
pub fn run_checks(opts: &CheckOptions) -> Result<CheckReport> {
    let mut results = Vec::new();
    results.extend(schedule_limit_checks(opts)?);
    results.extend(nesterov_checks(opts)?);
    results.extend(dominance_checks(opts)?);
    results.extend(growth_checks()?);
    results.extend(prox_checks(opts)?);
    Ok(CheckReport { results })
}

/// `(σ, c)` of the limit `k^σ(t_{k+1}/t_k − 1) → c` for a t-based kind.
pub fn a2_exponents(kind: ScheduleKind) -> Option<(f64, f64)> {
    match kind {
        ScheduleKind::Exp { alpha } => Some((1.0 - alpha, alpha)),
        ScheduleKind::Power { r, .. } => Some((1.0, r)),
        ScheduleKind::LogPoly { .. } | ScheduleKind::FistaClassic | ScheduleKind::FistaCD { .. } => Some((1.0, 1.0)),
        _ => None,
    }
}

/// Initial values, A2 ratio limits, the FISTA recursion and the
/// asymptotic expansions of `γ_k`.
pub fn schedule_limit_checks(opts: &CheckOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for s in DEFAULT_CASES {
        let mut sch = schedule(s);
        let (t1, g1) = (sch.t_value(1)?, sch.gamma(1));
        out.push(CheckResult::new(
            format!("start {s}"),
            t1 == 1.0 && g1 == 0.0,
            format!("t_1 = {t1}, gamma_1 = {g1}"),
        ));
    }
    for s in DEFAULT_CASES {
        let sch = schedule(s);
        let (sigma, c) = a2_exponents(sch.kind()).expect("t-based");
        let est = check_assumption_a2(&sch, sigma, opts.k_probe)?;
        let rel = (est.limit - c).abs() / c;
        out.push(CheckResult::new(
            format!("a2 {s}"),
            est.converged && rel <= 0.01,
            format!(
                "sigma = {sigma}, limit {:.6} vs c = {c} (rel {rel:.2e}, {:?}, converged {})",
                est.limit, est.model, est.converged
            ),
        ));
    }

    let mut f = schedule("fista");
    let mut worst: f64 = 0.0;
    for k in 1..=10_000u64 {
        let (tk, tn) = (f.t_value(k)?, f.t_value(k + 1)?);
        worst = worst.max((tk * tk - tn * tn + tn).abs() / (tn * tn));
    }
    out.push(CheckResult::new(
        "fista recursion equality",
        worst <= 1e-12,
        format!("max |t_k² − t_{{k+1}}² + t_{{k+1}}|/t_{{k+1}}² = {worst:.2e} for k ≤ 10⁴"),
    ));
    let half = f.t_value(10_000)? / 10_000.0;
    out.push(CheckResult::new(
        "fista t_k/k",
        (half - 0.5).abs() <= 0.005,
        format!("t_k/k = {half:.6} at k = 10⁴"),
    ));
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let t2 = f.t_value(2)?;
    out.push(CheckResult::new("fista t_2", (t2 - golden).abs() <= 1e-15, format!("t_2 = {t2}")));
    let mut cd = schedule("fista_cd:4");
    let (t5, g5) = (cd.t_value(5)?, cd.gamma(5));
    out.push(CheckResult::new(
        "fista_cd:4 t_5 and gamma_5",
        t5 == 2.0 && (g5 - 4.0 / 9.0).abs() <= 1e-16,
        format!("t_5 = {t5}, gamma_5 = {g5}"),
    ));

    for s in DEFAULT_CASES {
        let g = schedule(s).gamma(1_000_000);
        out.push(CheckResult::new(format!("gamma_1e6 {s}"), g > 0.99, format!("gamma = {g:.8}")));
    }

    // γ_k = 1 − 3/k + O(ln k/k²): the scaled residual stays bounded.
    let ratios: Vec<f64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&k| {
            let kf = k as f64;
            (f.gamma(k) - (1.0 - 3.0 / kf)).abs() * kf * kf / kf.ln()
        })
        .collect();
    let bounded = ratios.iter().all(|r| *r <= 10.0);
    out.push(CheckResult::new(
        "fista gamma expansion",
        bounded,
        format!("|γ_k − 1 + 3/k|·k²/ln k = {:.3} / {:.3} / {:.3} at 10³/10⁴/10⁵", ratios[0], ratios[1], ratios[2]),
    ));

    let (r, a) = (0.5, 0.5);
    let k = 1_000_000u64;
    let lim = (k as f64).powf(r) * (1.0 - schedule("pow:0.5:0.5").gamma(k));
    out.push(CheckResult::new(
        "pow:0.5:0.5 gamma expansion",
        (lim - a).abs() <= 0.01 * a,
        format!("k^r(1 − γ_k) = {lim:.6} vs a = {a} at k = 10⁶"),
    ));
    Ok(out)
}

/// FISTA and FISTA_CD(4) satisfy the rule; Power(8,4) and Exp(0.5) violate it.
pub fn nesterov_checks(opts: &CheckOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for (s, holds) in [("fista", true), ("fista_cd:4", true), ("pow:8:4", false), ("exp:0.5", false)] {
        let found = schedule(s).check_nesterov_rule(opts.k_scan)?;
        let detail = match found {
            None => format!("holds for k ≤ {}", opts.k_scan),
            Some(k) => format!("first violation at k = {k}"),
        };
        out.push(CheckResult::new(
            format!("nesterov {s} ({})", if holds { "holds" } else { "violated" }),
            found.is_none() == holds,
            detail,
        ));
    }
    Ok(out)
}

/// `α_k ≥ γ_k` on `[K, k_scan]` for each default construction, and the
/// identity `α_k = γ_k` for FISTA_CD(1).
pub fn dominance_checks(opts: &CheckOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for s in DEFAULT_CASES {
        let sch = schedule(s);
        let seq = ComparisonSeq::for_schedule(sch.kind(), DEFAULT_P)?;
        let onset = seq.dominance_onset(&sch, opts.k_scan)?;
        out.push(CheckResult::new(
            format!("dominance {s}"),
            onset.is_some(),
            match onset {
                Some(k) => format!("α_k ≥ γ_k for k in [{k}, {}]", opts.k_scan),
                None => format!("α_k < γ_k at k = {}", opts.k_scan),
            },
        ));
    }
    let seq = ComparisonSeq::new(ComparisonCase::FistaCD { a: 1.0 })?;
    let mut sch = schedule("fista_cd:1");
    let mut worst: f64 = 0.0;
    for k in 1..=10_000u64 {
        worst = worst.max((seq.alpha(k)? - sch.gamma(k)).abs());
    }
    out.push(CheckResult::new(
        "fista_cd:1 identity",
        worst <= 1e-12,
        format!("max |α_k − γ_k| = {worst:.2e} for k ≤ 10⁴"),
    ));
    Ok(out)
}

/// `s_{10⁵} > s_{10³} > s_{10}` and `(s_{k+1}² − s_k²)/s_k² < 10⁻³` at `k = 10⁵`.
pub fn growth_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for s in DEFAULT_CASES {
        let seq = ComparisonSeq::for_schedule(s.parse()?, DEFAULT_P)?;
        let (l10, l3, l5) = (seq.ln_s(10)?, seq.ln_s(1_000)?, seq.ln_s(100_000)?);
        let ratio = seq.growth_ratio(100_000)?;
        out.push(CheckResult::new(
            format!("growth {s}"),
            l5 > l3 && l3 > l10 && ratio < 1e-3,
            format!("ln s at 10/10³/10⁵ = {l10:.4}/{l3:.4}/{l5:.4}, growth ratio at 10⁵ = {ratio:.3e}"),
        ));
    }
    Ok(out)
}

/// Worst excesses found by [`prox_property_suite`]; positive means violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSuiteOutcome {
    pub samples: usize,
    /// `max ‖P(u) − P(v)‖ − ‖u − v‖` over soft thresholding and box projection.
    pub nonexpansive_excess: f64,
    /// `max ‖T_{λ₂}x − x‖ − ‖T_{λ₁}x − x‖`, `λ₁ ≥ λ₂`.
    pub residual_growth_excess: f64,
    /// `max ‖T_{λ₁}x − x‖/λ₁ − ‖T_{λ₂}x − x‖/λ₂`.
    pub scaled_residual_excess: f64,
}

fn normals(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Small LASSO, logistic and box-QP instances for sampling.
pub fn sample_instances(seed: u64) -> Result<Vec<ProblemInstance>> {
    let params = LogisticGenParams {
        samples: 30,
        features: 12,
        support: 4,
        ..LogisticGenParams::default()
    };
    Ok(vec![
        gen_lasso_instance(12, 20, 4, seed)?.0,
        gen_logistic_data(&params, seed)?.build()?,
        gen_qp_instance(16, seed)?,
    ])
}

/// Samples non-expansiveness of the two prox maps and residual monotonicity
/// in `λ` of the forward-backward map, `samples` draws each.
pub fn prox_property_suite(samples: usize, seed: u64) -> Result<ProxSuiteOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut nonexp = f64::NEG_INFINITY;
    for i in 0..samples {
        let n = 1 + (i % 17);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let u = normals(&mut rng, n, scale);
        let v = normals(&mut rng, n, scale);
        let t = scale * rng.random::<f64>();
        let d = dist(&u, &v);
        nonexp = nonexp.max(dist(&soft_threshold(&u, t)?, &soft_threshold(&v, t)?) - d);
        let lo = normals(&mut rng, n, scale);
        let hi: Vec<f64> = lo.iter().map(|l| l + scale * rng.random::<f64>()).collect();
        nonexp = nonexp.max(dist(&project_box(&u, &lo, &hi)?, &project_box(&v, &lo, &hi)?) - d);
    }

    let problems = sample_instances(seed)?;
    let (mut grow, mut scaled) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..samples {
        let p = &problems[i % problems.len()];
        let x = normals(&mut rng, p.dimension(), 2.0);
        let step = 1.0 / p.lipschitz();
        let l1 = step * 10f64.powf(rng.random_range(-2.0..1.0));
        let l2 = l1 * rng.random::<f64>().max(1e-3);
        let r1 = forward_backward_map(p, &x, l1)?.residual_norm;
        let r2 = forward_backward_map(p, &x, l2)?.residual_norm;
        grow = grow.max(r2 - r1);
        scaled = scaled.max(r1 / l1 - r2 / l2);
    }
    Ok(ProxSuiteOutcome {
        samples,
        nonexpansive_excess: nonexp,
        residual_growth_excess: grow,
        scaled_residual_excess: scaled,
    })
}

pub fn prox_checks(opts: &CheckOptions) -> Result<Vec<CheckResult>> {
    let o = prox_property_suite(opts.samples, opts.seed)?;
    Ok(vec![
        CheckResult::new(
            "prox non-expansive",
            o.nonexpansive_excess <= 1e-12,
            format!("worst excess {:.2e} over {} pairs per map", o.nonexpansive_excess, o.samples),
        ),
        CheckResult::new(
            "residual monotone in lambda",
            o.residual_growth_excess <= 1e-10 && o.scaled_residual_excess <= 1e-10,
            format!(
                "worst excesses {:.2e} (‖T_λ x − x‖) and {:.2e} (‖T_λ x − x‖/λ) over {} samples",
                o.residual_growth_excess, o.scaled_residual_excess, o.samples
            ),
        ),
    ])
}
