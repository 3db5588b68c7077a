//! Reference optima, empirical rate fits and error-bound probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::prox::forward_backward_map;
use crate::schedules::{Schedule, ScheduleKind};
use crate::solver::{run_ifb, SolverOptions, Status, Trace};
use crate::vecops::dist;

/// Fewest points a rate fit accepts.
pub const MIN_FIT_POINTS: usize = 30;

/// Reference optimum and a bound on `|F* − value|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FStar {
    pub value: f64,
    pub error: f64,
    /// False when the reference run hit its cap; `error` is then widened.
    pub converged: bool,
    /// `τ̂` used in the bound.
    pub tau: f64,
}

/// Floor on any f* error: the rounding noise of one objective evaluation.
fn noise_floor(f: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + f.abs())
}

/// Safety factor applied to the largest tail ratio.
const TAU_SAFETY: f64 = 4.0;

/// Runs IFB with `pow:0.5:0.5` at `opts` (which should carry a tolerance well
/// below that of the run under analysis) and returns the smallest objective.
///
/// The error bound follows `F(x_k) − F* ≤ (τ/λ)‖y_k − x_k‖²` with `τ` the
/// largest ratio `(F(x_k) − F_min)·λ/‖y_k − x_k‖²` seen in the last 40% of the
/// run, times a safety factor; it never drops below evaluation noise.
pub fn estimate_fstar(problem: &ProblemInstance, opts: &SolverOptions) -> Result<FStar> {
    let schedule = Schedule::new(ScheduleKind::Power { r: 0.5, a: 0.5 })?;
    let trace = run_ifb(problem, &schedule, opts)?;
    if trace.status == Status::NumericFailure {
        return Err(Error::numeric("reference run failed"));
    }
    let (best_idx, best) = trace
        .records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .expect("traces hold the initial point");
    let f_min = best.objective;
    let floor = noise_floor(f_min);
    let lambda = trace.lambda;

    let start = trace.records.len() * 6 / 10;
    let tau = trace.records[start..]
        .iter()
        .filter(|r| r.k >= 1 && r.y_gap > 0.0 && r.objective - f_min > 100.0 * floor)
        .map(|r| (r.objective - f_min) * lambda / (r.y_gap * r.y_gap))
        .fold(0.0f64, f64::max);
    let tau = if tau > 0.0 { TAU_SAFETY * tau } else { 1.0 };
    let mut error = tau / lambda * best.y_gap * best.y_gap + floor;
    if best_idx == 0 {
        // Never improved on x0: no step information.
        error = error.max(trace.final_record().residual.powi(2) / problem.lipschitz());
    }
    let converged = trace.status == Status::Converged;
    if !converged {
        let last = trace.final_record().objective;
        error = 100.0 * error + (last - f_min);
        log::warn!("reference run stopped at its iteration cap; f* bound widened to {error:e}");
    }
    Ok(FStar {
        value: f_min,
        error,
        converged,
        tau,
    })
}

/// Options for a reference solve `factor` times tighter than `run`.
pub fn reference_options(run: &SolverOptions, factor: f64) -> SolverOptions {
    SolverOptions {
        tol: run.tol / factor,
        max_iter: run.max_iter.saturating_mul(10),
        modification: Default::default(),
        restart: Default::default(),
        ..run.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    /// `gap ≈ C/k^p`
    Power,
    /// `gap ≈ C·ρ^k`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Share of usable records, counted from the end, entering the fit.
    pub tail_fraction: f64,
    /// Gaps below this multiple of the f* error are dropped.
    pub exclusion_multiplier: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tail_fraction: 0.4,
            exclusion_multiplier: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    /// `p̂` for the power model, `ρ̂` for the linear one.
    pub value: f64,
    pub r_squared: f64,
    pub window: (u64, u64),
    pub points: usize,
}

/// Fits the decay of `F(x_k) − f*` over the tail of a trace.
pub fn fit_rate(trace: &Trace, f_star: &FStar, model: RateModel, opts: &FitOptions) -> Result<RateFit> {
    let series: Vec<(u64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.k >= 1)
        .map(|r| (r.k, r.objective - f_star.value))
        .collect();
    fit_rate_series(&series, f_star.error, model, opts)
}

/// Least-squares slope of `ln gap` against `ln k` (power) or `k` (linear) over
/// the last `tail_fraction` of the points whose gap exceeds
/// `exclusion_multiplier·band`.
pub fn fit_rate_series(series: &[(u64, f64)], band: f64, model: RateModel, opts: &FitOptions) -> Result<RateFit> {
    if !(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0) {
        return Err(Error::invalid("tail fraction must lie in (0,1]"));
    }
    let cut = opts.exclusion_multiplier * band;
    let usable: Vec<(u64, f64)> = series
        .iter()
        .copied()
        .filter(|&(k, g)| k >= 1 && g > 0.0 && g > cut && g.is_finite())
        .collect();
    let take = ((usable.len() as f64) * opts.tail_fraction).round() as usize;
    if take < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: take,
        });
    }
    let window = &usable[usable.len() - take..];
    let xs: Vec<f64> = window
        .iter()
        .map(|&(k, _)| match model {
            RateModel::Power => (k as f64).ln(),
            RateModel::Linear => k as f64,
        })
        .collect();
    let ys: Vec<f64> = window.iter().map(|&(_, g)| g.ln()).collect();
    let (slope, r_squared) = least_squares(&xs, &ys);
    let value = match model {
        RateModel::Power => -slope,
        RateModel::Linear => slope.exp(),
    };
    Ok(RateFit {
        model,
        value,
        r_squared,
        window: (window[0].0, window[take - 1].0),
        points: take,
    })
}

/// Slope and coefficient of determination of `y ≈ c + slope·x`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - my - slope * (x - mx);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, r2)
}

/// `‖x − x_ref‖/‖T_{1/L}(x) − x‖`, or none when either side vanishes.
pub fn error_bound_ratio(problem: &ProblemInstance, x: &[f64], x_ref: &[f64]) -> Result<Option<f64>> {
    let d = dist(x, x_ref);
    let res = forward_backward_map(problem, x, 1.0 / problem.lipschitz())?.residual_norm;
    if d == 0.0 || !(res > f64::MIN_POSITIVE) {
        return Ok(None);
    }
    let ratio = d / res;
    Ok(ratio.is_finite().then_some(ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBoundProbe {
    /// Largest observed ratio; `‖x − x_ref‖` stands in for `dist(x, X*)`.
    pub tau: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Samples `x = x_ref + ρ·d` with `d` uniform on the unit sphere and `ρ`
/// uniform on `(0, radius]`, and returns the largest error-bound ratio.
///
/// Draw order per sample: `n` standard normals for `d`, then one uniform for `ρ`.
pub fn probe_error_bound(
    problem: &ProblemInstance,
    x_ref: &[f64],
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ErrorBoundProbe> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    if x_ref.len() != problem.dimension() {
        return Err(Error::invalid("x_ref has the wrong dimension"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = vec![0.0; x_ref.len()];
    let (mut tau, mut used, mut skipped) = (0.0f64, 0, 0);
    for _ in 0..samples {
        let d: Vec<f64> = (0..x.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rho = radius * (1.0 - rng.random::<f64>());
        for i in 0..x.len() {
            x[i] = x_ref[i] + rho * d[i] / dn;
        }
        match error_bound_ratio(problem, &x, x_ref)? {
            Some(r) => {
                tau = tau.max(r);
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(ErrorBoundProbe { tau, used, skipped })
}

/// Share of `Σ‖x_k − y_k‖²` contributed by the last `fraction` of records.
pub fn tail_sum_share(trace: &Trace, fraction: f64) -> f64 {
    let sq: Vec<f64> = trace.records.iter().map(|r| r.y_gap * r.y_gap).collect();
    let total: f64 = sq.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let start = sq.len() - ((sq.len() as f64) * fraction).round() as usize;
    sq[start..].iter().sum::<f64>() / total
}

/// `(k, (F(x_k) − f*)·λ/‖x_k − y_k‖²)` for records with a positive gap above
/// `band` and a nonzero `y` gap.
pub fn gap_to_momentum_ratios(trace: &Trace, f_star: f64, band: f64) -> Vec<(u64, f64)> {
    trace
        .records
        .iter()
        .filter(|r| r.k >= 1 && r.y_gap > 0.0 && r.objective - f_star > band)
        .map(|r| (r.k, (r.objective - f_star) * trace.lambda / (r.y_gap * r.y_gap)))
        .collect()
}
