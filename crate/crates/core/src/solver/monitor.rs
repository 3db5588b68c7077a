//! Online and post-hoc energy checks.

use serde::Serialize;

use super::Trace;
use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::schedules::ComparisonSeq;
use crate::vecops::dist_sq;

/// Relative slack of the descent monitor: violations count when they exceed
/// `DESCENT_SLACK·(1 + |F(x_new)|)`.
pub const DESCENT_SLACK: f64 = 1e-8;

/// Amount by which
///
/// `F(x⁺) + ‖x⁺ − x‖²/2λ + (1−μ)‖x⁺ − y‖²/2λ ≤ F(x) + ‖y − x‖²/2λ`
///
/// fails for `x⁺ = T_λ(y)`, or zero.
pub fn monitor_descent(
    problem: &ProblemInstance,
    x_prev: &[f64],
    y: &[f64],
    x_new: &[f64],
    lambda: f64,
    mu: f64,
) -> f64 {
    descent_violation(
        problem.objective(x_prev),
        problem.objective(x_new),
        dist_sq(x_new, x_prev),
        dist_sq(y, x_prev),
        dist_sq(x_new, y),
        lambda,
        mu,
    )
}

pub(crate) fn descent_violation(
    f_prev: f64,
    f_new: f64,
    step_sq: f64,
    momentum_sq: f64,
    y_gap_sq: f64,
    lambda: f64,
    mu: f64,
) -> f64 {
    let h = 0.5 / lambda;
    let lhs = f_new + h * step_sq + (1.0 - mu) * h * y_gap_sq;
    let rhs = f_prev + h * momentum_sq;
    (lhs - rhs).max(0.0)
}

/// Whether a violation counts at objective value `f_new`.
pub fn descent_violation_significant(violation: f64, f_new: f64) -> bool {
    violation > DESCENT_SLACK * (1.0 + f_new.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// `(k, E_k)` for every record with `k ≥ 1`.
    pub energies: Vec<(u64, f64)>,
    /// Smallest `k₀` with `E_{k+1} ≤ E_k + band` for every recorded `k ≥ k₀`.
    /// `None` when the last pair already increases.
    pub onset: Option<u64>,
    /// Increases beyond the band before the onset.
    pub violations_before_onset: usize,
}

/// `E_k = s_{k+1}²(F(x_k) − F*) + (s_k²/2λ)‖x_k − x_{k−1}‖²`.
///
/// `f_star_error` bounds `|F* − f_star|`; a rise of `E_{k+1}` over `E_k` within
/// `s_{k+2}²·f_star_error` (the weight `E_{k+1}` puts on the objective gap) is
/// not counted.
pub fn lyapunov_series(
    trace: &Trace,
    comparison: &ComparisonSeq,
    f_star: f64,
    f_star_error: f64,
    lambda: f64,
) -> Result<LyapunovReport> {
    if !(lambda > 0.0) || !(f_star_error >= 0.0) {
        return Err(Error::invalid("λ must be positive and the f* error nonnegative"));
    }
    let f_min = trace
        .records
        .iter()
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    if f_star > f_min + f_star_error {
        return Err(Error::invalid(format!(
            "f* = {f_star} lies above the smallest recorded objective {f_min}"
        )));
    }
    let mut energies = Vec::with_capacity(trace.records.len());
    let mut bands = Vec::with_capacity(trace.records.len());
    for r in trace.records.iter().filter(|r| r.k >= 1) {
        let s_next = comparison.s_value(r.k + 1)?;
        let s_k = comparison.s_value(r.k)?;
        let e = s_next * s_next * (r.objective - f_star) + s_k * s_k * r.step_len * r.step_len / (2.0 * lambda);
        energies.push((r.k, e));
        bands.push(s_next * s_next * f_star_error);
    }
    let rises: Vec<bool> = energies
        .windows(2)
        .zip(bands.iter().skip(1))
        .map(|(w, band)| w[1].1 > w[0].1 + band)
        .collect();
    let onset = match rises.iter().rposition(|r| *r) {
        None => energies.first().map(|e| e.0),
        Some(i) if i + 2 < energies.len() => Some(energies[i + 1].0),
        Some(_) => None,
    };
    let violations_before_onset = rises.iter().filter(|r| **r).count();
    Ok(LyapunovReport {
        energies,
        onset,
        violations_before_onset,
    })
}
