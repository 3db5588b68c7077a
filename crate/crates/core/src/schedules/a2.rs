//! Numerical estimate of `c = lim k^σ(t_{k+1}/t_k − 1)`.

use serde::Serialize;

use super::Schedule;
use crate::error::{Error, Result};

/// Cauchy tolerance between the two extrapolated estimates.
pub const A2_TOLERANCE: f64 = 0.01;

const LADDER_POINTS: usize = 4;

/// Extrapolation model chosen for the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum A2Model {
    /// Last ladder value, no extrapolation.
    Raw,
    /// Aitken's Δ², for errors decaying like a power of `k`.
    Aitken,
    /// Linear in `1/ln k`, for logarithmic errors.
    InverseLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Estimate {
    pub limit: f64,
    /// Whether the two estimates from overlapping sub-ladders agree within 1%.
    pub converged: bool,
    pub model: A2Model,
    /// `(k, k^σ(t_{k+1}/t_k − 1))`
    pub ladder: Vec<(u64, f64)>,
}

/// Evaluates `k^σ(t_{k+1}/t_k − 1)` on a four-point geometric ladder ending at
/// `k_probe` and extrapolates.
///
/// Each model produces one estimate from the three lowest and one from the
/// three highest rungs; the model whose two estimates agree best wins, and the
/// estimate is flagged unconverged when they differ by more than 1%.
pub fn check_assumption_a2(schedule: &Schedule, sigma: f64, k_probe: u64) -> Result<A2Estimate> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::invalid(format!("σ must lie in (0,1], got {sigma}")));
    }
    if k_probe < 1000 {
        return Err(Error::invalid("k_probe must be at least 1000"));
    }
    if !schedule.kind().is_t_based() {
        return Err(Error::invalid(format!("{} has no t sequence", schedule.kind())));
    }
    let mut s = schedule.clone();
    let k_lo = (k_probe / 1000).max(10) as f64;
    let span = (k_probe as f64 / k_lo).ln();
    let mut ladder = Vec::with_capacity(LADDER_POINTS);
    for i in 0..LADDER_POINTS {
        let k = if i + 1 == LADDER_POINTS {
            k_probe
        } else {
            (k_lo * (span * i as f64 / (LADDER_POINTS - 1) as f64).exp()).round() as u64
        };
        let v = (k as f64).powf(sigma) * s.relative_increment(k)?;
        ladder.push((k, v));
    }

    let v: Vec<f64> = ladder.iter().map(|p| p.1).collect();
    let lk: Vec<f64> = ladder.iter().map(|p| (p.0 as f64).ln()).collect();
    let aitken = |i: usize| {
        let (d1, d2) = (v[i + 1] - v[i], v[i + 2] - v[i + 1]);
        let den = d2 - d1;
        if den.abs() <= 1e-300 || !(d1 * d2 > 0.0) {
            v[i + 2]
        } else {
            v[i + 2] - d2 * d2 / den
        }
    };
    let inv_log = |i: usize| (v[i + 2] * lk[i + 2] - v[i + 1] * lk[i + 1]) / (lk[i + 2] - lk[i + 1]);

    let candidates = [
        (A2Model::Raw, v[2], v[3]),
        (A2Model::Aitken, aitken(0), aitken(1)),
        (A2Model::InverseLog, inv_log(0), inv_log(1)),
    ];
    let (model, early, late) = candidates
        .iter()
        .copied()
        .filter(|c| c.1.is_finite() && c.2.is_finite())
        .min_by(|x, y| (x.1 - x.2).abs().total_cmp(&(y.1 - y.2).abs()))
        .ok_or_else(|| Error::numeric("A2 ladder produced no finite estimate"))?;
    Ok(A2Estimate {
        limit: late,
        converged: (late - early).abs() <= A2_TOLERANCE * late.abs(),
        model,
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(s: &str, sigma: f64, k: u64) -> A2Estimate {
        check_assumption_a2(&Schedule::new(s.parse().unwrap()).unwrap(), sigma, k).unwrap()
    }

    #[test]
    fn ladder_shape() {
        let e = est("fista_cd:4", 1.0, 1_000_000);
        let ks: Vec<u64> = e.ladder.iter().map(|p| p.0).collect();
        assert_eq!(ks, vec![1_000, 10_000, 100_000, 1_000_000]);
    }

    #[test]
    fn fista_cd_limit() {
        let e = est("fista_cd:4", 1.0, 1_000_000);
        assert!(e.converged);
        assert!((e.limit - 1.0).abs() < 1e-3);
    }

    #[test]
    fn logpoly_needs_log_model() {
        let e = est("logpoly:1", 1.0, 1_000_000);
        assert!(e.converged);
        assert_eq!(e.model, A2Model::InverseLog);
        assert!((e.limit - 1.0).abs() < 0.01, "{}", e.limit);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = Schedule::new("fista".parse().unwrap()).unwrap();
        assert!(check_assumption_a2(&s, 0.0, 1_000_000).is_err());
        assert!(check_assumption_a2(&s, 1.0, 10).is_err());
        let c = Schedule::new("const:0.5".parse().unwrap()).unwrap();
        assert!(check_assumption_a2(&c, 1.0, 10_000).is_err());
    }
}
