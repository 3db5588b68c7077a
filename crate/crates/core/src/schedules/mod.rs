//! Momentum schedules `t_k` and the inertial weights `γ_k = (t_k − 1)/t_{k+1}`.
//!
//! Every t-based kind starts at `t_1 = 1`, so `γ_1 = 0`. The exponential kind
//! is evaluated entirely in the exponent domain; `e^{(k−1)^α}` leaves double
//! range near `k ≈ 710^{1/α}`.

mod a2;
mod comparison;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use a2::{check_assumption_a2, A2Estimate, A2Model};
pub use comparison::{ComparisonCase, ComparisonSeq};

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;

/// Largest double below one. Produced weights are clamped to `[0, GAMMA_MAX]`.
pub const GAMMA_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Slack of the Nesterov-rule scan, applied to the rule divided by `t_{k+1}²`.
pub const NESTEROV_SLACK: f64 = 1e-9;

/// A momentum rule. String form in parentheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `t_k = e^{(k−1)^α}`, `α ∈ (0,1)` (`exp:ALPHA`)
    Exp { alpha: f64 },
    /// `t_k = (k^r − 1 + a)/a` (`pow:R:A`)
    Power { r: f64, a: f64 },
    /// `t_1 = 1`, `t_k = k/ln^θ k` (`logpoly:THETA`)
    LogPoly { theta: f64 },
    /// `t_{k+1} = (1 + √(1 + 4t_k²))/2` (`fista`)
    FistaClassic,
    /// `t_k = (k − 1 + a)/a` (`fista_cd:A`)
    FistaCD { a: f64 },
    /// `γ_k ≡ β` (`const:BETA`)
    ConstantBeta { beta: f64 },
    /// Heavy-ball constant `(√L − √μ)/(√L + √μ)`, resolved against a
    /// strongly convex problem (`const:*`)
    OptimalBeta,
    /// `γ_k ≡ 0` (`none`)
    NoInertia,
}

impl ScheduleKind {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("{self}: {what}")));
        match *self {
            ScheduleKind::Exp { alpha } if !(alpha > 0.0 && alpha < 1.0) => bad("α must lie in (0,1)"),
            ScheduleKind::Power { r, a } if !(r > 0.0 && a > 0.0 && r.is_finite() && a.is_finite()) => {
                bad("r and a must be positive")
            }
            ScheduleKind::LogPoly { theta } if !(theta > 0.0 && theta.is_finite()) => bad("θ must be positive"),
            ScheduleKind::FistaCD { a } if !(a > 0.0 && a.is_finite()) => bad("a must be positive"),
            ScheduleKind::ConstantBeta { beta } if !(0.0..1.0).contains(&beta) => bad("β must lie in [0,1)"),
            _ => Ok(()),
        }
    }

    /// Whether the kind is defined through a sequence `t_k`.
    pub fn is_t_based(&self) -> bool {
        !matches!(
            self,
            ScheduleKind::ConstantBeta { .. } | ScheduleKind::OptimalBeta | ScheduleKind::NoInertia
        )
    }

    /// Replaces [`ScheduleKind::OptimalBeta`] by the constant computed from the
    /// problem's strong convexity and Lipschitz constants.
    pub fn resolve(self, problem: &ProblemInstance) -> Result<Self> {
        if self != ScheduleKind::OptimalBeta {
            return Ok(self);
        }
        let mu = problem
            .strong_convexity()
            .filter(|m| *m > 0.0)
            .ok_or_else(|| Error::invalid("const:* needs a strongly convex problem"))?;
        let (sl, sm) = (problem.lipschitz().sqrt(), mu.sqrt());
        Ok(ScheduleKind::ConstantBeta {
            beta: ((sl - sm) / (sl + sm)).clamp(0.0, GAMMA_MAX),
        })
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Exp { alpha } => write!(f, "exp:{alpha}"),
            ScheduleKind::Power { r, a } => write!(f, "pow:{r}:{a}"),
            ScheduleKind::LogPoly { theta } => write!(f, "logpoly:{theta}"),
            ScheduleKind::FistaClassic => f.write_str("fista"),
            ScheduleKind::FistaCD { a } => write!(f, "fista_cd:{a}"),
            ScheduleKind::ConstantBeta { beta } => write!(f, "const:{beta}"),
            ScheduleKind::OptimalBeta => f.write_str("const:*"),
            ScheduleKind::NoInertia => f.write_str("none"),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("schedule `{s}`: `{}` is not a number", parts[i])))
        };
        let kind = match (parts[0], parts.len()) {
            ("exp", 2) => ScheduleKind::Exp { alpha: num(1)? },
            ("pow", 3) => ScheduleKind::Power { r: num(1)?, a: num(2)? },
            ("logpoly", 2) => ScheduleKind::LogPoly { theta: num(1)? },
            ("fista", 1) => ScheduleKind::FistaClassic,
            ("fista_cd", 2) => ScheduleKind::FistaCD { a: num(1)? },
            ("const", 2) if parts[1] == "*" => ScheduleKind::OptimalBeta,
            ("const", 2) => ScheduleKind::ConstantBeta { beta: num(1)? },
            ("none", 1) => ScheduleKind::NoInertia,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown schedule `{s}` (expected exp:ALPHA, pow:R:A, logpoly:THETA, fista, \
                     fista_cd:A, const:BETA, const:* or none)"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl Serialize for ScheduleKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScheduleKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A schedule instance. The classic FISTA kind is a recursion and keeps a
/// cursor `(k, t_k)`, so one instance belongs to one run.
#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    cursor_k: u64,
    cursor_t: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Result<Self> {
        kind.validate()?;
        if kind == ScheduleKind::OptimalBeta {
            return Err(Error::invalid("const:* must be resolved against a problem first"));
        }
        Ok(Schedule {
            kind,
            cursor_k: 1,
            cursor_t: 1.0,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// `t_k` by the case formula.
    ///
    /// Fails with a range error when the exponential kind leaves double range
    /// (use [`Schedule::gamma`], which never forms `t_k`) and with an
    /// invalid-argument error for kinds without a `t` sequence.
    pub fn t_value(&mut self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("schedules are indexed from k = 1"));
        }
        let kf = k as f64;
        match self.kind {
            ScheduleKind::Exp { alpha } => {
                let e = (kf - 1.0).powf(alpha);
                if e >= f64::MAX.ln() {
                    return Err(Error::Range(format!(
                        "t_{k} = e^{e} overflows; use gamma() for the exponential schedule"
                    )));
                }
                Ok(e.exp())
            }
            ScheduleKind::Power { r, a } => Ok(((r * kf.ln()).exp_m1() + a) / a),
            ScheduleKind::LogPoly { theta } => Ok(if k == 1 { 1.0 } else { kf / kf.ln().powf(theta) }),
            ScheduleKind::FistaClassic => Ok(self.fista_t(k)),
            ScheduleKind::FistaCD { a } => Ok((kf - 1.0 + a) / a),
            _ => Err(Error::invalid(format!("{} has no t sequence", self.kind))),
        }
    }

    /// `γ_k ∈ [0, 1)`. Index `k = 0` is treated as `k = 1`.
    pub fn gamma(&mut self, k: u64) -> f64 {
        let k = k.max(1);
        let kf = k as f64;
        let g = match self.kind {
            ScheduleKind::Exp { alpha } => exp_gamma(alpha, kf),
            ScheduleKind::Power { r, a } => power_gamma(r, a, kf),
            ScheduleKind::LogPoly { theta } => {
                let t = |j: f64| if j == 1.0 { 1.0 } else { j / j.ln().powf(theta) };
                (t(kf) - 1.0) / t(kf + 1.0)
            }
            ScheduleKind::FistaClassic => {
                let tk = self.fista_t(k);
                (tk - 1.0) / fista_next(tk)
            }
            ScheduleKind::FistaCD { a } => (kf - 1.0) / (kf + a),
            ScheduleKind::ConstantBeta { beta } => beta,
            ScheduleKind::OptimalBeta | ScheduleKind::NoInertia => 0.0,
        };
        // LogPoly with large θ is non-monotone at small k and leaves [0,1) there.
        g.clamp(0.0, GAMMA_MAX)
    }

    /// `t_{k+1}/t_k` and `1/t_{k+1}` without forming `t` for the exponential kind.
    fn ratio_terms(&mut self, k: u64) -> Result<(f64, f64)> {
        let kf = k as f64;
        match self.kind {
            ScheduleKind::Exp { alpha } => {
                let grow = -exp_log_step(alpha, kf);
                Ok((grow.exp(), (-kf.powf(alpha)).exp()))
            }
            _ => {
                let tk = self.t_value(k)?;
                let tn = self.t_value(k + 1)?;
                Ok((tn / tk, 1.0 / tn))
            }
        }
    }

    /// Smallest `k ∈ [1, k_max]` with `t_k² − t_{k+1}² + t_{k+1} < 0`, or none.
    ///
    /// The rule is tested after division by `t_{k+1}²`, against
    /// [`NESTEROV_SLACK`]; the raw form cancels catastrophically once `t` is large.
    pub fn check_nesterov_rule(&mut self, k_max: u64) -> Result<Option<u64>> {
        if k_max < 2 {
            return Err(Error::invalid("k_max must be at least 2"));
        }
        if !self.kind.is_t_based() {
            return Err(Error::invalid(format!("{} has no t sequence", self.kind)));
        }
        for k in 1..=k_max {
            let (grow, inv_next) = self.ratio_terms(k)?;
            let rho = 1.0 / grow;
            if rho * rho - 1.0 + inv_next < -NESTEROV_SLACK {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// `t_{k+1}/t_k − 1`, evaluated without cancellation.
    pub(crate) fn relative_increment(&mut self, k: u64) -> Result<f64> {
        let kf = k as f64;
        match self.kind {
            ScheduleKind::Exp { alpha } => Ok((-exp_log_step(alpha, kf)).exp_m1()),
            ScheduleKind::Power { r, a } => {
                let u = (-r * kf.ln()).exp();
                Ok((r * (1.0 / kf).ln_1p()).exp_m1() / (1.0 + (a - 1.0) * u))
            }
            ScheduleKind::LogPoly { theta } if k >= 2 => {
                let l1 = (1.0 / kf).ln_1p();
                Ok((l1 - theta * (l1 / kf.ln()).ln_1p()).exp_m1())
            }
            ScheduleKind::FistaClassic => {
                let tk = self.fista_t(k);
                let step = 0.5 * (1.0 + 1.0 / ((1.0 + 4.0 * tk * tk).sqrt() + 2.0 * tk));
                Ok(step / tk)
            }
            ScheduleKind::FistaCD { a } => Ok(1.0 / (kf - 1.0 + a)),
            _ => {
                let (grow, _) = self.ratio_terms(k)?;
                Ok(grow - 1.0)
            }
        }
    }

    fn fista_t(&mut self, k: u64) -> f64 {
        if k < self.cursor_k {
            self.cursor_k = 1;
            self.cursor_t = 1.0;
        }
        while self.cursor_k < k {
            self.cursor_t = fista_next(self.cursor_t);
            self.cursor_k += 1;
        }
        self.cursor_t
    }
}

#[inline]
fn fista_next(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// `(k−1)^α − k^α = k^α·((1 − 1/k)^α − 1)`, without cancellation.
#[inline]
pub(crate) fn exp_log_step(alpha: f64, k: f64) -> f64 {
    k.powf(alpha) * (alpha * (-1.0 / k).ln_1p()).exp_m1()
}

/// `γ_k = e^{(k−1)^α − k^α} − e^{−k^α}`.
#[inline]
pub(crate) fn exp_gamma(alpha: f64, k: f64) -> f64 {
    exp_log_step(alpha, k).exp() - (-k.powf(alpha)).exp()
}

/// `γ_k = (k^r − 1)/((k+1)^r − 1 + a)`, divided through by `k^r`.
#[inline]
pub(crate) fn power_gamma(r: f64, a: f64, k: f64) -> f64 {
    let lk = k.ln();
    let u = (-r * lk).exp();
    -(-r * lk).exp_m1() / ((r * (1.0 / k).ln_1p()).exp() + (a - 1.0) * u)
}
