//! Comparison sequences `s_k` with `α_k = (s_k − 1)/s_{k+1}`. When `α_k ≥ γ_k`
//! eventually, the rate of `s_k` transfers to the iterates.

use super::{exp_gamma, exp_log_step, power_gamma, Schedule, ScheduleKind};
use crate::error::{Error, Result};

/// Construction of `s_k`, keyed by the schedule it is paired with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComparisonCase {
    /// `s_k ≡ 1`
    Unit,
    /// `s_k = t_k = e^{(k−1)^α}`
    Exp { alpha: f64 },
    /// `s_k = t_k = (k^r − 1 + a)/a`, `r > 1`
    PowerAbove { r: f64, a: f64 },
    /// `s_1 = 1`, `s_k = (k − 1)^p`, `p > 1`; pairs with `pow:R:A`, `r < 1`
    PowerBelow { p: f64 },
    /// `s_k = k^p`, `p ≥ 2`; pairs with `logpoly`
    LogPoly { p: f64 },
    /// `s_1 = s_2 = 1`, `s_k = (k − 1)³/I(k − 1)²`, `I(K) = ∫₁^K ln x/x² dx`
    Fista,
    /// `s_k = (k + a − 1)^{a+1}` for `a ≥ 1`; for `a < 1`, `s_1 = s_2 = 1` and
    /// `s_k = (k + a − 1)^{a+1}/J(k − 1)`, `J(K) = ∫₁^K ln x/x^{1+a} dx`
    FistaCD { a: f64 },
}

/// `∫₁^K ln x/x² dx = 1 − (1 + ln K)/K`
pub fn log_over_square_integral(k: f64) -> f64 {
    1.0 - (1.0 + k.ln()) / k
}

/// `∫₁^K ln x/x^{1+a} dx = 1/a² − ln K/(aK^a) − 1/(a²K^a)`
pub fn log_over_power_integral(a: f64, k: f64) -> f64 {
    let ka = k.powf(a);
    1.0 / (a * a) - k.ln() / (a * ka) - 1.0 / (a * a * ka)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSeq {
    case: ComparisonCase,
}

impl ComparisonSeq {
    pub fn new(case: ComparisonCase) -> Result<Self> {
        let ok = match case {
            ComparisonCase::Unit | ComparisonCase::Fista => true,
            ComparisonCase::Exp { alpha } => alpha > 0.0 && alpha < 1.0,
            ComparisonCase::PowerAbove { r, a } => r > 1.0 && a > 0.0,
            ComparisonCase::PowerBelow { p } => p > 1.0,
            ComparisonCase::LogPoly { p } => p >= 2.0,
            ComparisonCase::FistaCD { a } => a > 0.0,
        };
        if !ok {
            return Err(Error::invalid(format!("bad comparison construction {case:?}")));
        }
        Ok(ComparisonSeq { case })
    }

    /// The construction paired with `kind`; `p` is used where it is free.
    pub fn for_schedule(kind: ScheduleKind, p: f64) -> Result<Self> {
        let case = match kind {
            ScheduleKind::Exp { alpha } => ComparisonCase::Exp { alpha },
            ScheduleKind::Power { r, a } if r > 1.0 => ComparisonCase::PowerAbove { r, a },
            ScheduleKind::Power { r, .. } if r < 1.0 => ComparisonCase::PowerBelow { p },
            ScheduleKind::Power { a, .. } | ScheduleKind::FistaCD { a } => ComparisonCase::FistaCD { a },
            ScheduleKind::LogPoly { .. } => ComparisonCase::LogPoly { p },
            ScheduleKind::FistaClassic => ComparisonCase::Fista,
            other => return Err(Error::Unsupported(format!("no comparison sequence for {other}"))),
        };
        Self::new(case)
    }

    pub fn case(&self) -> ComparisonCase {
        self.case
    }

    fn check_k(k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("comparison sequences start at k = 1"));
        }
        Ok(k as f64)
    }

    /// `ln s_k`
    pub fn ln_s(&self, k: u64) -> Result<f64> {
        let kf = Self::check_k(k)?;
        Ok(match self.case {
            ComparisonCase::Unit => 0.0,
            ComparisonCase::Exp { alpha } => (kf - 1.0).powf(alpha),
            ComparisonCase::PowerAbove { r, a } => (((r * kf.ln()).exp_m1() + a) / a).ln(),
            ComparisonCase::PowerBelow { p } => {
                if k == 1 {
                    0.0
                } else {
                    p * (kf - 1.0).ln()
                }
            }
            ComparisonCase::LogPoly { p } => p * kf.ln(),
            ComparisonCase::Fista => {
                if k <= 2 {
                    0.0
                } else {
                    3.0 * (kf - 1.0).ln() - 2.0 * log_over_square_integral(kf - 1.0).ln()
                }
            }
            ComparisonCase::FistaCD { a } => {
                let lead = (a + 1.0) * (kf + a - 1.0).ln();
                if a >= 1.0 {
                    lead
                } else if k <= 2 {
                    0.0
                } else {
                    lead - log_over_power_integral(a, kf - 1.0).ln()
                }
            }
        })
    }

    /// `s_k`; a range error when it exceeds double range.
    pub fn s_value(&self, k: u64) -> Result<f64> {
        let ln = self.ln_s(k)?;
        let s = match self.case {
            ComparisonCase::PowerBelow { p } if k >= 2 => (k as f64 - 1.0).powf(p),
            ComparisonCase::LogPoly { p } => (k as f64).powf(p),
            ComparisonCase::FistaCD { a } if a >= 1.0 => (k as f64 + a - 1.0).powf(a + 1.0),
            _ => ln.exp(),
        };
        if !s.is_finite() {
            return Err(Error::Range(format!("s_{k} overflows (ln s = {ln})")));
        }
        Ok(s)
    }

    /// `α_k = (s_k − 1)/s_{k+1}`. Where `s = t` this is the schedule's own
    /// `γ_k`, evaluated by the same arithmetic.
    pub fn alpha(&self, k: u64) -> Result<f64> {
        let kf = Self::check_k(k)?;
        match self.case {
            ComparisonCase::Exp { alpha } => Ok(exp_gamma(alpha, kf)),
            ComparisonCase::PowerAbove { r, a } => Ok(power_gamma(r, a, kf)),
            _ => Ok((self.s_value(k)? - 1.0) / self.s_value(k + 1)?),
        }
    }

    /// `(s_{k+1}² − s_k²)/s_k²`
    pub fn growth_ratio(&self, k: u64) -> Result<f64> {
        let kf = Self::check_k(k)?;
        let dl = match self.case {
            ComparisonCase::Unit => 0.0,
            ComparisonCase::Exp { alpha } => -exp_log_step(alpha, kf),
            ComparisonCase::PowerAbove { r, a } => {
                let mut s = Schedule::new(ScheduleKind::Power { r, a })?;
                s.relative_increment(k)?.ln_1p()
            }
            ComparisonCase::PowerBelow { p } if k >= 2 => p * (1.0 / (kf - 1.0)).ln_1p(),
            ComparisonCase::LogPoly { p } => p * (1.0 / kf).ln_1p(),
            ComparisonCase::FistaCD { a } if a >= 1.0 => (a + 1.0) * (1.0 / (kf + a - 1.0)).ln_1p(),
            _ => self.ln_s(k + 1)? - self.ln_s(k)?,
        };
        Ok((2.0 * dl).exp_m1())
    }

    /// Smallest `K ≤ k_max` with `α_k ≥ γ_k` for every `k ∈ [K, k_max]`, or
    /// none when dominance fails at `k_max` itself.
    pub fn dominance_onset(&self, schedule: &Schedule, k_max: u64) -> Result<Option<u64>> {
        // Forward scan: the recursive FISTA cursor only moves up.
        let mut s = schedule.clone();
        let mut last_fail = 0;
        for k in 1..=k_max {
            if self.alpha(k)? < s.gamma(k) {
                last_fail = k;
            }
        }
        Ok((last_fail < k_max).then_some(last_fail + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> (ComparisonSeq, Schedule) {
        let kind: ScheduleKind = s.parse().unwrap();
        (ComparisonSeq::for_schedule(kind, 2.0).unwrap(), Schedule::new(kind).unwrap())
    }

    #[test]
    fn integral_limits() {
        assert!((log_over_square_integral(1e12) - 1.0).abs() < 1e-10);
        assert_eq!(log_over_square_integral(1.0), 0.0);
        assert!((log_over_power_integral(0.5, 1e30) - 4.0).abs() < 1e-12);
        assert!(log_over_power_integral(0.5, 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrals_match_quadrature() {
        // composite Simpson on [1, K]
        let simpson = |f: &dyn Fn(f64) -> f64, k: f64| {
            let n = 20_000;
            let h = (k - 1.0) / n as f64;
            let mut acc = f(1.0) + f(k);
            for i in 1..n {
                acc += f(1.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        for k in [2.0, 7.5, 40.0] {
            let q = simpson(&|x: f64| x.ln() / (x * x), k);
            assert!((q - log_over_square_integral(k)).abs() < 1e-10);
            let q = simpson(&|x: f64| x.ln() / x.powf(1.7), k);
            assert!((q - log_over_power_integral(0.7, k)).abs() < 1e-10);
        }
    }

    #[test]
    fn case_mapping() {
        assert_eq!(seq("pow:1:3").0.case(), ComparisonCase::FistaCD { a: 3.0 });
        assert_eq!(seq("pow:0.5:0.5").0.case(), ComparisonCase::PowerBelow { p: 2.0 });
        assert_eq!(seq("pow:8:4").0.case(), ComparisonCase::PowerAbove { r: 8.0, a: 4.0 });
        assert!(ComparisonSeq::for_schedule(ScheduleKind::NoInertia, 2.0).is_err());
    }

    #[test]
    fn start_values() {
        let (c, _) = seq("fista");
        assert_eq!(c.s_value(1).unwrap(), 1.0);
        assert_eq!(c.s_value(2).unwrap(), 1.0);
        assert!(c.s_value(0).is_err());
        let (c, _) = seq("fista_cd:4");
        assert_eq!(c.s_value(1).unwrap(), 4f64.powi(5));
    }

    #[test]
    fn fista_cd_unit_a_alpha_equals_gamma() {
        let (c, mut s) = seq("fista_cd:1");
        for k in 1..=10_000 {
            let (al, g) = (c.alpha(k).unwrap(), s.gamma(k));
            assert!((al - g).abs() <= 1e-12, "k={k}");
        }
    }

    #[test]
    fn growth_ratio_matches_direct() {
        for s in ["pow:0.5:0.5", "logpoly:1", "fista", "fista_cd:4", "fista_cd:0.7", "exp:0.5", "pow:3:2"] {
            let (c, _) = seq(s);
            for k in [5u64, 50, 500] {
                let (a, b) = (c.s_value(k).unwrap(), c.s_value(k + 1).unwrap());
                let direct = (b * b - a * a) / (a * a);
                let r = c.growth_ratio(k).unwrap();
                assert!((r - direct).abs() <= 1e-9 * direct.abs(), "{s} k={k}: {r} vs {direct}");
            }
        }
    }

    #[test]
    fn small_a_onset_is_late_but_exists() {
        // α_k − γ_k ≈ (a² ln k − 1/a²)/k^{1+a}: positive once ln k > 1/a⁴.
        let (c, s) = seq("fista_cd:0.9");
        let k = c.dominance_onset(&s, 100_000).unwrap().unwrap();
        assert!(k < 1_000);
        let (c, s) = seq("fista_cd:0.5");
        assert_eq!(c.dominance_onset(&s, 100_000).unwrap(), None);
    }
}
