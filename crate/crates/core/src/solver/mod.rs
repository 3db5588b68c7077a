//! Iteration engines: inertial forward-backward (IFB), IFB with adaptive
//! momentum modification, FISTA with restart, and plain forward-backward.
//!
//! Per iteration each engine evaluates `∇f` twice (at `y_k` for the step and at
//! `x_k` for the termination measure) and `f` once (at `x_k`, cached for the
//! function test and the descent monitor).

mod monitor;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use monitor::{
    descent_violation_significant, lyapunov_series, monitor_descent, LyapunovReport, DESCENT_SLACK,
};

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::prox::{fb_step, min_norm_from_gradient};
use crate::schedules::{Schedule, ScheduleKind};
use crate::vecops::{all_finite, dist, dist_sq, dot};

/// Default step fraction, `λ = 0.98/L_f`.
pub const DEFAULT_MU: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// Norm of the minimum-norm element of `∂F(x_k)`.
    Subgradient,
    /// `(1/λ)‖x_k − T_λ(x_k)‖`.
    Residual,
}

/// Momentum-zeroing test of IFB_AdapM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modification {
    #[default]
    None,
    /// `(y_k − x_k)ᵀ(x_k − x_{k−1}) > 0`
    Gradient,
    /// `F(x_k) > F(x_{k−1})`
    Function,
    Both,
}

/// Restart rule for FISTA. Restarting resets `t` to 1, unlike modification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Restart {
    #[default]
    None,
    Fixed { period: u64 },
    /// Fires on the modification test (gradient test when none is selected).
    Adaptive,
    FixedAdaptive { period: u64 },
}

impl Restart {
    fn period(&self) -> Option<u64> {
        match *self {
            Restart::Fixed { period } | Restart::FixedAdaptive { period } => Some(period),
            _ => None,
        }
    }

    fn adaptive(&self) -> bool {
        matches!(self, Restart::Adaptive | Restart::FixedAdaptive { .. })
    }
}

impl fmt::Display for Restart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Restart::None => f.write_str("none"),
            Restart::Fixed { period } => write!(f, "fixed:{period}"),
            Restart::Adaptive => f.write_str("adaptive"),
            Restart::FixedAdaptive { period } => write!(f, "fixed_adaptive:{period}"),
        }
    }
}

impl FromStr for Restart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let period = |p: &str| -> Result<u64> {
            match p.parse::<u64>() {
                Ok(k) if k > 0 => Ok(k),
                _ => Err(Error::invalid(format!("restart period `{p}` must be a positive integer"))),
            }
        };
        match s.split_once(':') {
            None if s == "none" => Ok(Restart::None),
            None if s == "adaptive" => Ok(Restart::Adaptive),
            Some(("fixed", p)) => Ok(Restart::Fixed { period: period(p)? }),
            Some(("fixed_adaptive", p)) => Ok(Restart::FixedAdaptive { period: period(p)? }),
            _ => Err(Error::invalid(format!(
                "unknown restart `{s}` (expected none, fixed:K, adaptive or fixed_adaptive:K)"
            ))),
        }
    }
}

impl Serialize for Restart {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Restart {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Engine selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ifb,
    Adapm,
    Restart,
    /// Forward-backward without inertia; ignores the schedule.
    Fb,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ifb => "ifb",
            Algorithm::Adapm => "adapm",
            Algorithm::Restart => "restart",
            Algorithm::Fb => "fb",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ifb" => Ok(Algorithm::Ifb),
            "adapm" => Ok(Algorithm::Adapm),
            "restart" => Ok(Algorithm::Restart),
            "fb" => Ok(Algorithm::Fb),
            _ => Err(Error::invalid(format!("unknown algorithm `{s}` (ifb, adapm, restart, fb)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Monitors {
    /// Check the per-step descent inequality and report the largest violation.
    pub descent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Step fraction in `(0, 1)`; `λ = μ/L_f`.
    pub mu: f64,
    pub tol: f64,
    pub max_iter: u64,
    /// `None` selects the subgradient measure when the regularizer supports it.
    pub termination: Option<Termination>,
    pub modification: Modification,
    pub restart: Restart,
    pub monitors: Monitors,
    /// Initial point; zero when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu: DEFAULT_MU,
            tol: 1e-6,
            max_iter: 100_000,
            termination: None,
            modification: Modification::None,
            restart: Restart::None,
            monitors: Monitors::default(),
            x0: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::invalid(format!("μ must lie in (0,1), got {}", self.mu)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }

    pub fn with_monitors(mut self) -> Self {
        self.monitors.descent = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateRecord {
    /// 0 for the initial point.
    pub k: u64,
    /// `F(x_k)`
    pub objective: f64,
    /// Termination measure at `x_k`.
    pub residual: f64,
    /// Weight used to form `y_{k+1}`.
    pub gamma: f64,
    /// `‖x_k − x_{k−1}‖`
    pub step_len: f64,
    /// Momentum was zeroed (modification or restart) when forming `y_{k+1}`.
    pub modified: bool,
    pub wall_nanos: u64,
    /// `‖x_k − y_k‖`; kept in memory only.
    #[serde(skip)]
    pub y_gap: f64,
}

impl IterateRecord {
    /// Equality of everything but wall time.
    pub fn same_iterate(&self, other: &IterateRecord) -> bool {
        let bits = |r: &IterateRecord| {
            [r.objective, r.residual, r.gamma, r.step_len, r.y_gap].map(f64::to_bits)
        };
        self.k == other.k && self.modified == other.modified && bits(self) == bits(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    NumericFailure,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::NumericFailure => "numeric_failure",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub records: Vec<IterateRecord>,
    pub final_x: Vec<f64>,
    pub status: Status,
    pub lambda: f64,
    pub termination: Termination,
    /// Reference optimum, when known; fills the gap column on export.
    pub f_star: Option<f64>,
    /// Largest descent-monitor violation, when the monitor ran.
    pub max_descent_violation: Option<f64>,
    /// Number of violations above [`DESCENT_SLACK`].
    pub descent_violations: usize,
}

impl Trace {
    /// Iterations performed (the initial point is record 0).
    pub fn iterations(&self) -> u64 {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn final_record(&self) -> &IterateRecord {
        self.records.last().expect("traces hold the initial point")
    }

    pub fn modified_count(&self) -> usize {
        self.records.iter().filter(|r| r.modified).count()
    }

    /// Bitwise equality ignoring wall time.
    pub fn same_iterates(&self, other: &Trace) -> bool {
        self.status == other.status
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_iterate(b))
            && self.final_x.iter().map(|v| v.to_bits()).eq(other.final_x.iter().map(|v| v.to_bits()))
    }
}

/// Inertial forward-backward:
/// `x_k = T_λ(y_k)`, `y_{k+1} = x_k + γ_k(x_k − x_{k−1})`, `y_1 = x_0`.
pub fn run_ifb(problem: &ProblemInstance, schedule: &Schedule, opts: &SolverOptions) -> Result<Trace> {
    let mut o = opts.clone();
    o.modification = Modification::None;
    o.restart = Restart::None;
    engine(problem, schedule, &o)
}

/// IFB with adaptive modification: `γ_k = 0` for one step when the selected
/// test fires. The schedule index keeps advancing.
pub fn run_ifb_adapm(problem: &ProblemInstance, schedule: &Schedule, opts: &SolverOptions) -> Result<Trace> {
    if opts.modification == Modification::None {
        return Err(Error::invalid("adaptive modification needs a gradient, function or both test"));
    }
    let mut o = opts.clone();
    o.restart = Restart::None;
    engine(problem, schedule, &o)
}

/// FISTA with fixed and/or adaptive restart: on a restart `t` returns to 1.
pub fn run_fista_restart(problem: &ProblemInstance, opts: &SolverOptions) -> Result<Trace> {
    if opts.restart == Restart::None {
        return Err(Error::invalid("restart scheme must not be none"));
    }
    let schedule = Schedule::new(ScheduleKind::FistaClassic)?;
    engine(problem, &schedule, opts)
}

/// Dispatches on the algorithm. `fb` is IFB with the `none` schedule.
pub fn run(problem: &ProblemInstance, kind: ScheduleKind, algorithm: Algorithm, opts: &SolverOptions) -> Result<Trace> {
    match algorithm {
        Algorithm::Ifb => run_ifb(problem, &Schedule::new(kind.resolve(problem)?)?, opts),
        Algorithm::Adapm => {
            let mut o = opts.clone();
            if o.modification == Modification::None {
                o.modification = Modification::Gradient;
            }
            run_ifb_adapm(problem, &Schedule::new(kind.resolve(problem)?)?, &o)
        }
        Algorithm::Restart => {
            let mut o = opts.clone();
            if o.restart == Restart::None {
                o.restart = Restart::Adaptive;
            }
            run_fista_restart(problem, &o)
        }
        Algorithm::Fb => run_ifb(problem, &Schedule::new(ScheduleKind::NoInertia)?, opts),
    }
}

fn engine(problem: &ProblemInstance, schedule: &Schedule, opts: &SolverOptions) -> Result<Trace> {
    opts.validate()?;
    let n = problem.dimension();
    let lambda = opts.mu / problem.lipschitz();
    let termination = match opts.termination {
        Some(t) => t,
        None if problem.nonsmooth().has_subdifferential() => Termination::Subgradient,
        None => Termination::Residual,
    };
    if termination == Termination::Subgradient && !problem.nonsmooth().has_subdifferential() {
        return Err(Error::Unsupported("subgradient termination needs an ℓ₁, box or zero regularizer".into()));
    }
    let x0 = match &opts.x0 {
        Some(x) if x.len() != n => {
            return Err(Error::invalid(format!("x0 has length {} but the problem has dimension {n}", x.len())))
        }
        Some(x) if !all_finite(x) => return Err(Error::invalid("x0 must be finite")),
        Some(x) => x.clone(),
        None => vec![0.0; n],
    };
    let mut schedule = schedule.clone();
    let zeroing = match (opts.modification, opts.restart.adaptive()) {
        (Modification::None, true) => Modification::Gradient,
        (m, _) => m,
    };

    let start = Instant::now();
    let mut ws = Workspace::new(n);
    let measure = |ws: &mut Workspace, x: &[f64]| -> Result<f64> {
        problem.smooth_gradient_into(x, &mut ws.grad);
        match termination {
            Termination::Subgradient => {
                let v = min_norm_from_gradient(problem, x, ws.grad.clone())?;
                Ok(dot(&v, &v).sqrt())
            }
            Termination::Residual => {
                for i in 0..x.len() {
                    ws.fwd[i] = x[i] - lambda * ws.grad[i];
                }
                problem.prox_into(&ws.fwd, lambda, &mut ws.tmp);
                Ok(dist(x, &ws.tmp) / lambda)
            }
        }
    };

    let mut x_prev = x0.clone();
    let mut y = x0;
    let mut x = vec![0.0; n];
    let f0 = problem.objective(&x_prev);
    let r0 = measure(&mut ws, &x_prev)?;
    let mut records = vec![IterateRecord {
        k: 0,
        objective: f0,
        residual: r0,
        gamma: 0.0,
        step_len: 0.0,
        modified: false,
        wall_nanos: start.elapsed().as_nanos() as u64,
        y_gap: 0.0,
    }];
    let mut trace = Trace {
        records: Vec::new(),
        final_x: Vec::new(),
        status: Status::MaxIter,
        lambda,
        termination,
        f_star: None,
        max_descent_violation: opts.monitors.descent.then_some(0.0),
        descent_violations: 0,
    };
    if !(f0.is_finite() && r0.is_finite()) {
        return Err(Error::invalid("objective or termination measure is not finite at x0"));
    }
    if r0 < opts.tol {
        trace.status = Status::Converged;
        trace.records = records;
        trace.final_x = x_prev;
        return Ok(trace);
    }

    let mut f_prev = f0;
    // Schedule index; differs from k only after a restart.
    let mut j: u64 = 1;
    for k in 1..=opts.max_iter {
        if fb_step(problem, &y, lambda, &mut ws.grad, &mut x).is_err() || !all_finite(&x) {
            trace.status = Status::NumericFailure;
            break;
        }
        let f = problem.objective(&x);
        let r = match measure(&mut ws, &x) {
            Ok(r) if r.is_finite() && f.is_finite() => r,
            _ => {
                trace.status = Status::NumericFailure;
                break;
            }
        };
        let step_sq = dist_sq(&x, &x_prev);
        let y_gap_sq = dist_sq(&x, &y);
        if opts.monitors.descent {
            let v = monitor::descent_violation(f_prev, f, step_sq, dist_sq(&y, &x_prev), y_gap_sq, lambda, opts.mu);
            if let Some(m) = trace.max_descent_violation.as_mut() {
                *m = m.max(v);
            }
            if descent_violation_significant(v, f) {
                trace.descent_violations += 1;
            }
        }

        let fired = match zeroing {
            Modification::None => false,
            m => {
                let grad_test = || {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += (y[i] - x[i]) * (x[i] - x_prev[i]);
                    }
                    s > 0.0
                };
                let fun_test = || f > f_prev;
                match m {
                    Modification::Gradient => grad_test(),
                    Modification::Function => fun_test(),
                    _ => grad_test() || fun_test(),
                }
            }
        };
        let restart_now = match opts.restart {
            Restart::None => false,
            r => (r.adaptive() && fired) || r.period().is_some_and(|p| k % p == 0),
        };
        let (gamma, modified) = if restart_now {
            j = 1;
            (schedule.gamma(1), true)
        } else if opts.restart == Restart::None && fired {
            (0.0, true)
        } else {
            (schedule.gamma(j), false)
        };
        j += 1;

        for i in 0..n {
            y[i] = x[i] + gamma * (x[i] - x_prev[i]);
        }
        records.push(IterateRecord {
            k,
            objective: f,
            residual: r,
            gamma,
            step_len: step_sq.sqrt(),
            modified,
            wall_nanos: start.elapsed().as_nanos() as u64,
            y_gap: y_gap_sq.sqrt(),
        });
        std::mem::swap(&mut x_prev, &mut x);
        f_prev = f;
        if r < opts.tol {
            trace.status = Status::Converged;
            break;
        }
    }
    trace.records = records;
    trace.final_x = x_prev;
    Ok(trace)
}

struct Workspace {
    grad: Vec<f64>,
    fwd: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            grad: vec![0.0; n],
            fwd: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_lasso, DenseMatrix, FnSmooth};
    use crate::prox::Regularizer;

    fn half_square() -> ProblemInstance {
        let smooth = FnSmooth::new(1, |x| 0.5 * x[0] * x[0], |x, g| g[0] = x[0]);
        ProblemInstance::new(smooth, Regularizer::Zero, 1.0).unwrap()
    }

    #[test]
    fn no_inertia_contracts_geometrically() {
        let p = half_square();
        let opts = SolverOptions {
            x0: Some(vec![1.0]),
            max_iter: 5,
            tol: 1e-300,
            ..SolverOptions::default()
        }
        .with_monitors();
        let t = run_ifb(&p, &Schedule::new(ScheduleKind::NoInertia).unwrap(), &opts).unwrap();
        assert_eq!(t.status, Status::MaxIter);
        assert_eq!(t.records.len(), 6);
        let mut x = 1.0f64;
        for r in &t.records[1..] {
            x *= 0.02;
            assert!((r.objective - 0.5 * x * x).abs() <= 1e-13 * x * x);
        }
        assert!((t.final_x[0] / 0.02f64.powi(5) - 1.0).abs() < 1e-13);
        assert_eq!(t.descent_violations, 0);
    }

    #[test]
    fn minimizer_start_converges_immediately() {
        let p = make_lasso(DenseMatrix::identity(2).into(), vec![0.0, 0.0], 1.0).unwrap();
        let t = run_ifb(&p, &Schedule::new(ScheduleKind::FistaClassic).unwrap(), &SolverOptions::default()).unwrap();
        assert_eq!(t.status, Status::Converged);
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.iterations(), 0);
    }

    #[test]
    fn options_validation() {
        let p = half_square();
        let s = Schedule::new(ScheduleKind::FistaClassic).unwrap();
        for mu in [0.0, 1.0, 1.5] {
            let o = SolverOptions { mu, ..SolverOptions::default() };
            assert!(run_ifb(&p, &s, &o).is_err());
        }
        let o = SolverOptions { x0: Some(vec![1.0, 2.0]), ..SolverOptions::default() };
        assert!(run_ifb(&p, &s, &o).is_err());
        assert!(run_ifb_adapm(&p, &s, &SolverOptions::default()).is_err());
        assert!(run_fista_restart(&p, &SolverOptions::default()).is_err());
    }

    #[test]
    fn grammar() {
        for s in ["none", "fixed:50", "adaptive", "fixed_adaptive:200"] {
            assert_eq!(s.parse::<Restart>().unwrap().to_string(), s);
        }
        assert!("fixed:0".parse::<Restart>().is_err());
        assert_eq!("fb".parse::<Algorithm>().unwrap(), Algorithm::Fb);
        assert!("sgd".parse::<Algorithm>().is_err());
    }

    #[test]
    fn numeric_failure_keeps_partial_trace() {
        let smooth = FnSmooth::new(1, |x| x[0] * x[0], |x, g| g[0] = if x[0].abs() < 0.5 { f64::NAN } else { x[0] });
        let p = ProblemInstance::new(smooth, Regularizer::Zero, 1.0).unwrap();
        let o = SolverOptions { x0: Some(vec![1.0]), ..SolverOptions::default() };
        let t = run_ifb(&p, &Schedule::new(ScheduleKind::NoInertia).unwrap(), &o).unwrap();
        assert_eq!(t.status, Status::NumericFailure);
        assert!(!t.records.is_empty());
    }
}
