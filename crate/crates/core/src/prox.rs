//! Proximal operators, the forward-backward map `T_λ(x) = prox_{λg}(x − λ∇f(x))`
//! and the optimality measures built on it.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::vecops::{all_finite, dist, norm};

/// A user-supplied nonsmooth part.
pub trait ProxOperator: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `prox_{t·g}(v)` into `out`.
    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]);
}

/// The nonsmooth part `g`.
#[derive(Debug, Clone)]
pub enum Regularizer {
    /// `g ≡ 0`
    Zero,
    /// `g = weight·‖x‖₁`
    L1 { weight: f64 },
    /// Indicator of `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Custom(Arc<dyn ProxOperator>),
}

impl Regularizer {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_bounds(&lo, &hi)?;
        Ok(Regularizer::Box { lo, hi })
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            Regularizer::Box { lo, hi } if lo.len() != n || hi.len() != n => Err(Error::invalid(
                format!("box has dimension {} but problem has {n}", lo.len()),
            )),
            Regularizer::L1 { weight } if !(weight.is_finite() && *weight >= 0.0) => {
                Err(Error::invalid("ℓ₁ weight must be nonnegative"))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Box { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (l, h))| *l <= *v && *v <= *h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Custom(op) => op.value(x),
        }
    }

    /// `out ← prox_{t·g}(v)`
    pub fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]) {
        match self {
            Regularizer::Zero => out.copy_from_slice(v),
            Regularizer::L1 { weight } => {
                let thr = t * weight;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = shrink(*vi, thr);
                }
            }
            Regularizer::Box { lo, hi } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = v[i].max(lo[i]).min(hi[i]);
                }
            }
            Regularizer::Custom(op) => op.prox(v, t, out),
        }
    }

    /// Whether [`min_norm_subgradient`] knows this regularizer's subdifferential.
    pub fn has_subdifferential(&self) -> bool {
        !matches!(self, Regularizer::Custom(_))
    }
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    // sign(v)·max(|v| − t, 0), keeping exact zeros positive
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_bounds(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.len() != hi.len() {
        return Err(Error::invalid("lower and upper bounds differ in length"));
    }
    for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
        if l.is_nan() || h.is_nan() || l > h {
            return Err(Error::invalid(format!("bound {i}: lo = {l} exceeds hi = {h}")));
        }
    }
    Ok(())
}

/// `prox` of `t·‖·‖₁`: componentwise `sign(xᵢ)·max(|xᵢ| − t, 0)`.
pub fn soft_threshold(x: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("threshold must be finite and ≥ 0, got {t}")));
    }
    if !all_finite(x) {
        return Err(Error::invalid("soft_threshold input must be finite"));
    }
    Ok(x.iter().map(|&v| shrink(v, t)).collect())
}

/// Euclidean projection onto `[lo, hi]`.
pub fn project_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    check_bounds(lo, hi)?;
    if x.len() != lo.len() {
        return Err(Error::invalid("point and bounds differ in length"));
    }
    Ok(x
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.max(*l).min(*h))
        .collect())
}

/// Image of a point under `T_λ`, with the length of the move.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub point: Vec<f64>,
    /// `‖x − T_λ(x)‖`
    pub residual_norm: f64,
}

/// `T_λ(x) = prox_{λg}(x − λ∇f(x))`.
pub fn forward_backward_map(problem: &ProblemInstance, x: &[f64], lambda: f64) -> Result<ProxResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("step λ must be positive, got {lambda}")));
    }
    if x.len() != problem.dimension() {
        return Err(Error::invalid("point has the wrong dimension"));
    }
    let mut point = vec![0.0; x.len()];
    let mut scratch = vec![0.0; x.len()];
    fb_step(problem, x, lambda, &mut scratch, &mut point)?;
    let residual_norm = dist(x, &point);
    Ok(ProxResult {
        point,
        residual_norm,
    })
}

/// In-place forward-backward step used by the solvers. `grad` receives
/// `∇f(x)`, `out` receives `T_λ(x)`.
pub(crate) fn fb_step(
    problem: &ProblemInstance,
    x: &[f64],
    lambda: f64,
    grad: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    problem.smooth_gradient_into(x, grad);
    if !all_finite(grad) {
        return Err(Error::numeric("gradient is not finite"));
    }
    for ((o, xi), gi) in out.iter_mut().zip(x).zip(grad.iter()) {
        *o = xi - lambda * gi;
    }
    let fwd = out.to_vec();
    problem.prox_into(&fwd, lambda, out);
    Ok(())
}

/// Minimum-norm element of `∂F(x) = ∇f(x) + ∂g(x)` and its norm.
///
/// Supported for `g ≡ 0`, `g = δ‖·‖₁` and box indicators. For the box the
/// point must be feasible, since `∂F` is empty outside it.
pub fn min_norm_subgradient(problem: &ProblemInstance, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let grad = problem.smooth_gradient(x);
    let v = min_norm_from_gradient(problem, x, grad)?;
    let n = norm(&v);
    Ok((v, n))
}

pub(crate) fn min_norm_from_gradient(
    problem: &ProblemInstance,
    x: &[f64],
    mut grad: Vec<f64>,
) -> Result<Vec<f64>> {
    match problem.nonsmooth() {
        Regularizer::Zero => {}
        Regularizer::L1 { weight } => {
            for (gi, xi) in grad.iter_mut().zip(x) {
                *gi = if *xi > 0.0 {
                    *gi + weight
                } else if *xi < 0.0 {
                    *gi - weight
                } else {
                    shrink(*gi, *weight)
                };
            }
        }
        Regularizer::Box { lo, hi } => {
            for (i, gi) in grad.iter_mut().enumerate() {
                let (xi, l, h) = (x[i], lo[i], hi[i]);
                if xi < l || xi > h {
                    return Err(Error::invalid(format!(
                        "component {i} = {xi} lies outside [{l}, {h}]"
                    )));
                }
                // Normal cone: (−∞,0] at lo, [0,∞) at hi, ℝ when lo = hi.
                let at_lo = xi == l;
                let at_hi = xi == h;
                if (at_lo && *gi >= 0.0) || (at_hi && *gi <= 0.0) {
                    *gi = 0.0;
                }
            }
        }
        Regularizer::Custom(_) => {
            return Err(Error::Unsupported(
                "min-norm subgradient needs an ℓ₁, box or zero regularizer".into(),
            ))
        }
    }
    Ok(grad)
}

/// The termination measure used when no subdifferential is available:
/// `(1/λ)‖x − T_λ(x)‖`.
pub fn scaled_residual(problem: &ProblemInstance, x: &[f64], lambda: f64) -> Result<f64> {
    Ok(forward_backward_map(problem, x, lambda)?.residual_norm / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_lasso, DenseMatrix, FnSmooth};

    fn quad_1d(reg: Regularizer) -> ProblemInstance {
        let smooth = FnSmooth::new(1, |x| 0.5 * x[0] * x[0], |x, g| g[0] = x[0]);
        ProblemInstance::new(smooth, reg, 1.0).unwrap()
    }

    /// argmin_u t|u| + ½(u − x)² over a uniform grid.
    fn grid_soft_threshold(x: f64, t: f64) -> f64 {
        let (lo, hi, steps) = (-10.0, 10.0, 2_000_000);
        let h = (hi - lo) / steps as f64;
        (0..=steps)
            .map(|i| lo + i as f64 * h)
            .map(|u| (u, t * u.abs() + 0.5 * (u - x) * (u - x)))
            .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
            .0
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[3.0, -0.5, 0.0], 1.0).unwrap(), vec![2.0, 0.0, 0.0]);
        let x = [1.5, -2.25, 0.0, 7.0];
        assert_eq!(soft_threshold(&x, 0.0).unwrap(), x.to_vec());
        assert_eq!(soft_threshold(&[0.9], 0.9).unwrap(), vec![0.0]);
    }

    #[test]
    fn soft_threshold_matches_grid_search() {
        for &(x, t) in &[(0.9, 0.9), (2.3, 0.4), (-1.7, 0.25), (0.1, 3.0), (-6.0, 1.5)] {
            let got = soft_threshold(&[x], t).unwrap()[0];
            assert!((got - grid_soft_threshold(x, t)).abs() <= 1e-5, "x={x} t={t}");
        }
    }

    #[test]
    fn soft_threshold_errors() {
        assert!(soft_threshold(&[1.0], -0.1).is_err());
        assert!(soft_threshold(&[f64::NAN], 0.1).is_err());
        assert!(soft_threshold(&[f64::INFINITY], 0.1).is_err());
    }

    #[test]
    fn project_box_examples() {
        let lo = [-1.0; 3];
        let hi = [1.0; 3];
        assert_eq!(project_box(&[2.0, -3.0, 0.5], &lo, &hi).unwrap(), vec![1.0, -1.0, 0.5]);
        assert_eq!(project_box(&[0.2, -0.3, 0.9], &lo, &hi).unwrap(), vec![0.2, -0.3, 0.9]);
        let c = [0.7; 3];
        assert_eq!(project_box(&[5.0, -5.0, 0.0], &c, &c).unwrap(), vec![0.7; 3]);
        assert!(project_box(&[0.0], &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn fb_map_without_regularizer_is_gradient_step() {
        let smooth = FnSmooth::new(
            2,
            |x| 0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1]),
            |x, g| {
                g[0] = x[0];
                g[1] = 4.0 * x[1];
            },
        );
        let q = ProblemInstance::new(smooth, Regularizer::Zero, 4.0).unwrap();
        let r = forward_backward_map(&q, &[1.0, 1.0], 0.1).unwrap();
        assert_eq!(r.point, vec![0.9, 0.6]);
        assert!((r.residual_norm - (0.01f64 + 0.16).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fb_map_fixed_point_at_minimizer() {
        let p = make_lasso(DenseMatrix::identity(2).into(), vec![0.0, 0.0], 1.0).unwrap();
        let r = forward_backward_map(&p, &[0.0, 0.0], 0.7).unwrap();
        assert_eq!(r.point, vec![0.0, 0.0]);
        assert_eq!(r.residual_norm, 0.0);
    }

    #[test]
    fn fb_map_one_dimensional_lasso() {
        let p = quad_1d(Regularizer::L1 { weight: 1.0 });
        let r = forward_backward_map(&p, &[2.0], 0.5).unwrap();
        assert_eq!(r.point, vec![0.5]);
        // brute force: argmin_u |u| + (1/2λ)(u − (x − λx))²
        let (x, lam) = (2.0, 0.5);
        let v = x - lam * x;
        let grid = grid_soft_threshold(v, lam);
        assert!((r.point[0] - grid).abs() < 1e-5);
    }

    #[test]
    fn fb_map_rejects_bad_step() {
        let p = quad_1d(Regularizer::Zero);
        assert!(forward_backward_map(&p, &[1.0], 0.0).is_err());
        assert!(forward_backward_map(&p, &[1.0], -1.0).is_err());
    }

    #[test]
    fn fb_map_reports_non_finite_gradient() {
        let smooth = FnSmooth::new(1, |_| 0.0, |_, g| g[0] = f64::NAN);
        let p = ProblemInstance::new(smooth, Regularizer::Zero, 1.0).unwrap();
        assert!(matches!(
            forward_backward_map(&p, &[1.0], 0.5),
            Err(Error::NumericFailure { .. })
        ));
    }

    #[test]
    fn min_norm_subgradient_zero_at_minimizer() {
        let p = make_lasso(DenseMatrix::identity(2).into(), vec![0.0, 0.0], 1.0).unwrap();
        let (v, n) = min_norm_subgradient(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        assert_eq!(n, 0.0);
    }

    #[test]
    fn min_norm_subgradient_l1_components() {
        // f = ½(u − 0.5)² + ½(w − 3)², δ = 1 → ∇f(0, 0) = (−0.5, −3)
        let p = make_lasso(DenseMatrix::identity(2).into(), vec![0.5, 3.0], 1.0).unwrap();
        let (v, _) = min_norm_subgradient(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![0.0, -2.0]);
        let (v, _) = min_norm_subgradient(&p, &[1.0, -1.0]).unwrap();
        assert_eq!(v, vec![1.5, -5.0]);
    }

    #[test]
    fn min_norm_subgradient_box_components() {
        let smooth = FnSmooth::new(
            3,
            |x| x.iter().map(|v| 0.5 * (v - 2.0) * (v - 2.0)).sum(),
            |x, g| {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = xi - 2.0;
                }
            },
        );
        let reg = Regularizer::boxed(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let p = ProblemInstance::new(smooth, reg, 1.0).unwrap();
        // hi with negative gradient → cancelled; interior keeps ∇f; lo with ∇f < 0 stays
        let (v, _) = min_norm_subgradient(&p, &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(v, vec![0.0, -2.0, -3.0]);
        assert!(min_norm_subgradient(&p, &[1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn custom_regularizer_is_unsupported() {
        #[derive(Debug)]
        struct Half;
        impl ProxOperator for Half {
            fn value(&self, _: &[f64]) -> f64 {
                0.0
            }
            fn prox(&self, v: &[f64], _: f64, out: &mut [f64]) {
                out.copy_from_slice(v)
            }
        }
        let p = quad_1d(Regularizer::Custom(Arc::new(Half)));
        assert!(matches!(
            min_norm_subgradient(&p, &[1.0]),
            Err(Error::Unsupported(_))
        ));
        assert!(scaled_residual(&p, &[1.0], 0.5).unwrap() > 0.0);
    }
}
