//! Concrete composite problems `F = f + g`: LASSO, ℓ₁-regularized logistic
//! regression and box-constrained strongly convex quadratics.

mod generate;
mod matrix;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use generate::{
    gen_lasso_data, gen_lasso_instance, gen_logistic_data, gen_qp_data, gen_qp_instance,
    LogisticGenParams,
};
pub use matrix::{
    estimate_lambda_min, estimate_lipschitz, power_iteration, CsrMatrix, DenseMatrix,
    DesignMatrix, LipschitzMode, POWER_ITERATION_CAP,
};

use crate::error::{Error, Result};
use crate::prox::Regularizer;
use crate::vecops::{dist, dot};

/// The smooth convex part `f` of the composite objective.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `∇f(x)` into `out`.
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

/// `f(x) = ½‖Ax − b‖²`
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: DesignMatrix,
    b: Vec<f64>,
}

impl LeastSquares {
    pub fn new(a: DesignMatrix, b: Vec<f64>) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::invalid(format!(
                "A has {} rows but b has length {}",
                a.rows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.a.rows()];
        self.a.matvec(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = self.residual(x);
        self.a.matvec_t(&r, out);
    }
}

/// Average logistic loss `(1/N) Σ log(1 + exp(−lᵢ⟨hᵢ, x⟩))`.
#[derive(Debug, Clone)]
pub struct Logistic {
    features: DesignMatrix,
    labels: Vec<f64>,
}

/// `log(1 + eᶻ)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.features.rows()];
        self.features.matvec(x, &mut z);
        for (zi, li) in z.iter_mut().zip(&self.labels) {
            *zi *= -li;
        }
        z
    }
}

impl SmoothFunction for Logistic {
    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let z = self.margins(x);
        z.iter().map(|&zi| softplus(zi)).sum::<f64>() / z.len() as f64
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = self.labels.len() as f64;
        let w: Vec<f64> = self
            .margins(x)
            .iter()
            .zip(&self.labels)
            .map(|(&zi, li)| -li * sigmoid(zi) / n)
            .collect();
        self.features.matvec_t(&w, out);
    }
}

/// `f(x) = ½xᵀAx + bᵀx` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DesignMatrix,
    b: Vec<f64>,
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.a.matvec(x, &mut ax);
        0.5 * dot(x, &ax) + dot(&self.b, x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.a.matvec(x, out);
        for (o, bi) in out.iter_mut().zip(&self.b) {
            *o += bi;
        }
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A smooth part given by closures. Handy for one-off test problems.
pub struct FnSmooth {
    dim: usize,
    value: Box<ValueFn>,
    grad: Box<GradFn>,
}

impl FnSmooth {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            grad: Box::new(grad),
        }
    }
}

impl fmt::Debug for FnSmooth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSmooth").field("dim", &self.dim).finish()
    }
}

impl SmoothFunction for FnSmooth {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }
}

/// An instance of `min f(x) + g(x)`: the smooth oracle, the nonsmooth part
/// with its prox, and the constants the solvers need.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    smooth: Arc<dyn SmoothFunction>,
    nonsmooth: Regularizer,
    lipschitz: f64,
    strong_convexity: Option<f64>,
}

impl ProblemInstance {
    pub fn new(
        smooth: impl SmoothFunction + 'static,
        nonsmooth: Regularizer,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::invalid(format!(
                "Lipschitz constant must be positive and finite, got {lipschitz}"
            )));
        }
        nonsmooth.check_dim(smooth.dim())?;
        Ok(Self {
            smooth: Arc::new(smooth),
            nonsmooth,
            lipschitz,
            strong_convexity: None,
        })
    }

    pub fn with_strong_convexity(mut self, mu_f: f64) -> Result<Self> {
        if !(mu_f.is_finite() && mu_f >= 0.0) {
            return Err(Error::invalid("strong convexity modulus must be nonnegative"));
        }
        self.strong_convexity = Some(mu_f);
        Ok(self)
    }

    /// Replaces the Lipschitz constant (e.g. with a looser bound).
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::invalid("Lipschitz constant must be positive"));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.smooth.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity
    }

    pub fn nonsmooth(&self) -> &Regularizer {
        &self.nonsmooth
    }

    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }

    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        self.smooth.value(x)
    }

    pub fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.smooth.gradient(x, &mut g);
        g
    }

    pub fn smooth_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.smooth.gradient(x, out)
    }

    pub fn nonsmooth_value(&self, x: &[f64]) -> f64 {
        self.nonsmooth.value(x)
    }

    /// `prox_{t·g}(v)`
    pub fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.nonsmooth.prox_into(v, t, &mut out);
        out
    }

    pub fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]) {
        self.nonsmooth.prox_into(v, t, out)
    }

    /// `F(x) = f(x) + g(x)`
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.nonsmooth.value(x)
    }
}

/// `½‖Ax − b‖² + δ‖x‖₁` with `L_f = λ_max(AᵀA)`.
pub fn make_lasso(a: DesignMatrix, b: Vec<f64>, delta: f64) -> Result<ProblemInstance> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let lf = estimate_lipschitz(&a, LipschitzMode::Gram)?;
    let smooth = LeastSquares::new(a, b)?;
    ProblemInstance::new(smooth, Regularizer::L1 { weight: delta }, lf)
}

/// Lipschitz constant used for the logistic loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogisticLipschitz {
    /// `(4/N)·‖KᵀK‖`, the constant used in the original experiments.
    #[default]
    Conservative,
    /// `‖KᵀK‖/(4N)`, the textbook bound (σ' ≤ 1/4).
    Standard,
}

/// ℓ₁-regularized logistic regression over `N` samples (rows of `features`).
pub fn make_logistic(
    features: DesignMatrix,
    labels: Vec<f64>,
    delta: f64,
    constant: LogisticLipschitz,
) -> Result<ProblemInstance> {
    if features.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
        return Err(Error::invalid(format!("label {bad} is not ±1")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    // KᵀK = HᵀH because every lᵢ² = 1.
    let gram = estimate_lipschitz(&features, LipschitzMode::Gram)?;
    let n = labels.len() as f64;
    let lf = match constant {
        LogisticLipschitz::Conservative => 4.0 * gram / n,
        LogisticLipschitz::Standard => gram / (4.0 * n),
    };
    let smooth = Logistic { features, labels };
    ProblemInstance::new(smooth, Regularizer::L1 { weight: delta }, lf)
}

/// `½xᵀAx + bᵀx` over the box `[lo, hi]`, with `L_f = λ_max(A)` and
/// `μ_f = λ_min(A)`.
pub fn make_box_qp(
    a: DesignMatrix,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
) -> Result<ProblemInstance> {
    let mu = None;
    make_box_qp_inner(a, b, lo, hi, mu)
}

pub(crate) fn make_box_qp_inner(
    a: DesignMatrix,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    known_mu: Option<f64>,
) -> Result<ProblemInstance> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(Error::invalid("A must be square and match b"));
    }
    if a.to_dense().asymmetry() > 1e-10 {
        return Err(Error::invalid("A is not symmetric"));
    }
    let lf = estimate_lipschitz(&a, LipschitzMode::Symmetric)?;
    let mu = match known_mu {
        Some(mu) => mu,
        None => estimate_lambda_min(&a)?,
    };
    let reg = Regularizer::boxed(lo, hi)?;
    let smooth = Quadratic { a, b };
    ProblemInstance::new(smooth, reg, lf)?.with_strong_convexity(mu)
}

/// Serializable description of a problem instance, used for the instance
/// files written by `gen` and read by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceData {
    Lasso {
        a: DesignMatrix,
        b: Vec<f64>,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        planted: Option<Vec<f64>>,
    },
    Logistic {
        features: DesignMatrix,
        labels: Vec<f64>,
        delta: f64,
        #[serde(default)]
        lipschitz: LogisticLipschitz,
    },
    BoxQp {
        a: DesignMatrix,
        b: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strong_convexity: Option<f64>,
    },
}

impl InstanceData {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self.clone() {
            InstanceData::Lasso { a, b, delta, .. } => make_lasso(a, b, delta),
            InstanceData::Logistic {
                features,
                labels,
                delta,
                lipschitz,
            } => make_logistic(features, labels, delta, lipschitz),
            InstanceData::BoxQp {
                a,
                b,
                lo,
                hi,
                strong_convexity,
            } => make_box_qp_inner(a, b, lo, hi, strong_convexity),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            InstanceData::Lasso { .. } => "lasso",
            InstanceData::Logistic { .. } => "logistic",
            InstanceData::BoxQp { .. } => "qp",
        }
    }
}

/// Result of sampling the instance invariants.
#[derive(Debug, Clone, Copy)]
pub struct InstanceCheck {
    /// max over sampled pairs of `‖∇f(u) − ∇f(v)‖ / (L_f‖u − v‖)`
    pub lipschitz_ratio: f64,
    /// max over samples of `f(θu + (1−θ)v) − θf(u) − (1−θ)f(v)`
    pub convexity_excess: f64,
}

impl InstanceCheck {
    pub fn passes(&self) -> bool {
        self.lipschitz_ratio <= 1.0 + 1e-8 && self.convexity_excess <= 1e-10
    }
}

/// Samples random pairs around the origin to check that `∇f` is
/// `L_f`-Lipschitz and that `f` is convex along segments.
pub fn check_instance(
    problem: &ProblemInstance,
    samples: usize,
    scale: f64,
    seed: u64,
) -> InstanceCheck {
    let n = problem.dimension();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut lipschitz_ratio: f64 = 0.0;
    let mut convexity_excess = f64::NEG_INFINITY;
    for _ in 0..samples {
        let u: Vec<f64> = (0..n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let v: Vec<f64> = (0..n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = dist(&u, &v);
        if d > 0.0 {
            let gd = dist(&problem.smooth_gradient(&u), &problem.smooth_gradient(&v));
            lipschitz_ratio = lipschitz_ratio.max(gd / (problem.lipschitz() * d));
        }
        let theta: f64 = rng.random();
        let mid: Vec<f64> = u
            .iter()
            .zip(&v)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        let fu = problem.smooth_value(&u);
        let fv = problem.smooth_value(&v);
        let fm = problem.smooth_value(&mid);
        // relative slack for rounding in large values
        let excess = fm - theta * fu - (1.0 - theta) * fv;
        let scale_f = 1.0 + fu.abs().max(fv.abs());
        convexity_excess = convexity_excess.max(excess / scale_f);
    }
    InstanceCheck {
        lipschitz_ratio,
        convexity_excess,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(p: &ProblemInstance, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (p.smooth_value(&xp) - p.smooth_value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        dist(a, b) / crate::vecops::norm(b).max(1e-12)
    }

    fn gaussian(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn lasso_identity_instance() {
        let p = make_lasso(DenseMatrix::identity(2).into(), vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(p.objective(&[0.0, 0.0]), 0.0);
        assert_eq!(p.smooth_gradient(&[0.3, -2.0]), vec![0.3, -2.0]);
        assert!((p.lipschitz() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lasso_dimension_mismatch() {
        let r = make_lasso(DenseMatrix::identity(2).into(), vec![0.0; 3], 1.0);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn lasso_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let a = DenseMatrix::new(10, 20, gaussian(&mut rng, 200)).unwrap();
        let p = make_lasso(a.into(), gaussian(&mut rng, 10), 1.0).unwrap();
        let x = gaussian(&mut rng, 20);
        assert!(rel_err(&p.smooth_gradient(&x), &central_diff(&p, &x, 1e-5)) <= 1e-6);
    }

    #[test]
    fn logistic_at_origin_is_log2() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let h = DenseMatrix::new(5, 3, gaussian(&mut rng, 15)).unwrap();
        let labels = vec![1.0, -1.0, 1.0, 1.0, -1.0];
        let p = make_logistic(h.into(), labels, 0.01, LogisticLipschitz::Conservative).unwrap();
        assert!((p.smooth_value(&[0.0; 3]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_single_sample_gradient() {
        let h = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let p = make_logistic(h.into(), vec![1.0], 0.01, LogisticLipschitz::Standard).unwrap();
        for x in [-3.0, -0.5, 0.0, 0.7, 40.0] {
            let g = p.smooth_gradient(&[x])[0];
            assert!((g + 1.0 / (1.0 + f64::exp(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let h = DenseMatrix::new(30, 10, gaussian(&mut rng, 300)).unwrap();
        let labels = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let p = make_logistic(h.into(), labels, 0.01, LogisticLipschitz::Conservative).unwrap();
        let x = gaussian(&mut rng, 10);
        assert!(rel_err(&p.smooth_gradient(&x), &central_diff(&p, &x, 1e-5)) <= 1e-6);
    }

    #[test]
    fn logistic_rejects_bad_labels() {
        let h = DenseMatrix::identity(2);
        let r = make_logistic(h.into(), vec![1.0, 0.0], 0.1, LogisticLipschitz::Conservative);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn logistic_value_bounded_for_huge_arguments() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| gaussian(&mut rng, 4)).collect();
        let h = DenseMatrix::from_rows(&rows).unwrap();
        let labels = vec![1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let p = make_logistic(h.into(), labels, 0.1, LogisticLipschitz::Conservative).unwrap();
        for scale in [1.0, 1e3, 1e8, 1e300] {
            let x: Vec<f64> = gaussian(&mut rng, 4).iter().map(|v| v * scale).collect();
            let v = p.smooth_value(&x);
            let bound = rows
                .iter()
                .map(|r| dot(r, &x).abs())
                .fold(0.0, f64::max)
                + 2f64.ln();
            assert!(v.is_finite(), "scale {scale}");
            assert!(v <= bound * (1.0 + 1e-12), "{v} > {bound}");
        }
    }

    #[test]
    fn box_qp_rejects_asymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let r = make_box_qp(a.into(), vec![0.0; 2], vec![-1.0; 2], vec![1.0; 2]);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn box_qp_gradient_and_constants() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = make_box_qp(a.into(), vec![1.0, -1.0], vec![-1.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(p.smooth_gradient(&[1.0, 1.0]), vec![3.5, 0.5]);
        // eigenvalues (3 ± √2)/2
        let lmax = (3.0 + 2f64.sqrt()) / 2.0;
        let lmin = (3.0 - 2f64.sqrt()) / 2.0;
        assert!((p.lipschitz() - lmax).abs() < 1e-8);
        assert!((p.strong_convexity().unwrap() - lmin).abs() < 1e-6);
    }

    #[test]
    fn lasso_is_coercive_along_rays() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let a = DenseMatrix::new(5, 12, gaussian(&mut rng, 60)).unwrap();
        let p = make_lasso(a.into(), gaussian(&mut rng, 5), 1.0).unwrap();
        for _ in 0..20 {
            let base = gaussian(&mut rng, 12);
            let dir = gaussian(&mut rng, 12);
            let f0 = p.objective(&base);
            let far: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + 1e4 * d).collect();
            assert!(p.objective(&far) > f0);
        }
    }

    #[test]
    fn instance_data_json_roundtrip() {
        let data = gen_lasso_data(6, 9, 2, 3).unwrap();
        let text = serde_json::to_string(&data).unwrap();
        let back: InstanceData = serde_json::from_str(&text).unwrap();
        assert_eq!(data, back);
    }
}
