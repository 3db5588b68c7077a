//! Seeded synthetic instance generators.
//!
//! All generators draw from a `ChaCha20Rng` seeded with `seed_from_u64`, so
//! the stream is portable across platforms. Gaussian draws use
//! `rand_distr::StandardNormal`. The draw order is part of the contract and
//! is documented per generator.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DenseMatrix, InstanceData, LogisticLipschitz, ProblemInstance};
use crate::error::{Error, Result};

fn normals(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// LASSO data with a planted `s`-sparse signal, `δ = 1`.
///
/// Draw order: `A` row-major (m·n normals), the support (`s` distinct
/// positions, sorted), the `s` support values in position order, then the
/// `m` noise entries. `b = A·x̂ + 0.5·ε`.
pub fn gen_lasso_data(m: usize, n: usize, s: usize, seed: u64) -> Result<InstanceData> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m and n must be positive"));
    }
    if s == 0 || s > n {
        return Err(Error::invalid(format!("sparsity s = {s} must lie in 1..={n}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let a = DenseMatrix::new(m, n, normals(&mut rng, m * n))?;
    let mut support = index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut planted = vec![0.0; n];
    for &i in &support {
        planted[i] = rng.sample(StandardNormal);
    }
    let eps = normals(&mut rng, m);
    let mut b = vec![0.0; m];
    let a: super::DesignMatrix = a.into();
    a.matvec(&planted, &mut b);
    for (bi, e) in b.iter_mut().zip(&eps) {
        *bi += 0.5 * e;
    }
    Ok(InstanceData::Lasso {
        a,
        b,
        delta: 1.0,
        planted: Some(planted),
    })
}

/// Builds the LASSO instance of [`gen_lasso_data`] and returns it with the
/// planted vector.
pub fn gen_lasso_instance(
    m: usize,
    n: usize,
    s: usize,
    seed: u64,
) -> Result<(ProblemInstance, Vec<f64>)> {
    let data = gen_lasso_data(m, n, s, seed)?;
    let problem = data.build()?;
    match data {
        InstanceData::Lasso { planted, .. } => Ok((problem, planted.unwrap_or_default())),
        _ => unreachable!(),
    }
}

/// Box-constrained QP data: `A = BᵀB + sI` with `B` of shape `(m/2)×m`,
/// `s ~ U[0,1)`, `b` Gaussian, box `[−1, 1]ᵐ`.
///
/// Draw order: `B` row-major, then `s`, then `b`.
pub fn gen_qp_data(m: usize, seed: u64) -> Result<InstanceData> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::invalid(format!("QP dimension must be even and positive, got {m}")));
    }
    let half = m / 2;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bmat = normals(&mut rng, half * m);
    let shift: f64 = rng.random();
    let b = normals(&mut rng, m);

    let mut a = vec![0.0; m * m];
    for r in 0..half {
        let row = &bmat[r * m..(r + 1) * m];
        for i in 0..m {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..m {
                a[i * m + j] += ri * row[j];
            }
        }
    }
    for i in 0..m {
        a[i * m + i] += shift;
        for j in 0..i {
            a[i * m + j] = a[j * m + i];
        }
    }
    // rank(BᵀB) ≤ m/2 < m, so the smallest eigenvalue of A is exactly the shift.
    Ok(InstanceData::BoxQp {
        a: DenseMatrix::new(m, m, a)?.into(),
        b,
        lo: vec![-1.0; m],
        hi: vec![1.0; m],
        strong_convexity: Some(shift),
    })
}

pub fn gen_qp_instance(m: usize, seed: u64) -> Result<ProblemInstance> {
    gen_qp_data(m, seed)?.build()
}

/// Parameters of the synthetic logistic-regression generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticGenParams {
    pub samples: usize,
    pub features: usize,
    /// Nonzeros of the planted weight vector.
    pub support: usize,
    /// Probability of flipping each label.
    pub flip: f64,
    pub delta: f64,
    pub lipschitz: LogisticLipschitz,
}

impl Default for LogisticGenParams {
    fn default() -> Self {
        Self {
            samples: 200,
            features: 60,
            support: 10,
            flip: 0.1,
            delta: 1e-2,
            lipschitz: LogisticLipschitz::Conservative,
        }
    }
}

/// Dense Gaussian features, labels `sign(⟨hᵢ, w⟩)` from a sparse planted
/// `w`, each flipped independently with probability `flip`.
///
/// Draw order: features row-major, support positions, support values, then
/// one uniform per sample for the flips.
pub fn gen_logistic_data(params: &LogisticGenParams, seed: u64) -> Result<InstanceData> {
    let LogisticGenParams {
        samples,
        features,
        support,
        flip,
        ..
    } = *params;
    if samples == 0 || features == 0 || support == 0 || support > features {
        return Err(Error::invalid("bad logistic generator sizes"));
    }
    if !(0.0..=0.5).contains(&flip) {
        return Err(Error::invalid("flip probability must lie in [0, 0.5]"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let h = DenseMatrix::new(samples, features, normals(&mut rng, samples * features))?;
    let mut pos = index::sample(&mut rng, features, support).into_vec();
    pos.sort_unstable();
    let mut w = vec![0.0; features];
    for &i in &pos {
        w[i] = rng.sample(StandardNormal);
    }
    let labels = (0..samples)
        .map(|i| {
            let margin = crate::vecops::dot(h.row(i), &w);
            let label = if margin >= 0.0 { 1.0 } else { -1.0 };
            let u: f64 = rng.random();
            if u < flip {
                -label
            } else {
                label
            }
        })
        .collect();
    Ok(InstanceData::Logistic {
        features: h.into(),
        labels,
        delta: params.delta,
        lipschitz: params.lipschitz,
    })
}
