//! Closed forms for logratio-uncorrelated (LU) compositions.
//!
//! An LU composition has uncorrelated logratios for every choice of four
//! distinct indices — the compositional analogue of linear independence.
//! Its covariance structure is fully determined by a positive variance
//! vector alpha (the diagonal of an uncorrelated basis covariance): the
//! ALR covariance has alpha_D on every off-diagonal and alpha_i + alpha_D
//! on the diagonal. Determinant, inverse, and partial correlations all have
//! closed forms, and the partial correlation quantifies the spurious signal
//! induced purely by the closure.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;

use crate::covariance::{CovMatrix, PartialCorrMatrix, Representation};
use crate::error::{Error, Result};

/// Positive per-part variance vector of an LU composition (D >= 3 entries).
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    values: Vec<f64>,
}

impl AlphaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::DimensionTooSmall {
                required: 3,
                got: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if value <= 0.0 || !value.is_finite() {
                return Err(Error::NonPositiveAlpha { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn d(&self) -> usize {
        self.values.len()
    }
}

/// ALR covariance structure of an LU composition with variance vector
/// `alpha` (reference part D): diagonal alpha_i + alpha_D, off-diagonal
/// alpha_D. No positivity requirement; shrinkage targets may carry
/// nonpositive implied alphas.
pub(crate) fn lu_sigma_raw(alpha: &[f64]) -> DMatrix<f64> {
    let d = alpha.len();
    let last = alpha[d - 1];
    DMatrix::from_fn(
        d - 1,
        d - 1,
        |i, j| {
            if i == j { alpha[i] + last } else { last }
        },
    )
}

/// CLR covariance structure of an LU composition: diagonal
/// alpha_i - (2 alpha_i - mean(alpha)) / D, off-diagonal
/// -(alpha_i + alpha_j - mean(alpha)) / D.
pub(crate) fn lu_gamma_raw(alpha: &[f64]) -> DMatrix<f64> {
    let d = alpha.len();
    let df = d as f64;
    let mean: f64 = alpha.iter().sum::<f64>() / df;
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            alpha[i] - (2.0 * alpha[i] - mean) / df
        } else {
            -(alpha[i] + alpha[j] - mean) / df
        }
    })
}

/// ALR covariance of an LU composition (reference part D).
pub fn lu_sigma(alpha: &AlphaVector) -> CovMatrix {
    CovMatrix::new(
        lu_sigma_raw(alpha.values()),
        Representation::Alr {
            ref_index: alpha.d(),
        },
    )
    .expect("LU sigma is symmetric by construction")
}

/// CLR covariance of an LU composition.
pub fn lu_gamma(alpha: &AlphaVector) -> CovMatrix {
    CovMatrix::new(lu_gamma_raw(alpha.values()), Representation::Clr)
        .expect("LU gamma is symmetric by construction")
}

/// Determinant of the LU ALR covariance: the sum over i of the products of
/// all alphas but alpha_i, evaluated with prefix/suffix products (no
/// division, so tiny alphas are safe).
pub fn lu_determinant(alpha: &AlphaVector) -> f64 {
    let a = alpha.values();
    let d = a.len();
    let mut prefix = vec![1.0f64; d + 1];
    for i in 0..d {
        prefix[i + 1] = prefix[i] * a[i];
    }
    let mut suffix = vec![1.0f64; d + 1];
    for i in (0..d).rev() {
        suffix[i] = suffix[i + 1] * a[i];
    }
    (0..d).map(|i| prefix[i] * suffix[i + 1]).sum()
}

/// Closed-form inverse of the LU ALR covariance.
///
/// With A = sum of the reciprocal alphas, the elements reduce to
/// (A - 1/alpha_i) / (alpha_i A) on the diagonal and -1/(alpha_i alpha_j A)
/// off it — the leave-one-out-product form divided through by the full
/// product, which avoids overflow for large D.
pub fn lu_sigma_inverse(alpha: &AlphaVector) -> DMatrix<f64> {
    let a = alpha.values();
    let d = a.len();
    let inv: Vec<f64> = a.iter().map(|&v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    DMatrix::from_fn(d - 1, d - 1, |i, j| {
        if i == j {
            inv[i] * (total - inv[i]) / total
        } else {
            -inv[i] * inv[j] / total
        }
    })
}

/// Closure-induced partial correlations of an LU composition, restricted to
/// parts 1..D-1:
/// r_ij = sqrt( (1/alpha_i)(1/alpha_j) / (sum_{k!=i} 1/alpha_k)(sum_{k!=j} 1/alpha_k) ).
///
/// Every off-diagonal entry is strictly positive: the spurious signal from
/// the closure never vanishes at finite D.
pub fn lu_partial_correlation(alpha: &AlphaVector) -> PartialCorrMatrix {
    block_partial_correlation(alpha.values(), alpha.d() - 1)
}

/// All D x D pairs. The closed form is symmetric in the part indices, so
/// pairs touching the reference part come out of the same expression — this
/// is the reference-rotation argument packaged as a convenience wrapper.
pub fn lu_partial_correlation_full(alpha: &AlphaVector) -> PartialCorrMatrix {
    block_partial_correlation(alpha.values(), alpha.d())
}

fn block_partial_correlation(alpha: &[f64], size: usize) -> PartialCorrMatrix {
    let inv: Vec<f64> = alpha.iter().map(|&v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    // x_i = (1/alpha_i) / sum_{k != i} 1/alpha_k; r_ij = sqrt(x_i x_j).
    let x: Vec<f64> = inv.iter().map(|&v| v / (total - v)).collect();
    let values = DMatrix::from_fn(
        size,
        size,
        |i, j| {
            if i == j { 1.0 } else { (x[i] * x[j]).sqrt() }
        },
    );
    PartialCorrMatrix::from_values_unchecked(values)
}

/// The pair of parts (1-based) with the strongest closure-induced partial
/// correlation; ties break toward the lowest index pair.
pub fn strongest_pair(alpha: &AlphaVector) -> (usize, usize) {
    let inv: Vec<f64> = alpha.values().iter().map(|&v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    let x: Vec<f64> = inv.iter().map(|&v| v / (total - v)).collect();
    let mut best = (0usize, 1usize);
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let v = x[i] * x[j];
            if v > best_val {
                best_val = v;
                best = (i, j);
            }
        }
    }
    (best.0 + 1, best.1 + 1)
}

/// Deterministic removal order for [`dilution_experiment`]: parts with the
/// smallest 1/alpha leave first (ties by index), the tracked pair excluded.
pub fn removal_order_smallest(alpha: &AlphaVector, pair: (usize, usize)) -> Vec<usize> {
    let mut parts: Vec<usize> = (1..=alpha.d())
        .filter(|&p| p != pair.0 && p != pair.1)
        .collect();
    parts.sort_by(|&a, &b| {
        let ia = 1.0 / alpha.values()[a - 1];
        let ib = 1.0 / alpha.values()[b - 1];
        ia.partial_cmp(&ib).unwrap().then(a.cmp(&b))
    });
    parts.truncate(alpha.d().saturating_sub(3));
    parts
}

/// Seeded random removal order, pair excluded.
pub fn removal_order_random(alpha: &AlphaVector, pair: (usize, usize), seed: u64) -> Vec<usize> {
    let mut parts: Vec<usize> = (1..=alpha.d())
        .filter(|&p| p != pair.0 && p != pair.1)
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    parts.shuffle(&mut rng);
    parts.truncate(alpha.d().saturating_sub(3));
    parts
}

/// Recompute the closure-induced partial correlation of a fixed pair while
/// parts are removed one at a time.
///
/// `pair` and `order` are 1-based part indices into `alpha`; the order must
/// not touch the pair and may remove at most D - 3 parts. The returned
/// series is ordered by ascending part count and includes the starting
/// point at full D.
pub fn dilution_experiment(
    alpha: &AlphaVector,
    pair: (usize, usize),
    order: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let d = alpha.d();
    let (i, j) = pair;
    if i == 0 || i > d {
        return Err(Error::BadReferenceIndex { got: i, max: d });
    }
    if j == 0 || j > d || i == j {
        return Err(Error::BadReferenceIndex { got: j, max: d });
    }
    let mut seen = vec![false; d];
    for &p in order {
        if p == i || p == j {
            return Err(Error::PairRemoved { part: p });
        }
        if p == 0 || p > d {
            return Err(Error::BadReferenceIndex { got: p, max: d });
        }
        if seen[p - 1] {
            return Err(Error::Scenario(format!("part {p} removed twice")));
        }
        seen[p - 1] = true;
    }
    if order.len() > d - 3 {
        return Err(Error::Scenario(format!(
            "removal order of length {} would leave fewer than 3 parts",
            order.len()
        )));
    }

    let pair_r = |inv: &[f64], ii: usize, jj: usize| -> f64 {
        let total: f64 = inv.iter().sum();
        let xi = inv[ii] / (total - inv[ii]);
        let xj = inv[jj] / (total - inv[jj]);
        (xi * xj).sqrt()
    };

    // Walk the removals forward, then report by ascending part count.
    let mut series = Vec::with_capacity(order.len() + 1);
    let mut active: Vec<usize> = (0..d).collect();
    let mut inv: Vec<f64> = alpha.values().iter().map(|&v| 1.0 / v).collect();
    let pos =
        |active: &[usize], part0: usize| active.iter().position(|&p| p == part0).expect("active");
    series.push((
        active.len(),
        pair_r(&inv, pos(&active, i - 1), pos(&active, j - 1)),
    ));
    for &p in order {
        let at = pos(&active, p - 1);
        active.remove(at);
        inv.remove(at);
        series.push((
            active.len(),
            pair_r(&inv, pos(&active, i - 1), pos(&active, j - 1)),
        ));
    }
    series.reverse();
    Ok(series)
}
